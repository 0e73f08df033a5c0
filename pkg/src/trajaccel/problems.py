"""Seeded problem generators and LIBSVM ingestion.

Random numbers
--------------
All randomness comes from :class:`Xoshiro256`, a xoshiro256** generator
whose four state words are filled by successive splitmix64 outputs started
at the 64-bit seed. Derived draws:

* ``uniform()``: ``(next() >> 11) * 2**-53`` in ``[0, 1)``.
* ``normal()``: Box-Muller on ``u1 = 1 - uniform()`` (in ``(0, 1]``) and
  ``u2 = uniform()``, producing ``r cos(2 pi u2)`` and then
  ``r sin(2 pi u2)`` with ``r = sqrt(-2 log u1)``.
* ``below(n)``: ``(next() * n) >> 64`` (multiply-shift, no rejection).
* ``permutation(n)``: Fisher-Yates from the top, swapping ``i`` with
  ``below(i + 1)`` for ``i = n-1 .. 1``.

Matrices are filled row-major. Each generator documents its draw order so
that a port in another language reproduces the same instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO, Union

import numpy as np

from .dense import householder_qr
from .errors import InvalidConfigError, ParseError

_MASK = (1 << 64) - 1


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


def splitmix64(state):
    """One splitmix64 step; returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


class Xoshiro256:
    """xoshiro256** generator seeded through splitmix64."""

    def __init__(self, seed: int):
        state = int(seed) & _MASK
        words = []
        for _ in range(4):
            state, out = splitmix64(state)
            words.append(out)
        self._s = words
        self._spare = None

    def next(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        return (self.next() >> 11) * (1.0 / 9007199254740992.0)

    def normal(self) -> float:
        if self._spare is not None:
            out, self._spare = self._spare, None
            return out
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, count) -> np.ndarray:
        return np.array([self.normal() for _ in range(int(count))], dtype=float)

    def below(self, n) -> int:
        return (self.next() * int(n)) >> 64

    def permutation(self, n) -> np.ndarray:
        perm = list(range(int(n)))
        for i in range(len(perm) - 1, 0, -1):
            j = self.below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return np.array(perm, dtype=int)


def random_gaussian_matrix(m, n, seed=None, rng=None):
    """``m x n`` matrix of standard normals drawn row-major."""
    if m < 1 or n < 1:
        raise InvalidConfigError("matrix dimensions must be positive")
    rng = Xoshiro256(seed) if rng is None else rng
    return rng.normals(m * n).reshape(m, n)


def random_orthogonal(n, seed=None, rng=None):
    """Orthogonal factor of the QR decomposition of a seeded Gaussian matrix."""
    G = random_gaussian_matrix(n, n, seed, rng)
    return householder_qr(G)[0]


# --------------------------------------------------------------------------
# Problem instances

KINDS = ("lasso", "basis_pursuit", "group_bp", "lowrank_bp", "feasibility_2lines",
         "pcp_toy", "pd_l1_affine")


@dataclass
class ProblemInstance:
    """Data of one seeded test problem.

    Attributes
    ----------
    kind : str
    A : ndarray or None
        Measurement matrix (``None`` for the two-line and PCP problems).
    f : ndarray or None
        Observation vector; for the PCP toy this is the observed matrix,
        flattened row-major.
    x_ob : ndarray or None
        Planted solution.
    x0 : ndarray
        Starting point.
    params : dict
        Problem constants (``mu``, ``mu1``, ``mu2``, ``block_size``,
        ``shape``, ``normals``, ``angle``...).
    meta : dict
        Generation settings.
    noise : ndarray or None
        The additive noise vector when noise was requested.
    """

    kind: str
    A: Optional[np.ndarray]
    f: Optional[np.ndarray]
    x_ob: Optional[np.ndarray]
    x0: np.ndarray
    params: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    noise: Optional[np.ndarray] = None


def _planted_sparse(rng, n, sparsity):
    support = np.sort(rng.permutation(n)[:sparsity])
    x = np.zeros(n)
    x[support] = rng.normals(sparsity)
    return x


def gen_problem(kind, m=48, n=128, sparsity=8, rank=2, noise=0.0, seed=0, mu=1.0,
                block_size=4, shape=None, angle=math.pi / 6, mu1=None, mu2=None):
    """Build a seeded :class:`ProblemInstance`.

    Draw order (all from one :class:`Xoshiro256` stream):

    * ``lasso``, ``basis_pursuit``, ``pd_l1_affine``: ``A`` (m x n), support
      permutation of ``n``, ``sparsity`` nonzero values, then ``m`` noise
      values scaled by ``noise`` (lasso only, when ``noise > 0``).
    * ``group_bp``: ``A``, permutation of the ``n / block_size`` blocks,
      then ``sparsity * block_size`` values for the active blocks.
    * ``lowrank_bp``: ``A`` (m x rows*cols), left factor (rows x rank),
      right factor (cols x rank).
    * ``feasibility_2lines``: orientation ``2 pi u`` and a 2-vector start.
    * ``pcp_toy``: absolute-value factors (n x rank twice), sparse support
      permutation of ``n*n``, sparse values (times 2), then noise.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS`.
    m, n : int
        Rows and columns of ``A``; for ``pcp_toy`` the image is ``n x n``.
    sparsity : int
        Nonzero entries (lasso/basis pursuit), active blocks (group_bp) or
        sparse outliers (pcp_toy).
    rank : int
        Rank of the planted matrix (lowrank_bp, pcp_toy).
    noise : float
        Standard deviation of additive Gaussian noise.
    seed : int
    mu : float
        Weight of the regularizer.
    block_size : int
        Group size for ``group_bp``.
    shape : tuple of int, optional
        Matrix shape for ``lowrank_bp``; defaults to a square with ``n``
        entries.
    angle : float
        Angle between the two lines of ``feasibility_2lines``.
    mu1, mu2 : float, optional
        Sparse and low-rank weights of ``pcp_toy``.
    """
    if kind not in KINDS:
        raise InvalidConfigError(f"unknown problem kind {kind!r}")
    if m < 1 or n < 1:
        raise InvalidConfigError("dimensions must be positive")
    if noise < 0:
        raise InvalidConfigError("noise level must be nonnegative")
    rng = Xoshiro256(seed)
    meta = dict(kind=kind, m=m, n=n, sparsity=sparsity, rank=rank, noise=noise, seed=seed)

    if kind in ("lasso", "basis_pursuit", "pd_l1_affine"):
        if not 0 <= sparsity <= n:
            raise InvalidConfigError("sparsity must lie between 0 and n")
        A = random_gaussian_matrix(m, n, rng=rng)
        x_ob = _planted_sparse(rng, n, sparsity)
        f = A @ x_ob
        w = None
        if kind == "lasso" and noise > 0:
            w = noise * rng.normals(m)
            f = f + w
        return ProblemInstance(kind, A, f, x_ob, np.zeros(n), dict(mu=mu), meta, w)

    if kind == "group_bp":
        if block_size < 1 or n % block_size:
            raise InvalidConfigError("block_size must divide n")
        groups = n // block_size
        if not 0 <= sparsity <= groups:
            raise InvalidConfigError("active block count exceeds the number of blocks")
        A = random_gaussian_matrix(m, n, rng=rng)
        active = np.sort(rng.permutation(groups)[:sparsity])
        values = rng.normals(sparsity * block_size).reshape(sparsity, block_size)
        x_ob = np.zeros((groups, block_size))
        x_ob[active] = values
        x_ob = x_ob.ravel()
        meta["block_size"] = block_size
        return ProblemInstance(kind, A, A @ x_ob, x_ob, np.zeros(n),
                               dict(mu=mu, block_size=block_size), meta)

    if kind == "lowrank_bp":
        if shape is None:
            side = int(round(math.sqrt(n)))
            shape = (side, side)
        rows, cols = (int(s) for s in shape)
        if rows * cols != n:
            raise InvalidConfigError("shape must have n entries")
        if not 1 <= rank <= min(rows, cols):
            raise InvalidConfigError("rank must lie between 1 and min(shape)")
        A = random_gaussian_matrix(m, n, rng=rng)
        P = rng.normals(rows * rank).reshape(rows, rank)
        Q = rng.normals(cols * rank).reshape(cols, rank)
        x_ob = (P @ Q.T).ravel()
        meta["shape"] = (rows, cols)
        return ProblemInstance(kind, A, A @ x_ob, x_ob, np.zeros(n),
                               dict(mu=mu, shape=(rows, cols)), meta)

    if kind == "feasibility_2lines":
        if not 0 < angle < math.pi / 2 + 1e-15:
            raise InvalidConfigError("line angle must lie in (0, pi/2]")
        beta = 2.0 * math.pi * rng.uniform()
        normals = np.array([[-math.sin(beta), math.cos(beta)],
                            [-math.sin(beta + angle), math.cos(beta + angle)]])
        x0 = rng.normals(2)
        meta["angle"] = angle
        return ProblemInstance(kind, None, None, np.zeros(2), x0,
                               dict(normals=normals, angle=angle), meta)

    # pcp_toy
    if not 1 <= rank <= n:
        raise InvalidConfigError("rank must lie between 1 and n")
    if not 0 <= sparsity <= n * n:
        raise InvalidConfigError("sparsity must lie between 0 and n*n")
    P = np.abs(rng.normals(n * rank).reshape(n, rank))
    Q = np.abs(rng.normals(n * rank).reshape(n, rank))
    low_rank = P @ Q.T
    sparse = np.zeros(n * n)
    support = np.sort(rng.permutation(n * n)[:sparsity])
    sparse[support] = 2.0 * rng.normals(sparsity)
    observed = low_rank.ravel() + sparse
    w = None
    if noise > 0:
        w = noise * rng.normals(n * n)
        observed = observed + w
    params = dict(shape=(n, n), mu1=0.1 if mu1 is None else mu1,
                  mu2=0.1 if mu2 is None else mu2, sparse=sparse)
    meta["shape"] = (n, n)
    return ProblemInstance(kind, None, observed, low_rank.ravel(), np.zeros(n * n),
                           params, meta, w)


# --------------------------------------------------------------------------
# LIBSVM text format


def parse_libsvm(source: Union[str, TextIO, Iterable[str]], max_rows=2000):
    """Parse ``label idx:val idx:val ...`` lines into a dense matrix.

    Indices are 1-based and strictly increasing within a line. Text after
    ``#`` is ignored, as are blank lines. At most ``max_rows`` data lines are
    read (``None`` for no cap).

    Returns
    -------
    X : (rows, width) ndarray
        ``width`` is the largest index seen.
    y : (rows,) ndarray

    Raises
    ------
    ParseError
        With the 1-based line number of the first malformed line.
    """
    lines = source.splitlines() if isinstance(source, str) else source
    labels = []
    rows = []
    width = 0
    for line_no, raw in enumerate(lines, start=1):
        if max_rows is not None and len(labels) >= max_rows:
            break
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        tokens = text.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", line_no) from None
        if not math.isfinite(label):
            raise ParseError("label is not finite", line_no)
        entries = {}
        last = 0
        for token in tokens[1:]:
            idx_text, sep, val_text = token.partition(":")
            if not sep:
                raise ParseError(f"malformed token {token!r}", line_no)
            try:
                idx = int(idx_text)
                val = float(val_text)
            except ValueError:
                raise ParseError(f"malformed token {token!r}", line_no) from None
            if idx < 1:
                raise ParseError(f"index {idx} is not positive", line_no)
            if idx <= last:
                raise ParseError(f"index {idx} does not increase", line_no)
            if not math.isfinite(val):
                raise ParseError(f"value in {token!r} is not finite", line_no)
            entries[idx] = val
            last = idx
        width = max(width, last)
        labels.append(label)
        rows.append(entries)
    X = np.zeros((len(rows), width))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            X[i, idx - 1] = val
    return X, np.array(labels, dtype=float)


def format_libsvm(X, y):
    """Serialize a dense matrix and labels, writing only nonzero entries."""
    out = []
    for label, row in zip(np.asarray(y, dtype=float), np.asarray(X, dtype=float)):
        items = [f"{j + 1}:{v:.17g}" for j, v in enumerate(row) if v != 0.0]
        out.append(" ".join([f"{label:.17g}"] + items))
    return "\n".join(out) + ("\n" if out else "")
