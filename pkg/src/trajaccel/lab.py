"""Linear systems with prescribed spectra and their closed-form trajectory geometry.

For ``z_{k+1} = M z_k`` the displacements obey ``v_{k+1} = M v_k``, so the
angles between successive displacements are governed by the leading
eigen-structure of ``M``:

* Type I (symmetric, real spectrum): the angle goes to zero with
  ``1 - cos(theta_k) ~ eta^(2k)``.
* Type II (normal, one leading rotation block): ``cos(theta_k) -> cos(psi)``.
* Type III (coupled 2x2 blocks, an elliptical spiral): ``theta_k`` keeps
  oscillating inside an interval computed from a circular rotation composed
  with an elliptical one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .diagnostics import TraceRecord, log_linear_slope
from .errors import DivergenceError, InvalidConfigError
from .problems import Xoshiro256, random_orthogonal


@dataclass
class Prediction:
    """Closed-form trajectory predictions of a lab matrix."""

    eta: float
    rate: float
    limit_cos: Optional[float] = None
    angle_interval: Optional[Tuple[float, float]] = None


@dataclass
class LabMatrix:
    """A constructed linear map with its predicted trajectory geometry."""

    M: np.ndarray
    type_tag: str
    predicted: Prediction
    seed: Optional[int] = None
    geometry: dict = field(default_factory=dict)
    basis: Optional[np.ndarray] = None

    def balanced_start(self):
        """Start vector with unit weight on every column of the orthogonal basis.

        No invariant direction is favoured, which keeps transients short.
        """
        return self.basis @ np.ones(self.basis.shape[1])


class NotARotationError(InvalidConfigError):
    """The composite map has real eigenvalues, so it is not a rotation."""


# --------------------------------------------------------------------------
# Constructors


def make_type1(sigmas: Sequence[float], seed=0):
    """Symmetric ``M = U diag(sigmas) U^T`` with a seeded orthogonal ``U``.

    ``sigmas`` must be descending in ``(-1, 1]`` with a strictly dominant,
    nonzero first entry.
    """
    s = np.asarray(sigmas, dtype=float).ravel()
    if s.size == 0 or np.any(s > 1) or np.any(s <= -1):
        raise InvalidConfigError("type I spectrum must lie in (-1, 1]")
    if np.any(np.diff(s) > 0):
        raise InvalidConfigError("type I spectrum must be descending")
    if s[0] <= 0 or np.any(np.abs(s[1:]) >= s[0]):
        raise InvalidConfigError("type I spectrum needs a strictly dominant positive first value")
    U = random_orthogonal(s.size, seed)
    M = (U * s) @ U.T
    eta = float(max(s[1], abs(s[-1])) / s[0]) if s.size > 1 else 0.0
    return LabMatrix(M, "I", Prediction(eta=eta, rate=float(s[0]), limit_cos=1.0), seed,
                     basis=U)


def circular_rotation(psi):
    """Counter-clockwise rotation by ``psi``."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s], [s, c]])


def make_type2(psi, modulus, tail_moduli=(), seed=0):
    """Normal ``M`` with a leading block ``modulus * [[cos, sin], [-sin, cos]]``.

    ``tail_moduli`` are real eigenvalues of the trailing part; all must be
    smaller than ``modulus`` in absolute value. The whole matrix is
    conjugated by a seeded orthogonal matrix.
    """
    tail = np.asarray(tail_moduli, dtype=float).ravel()
    if not 0 < modulus < 1:
        raise InvalidConfigError("leading modulus must lie in (0, 1)")
    if np.any(np.abs(tail) >= modulus):
        raise InvalidConfigError("tail moduli must be smaller than the leading modulus")
    if not 0 < psi < math.pi:
        raise InvalidConfigError("rotation angle must lie in (0, pi)")
    n = 2 + tail.size
    D = np.zeros((n, n))
    D[:2, :2] = modulus * circular_rotation(psi).T
    D[np.arange(2, n), np.arange(2, n)] = tail
    U = random_orthogonal(n, seed)
    eta = float(np.max(np.abs(tail)) / modulus) if tail.size else 0.0
    pred = Prediction(eta=eta, rate=float(modulus), limit_cos=math.cos(psi))
    return LabMatrix(U @ D @ U.T, "II", pred, seed, dict(psi=psi), U)


def arccot(num, den):
    """``arccot(num / den)`` in ``(0, pi)``, defined for ``den = 0`` as well."""
    if den < 0:
        num, den = -num, -den
    return math.atan2(den, num) if (num != 0 or den != 0) else math.pi / 2


def block_geometry(a, b, c, delta=1.0, tau=1.0):
    """Rotation decomposition of ``D = [[a, -delta c], [tau c, b]]``.

    Writes ``D = sigma * R(psi) * E(phi, s/l)`` with ``R`` a circular rotation
    and ``E`` an elliptical rotation.

    Returns
    -------
    psi, phi, axis_ratio, modulus : float

    Raises
    ------
    InvalidConfigError
        If ``D`` has real eigenvalues or no such decomposition exists.
    """
    disc = (a - b) ** 2 - 4.0 * delta * tau * c * c
    if disc >= 0:
        raise InvalidConfigError("block has real eigenvalues; no rotation decomposition")
    sigma = math.sqrt(delta * tau * c * c + a * b)
    psi = arccot((tau - delta) * c, b - a)
    cos_phi = ((delta + tau) * c * math.sin(psi) + (a + b) * math.cos(psi)) / (2.0 * sigma)
    if abs(cos_phi) > 1.0:
        raise InvalidConfigError("block admits no circular-elliptical decomposition")
    phi = math.acos(cos_phi)
    ratio = b / (sigma * math.sin(psi) * math.sin(phi)) - 1.0 / (math.tan(psi) * math.tan(phi))
    if not ratio > 0:
        raise InvalidConfigError("block admits no circular-elliptical decomposition")
    return psi, phi, ratio, sigma


def make_type3(a, b, c, delta=1.0, tau=1.0, seed=0, tail=()):
    """Coupled block matrix ``[[A, -delta C^T], [tau C, B]]``.

    ``A = X diag(a) X^T``, ``B = Y diag(b) Y^T`` and ``C = Y diag(c) X^T``
    with seeded orthogonal ``X, Y``, so that ``M`` is orthogonally similar to
    the 2x2 blocks ``[[a_i, -delta c_i], [tau c_i, b_i]]``. Extra real
    eigenvalues in ``tail`` are appended and the result conjugated by one
    more seeded orthogonal matrix.

    The prediction uses the block of largest modulus, which must be complex.
    """
    a, b, c = (np.atleast_1d(np.asarray(t, dtype=float)) for t in (a, b, c))
    if not (a.shape == b.shape == c.shape):
        raise InvalidConfigError("block spectra must have equal length")
    if delta <= 0 or tau <= 0:
        raise InvalidConfigError("coupling weights must be positive")
    tail = np.asarray(tail, dtype=float).ravel()
    moduli = []
    for ai, bi, ci in zip(a, b, c):
        disc = (ai - bi) ** 2 - 4.0 * delta * tau * ci * ci
        if disc < 0:
            mod = delta * tau * ci * ci + ai * bi
            if not mod < 1.0:
                raise InvalidConfigError(
                    "block modulus assumption violated: need delta*tau*c^2 + a*b < 1")
            moduli.append((math.sqrt(mod), True))
        else:
            roots = np.array([ai + bi - math.sqrt(disc), ai + bi + math.sqrt(disc)]) / 2
            if np.any(roots > 1) or np.any(roots <= -1):
                raise InvalidConfigError("real block eigenvalues must lie in (-1, 1]")
            moduli.append((float(np.max(np.abs(roots))), False))
    if np.any(np.abs(tail) >= 1):
        raise InvalidConfigError("tail eigenvalues must lie in (-1, 1)")

    m = a.size
    X = random_orthogonal(m, seed)
    Y = random_orthogonal(m, seed + 1)
    A = (X * a) @ X.T
    B = (Y * b) @ Y.T
    C = (Y * c) @ X.T
    M = np.block([[A, -delta * C.T], [tau * C, B]])
    basis = np.block([[X, np.zeros((m, m))], [np.zeros((m, m)), Y]])
    if tail.size:
        n = 2 * m + tail.size
        core = np.zeros((n, n))
        core[: 2 * m, : 2 * m] = M
        core[np.arange(2 * m, n), np.arange(2 * m, n)] = tail
        W = random_orthogonal(n, seed + 2)
        M = W @ core @ W.T
        full = np.eye(n)
        full[: 2 * m, : 2 * m] = basis
        basis = W @ full

    all_moduli = sorted([mod for mod, _ in moduli] + list(np.abs(tail)), reverse=True)
    lead = int(np.argmax([mod for mod, _ in moduli]))
    lead_mod, lead_complex = moduli[lead]
    others = sorted([mod for i, (mod, _) in enumerate(moduli) if i != lead] + list(np.abs(tail)),
                    reverse=True)
    eta = others[0] / lead_mod if others and lead_mod > 0 else 0.0
    pred = Prediction(eta=float(eta), rate=float(all_moduli[0]))
    geometry = {}
    if lead_complex and lead_mod >= max(np.abs(tail), default=0.0):
        psi, phi, ratio, sigma = block_geometry(a[lead], b[lead], c[lead], delta, tau)
        pred.angle_interval = composite_rotation_bounds(psi, phi, ratio)
        geometry = dict(psi=psi, phi=phi, axis_ratio=ratio, modulus=sigma)
    return LabMatrix(M, "III", pred, seed, geometry, basis)


# --------------------------------------------------------------------------
# Rotation geometry


def elliptical_rotation(axis_ratio, phi):
    """Elliptical rotation and the ranges of its norm ratio and turning angle.

    Parameters
    ----------
    axis_ratio : float
        Ratio ``s/l`` of the ellipse axes.
    phi : float
        Rotation parameter in ``(0, pi)``.

    Returns
    -------
    R : (2, 2) ndarray
        ``[[cos phi, r sin phi], [-sin phi / r, cos phi]]`` with ``r = s/l``.
    ratio_interval : tuple
        Range of ``||R x||^2 / ||x||^2``.
    chi_interval : tuple
        Range of the angle between ``x`` and ``R x``.
    """
    r = float(axis_ratio)
    if not r > 0:
        raise InvalidConfigError("axis ratio must be positive")
    if not 0 < phi < math.pi:
        raise InvalidConfigError("phi must lie in (0, pi)")
    cp, sp = math.cos(phi), math.sin(phi)
    R = np.array([[cp, r * sp], [-sp / r, cp]])
    e = (r * r - 1.0) / (r * r + 1.0)
    zeta = math.acos(-e * cp)
    low = (e * math.cos(zeta - phi) + 1.0) / (e * math.cos(zeta + phi) + 1.0)
    ratio_interval = tuple(sorted((low, 1.0 / low)))
    a = r / 2.0 + 1.0 / (2.0 * r)
    b = abs(r / 2.0 - 1.0 / (2.0 * r))
    cos_max = (a * cp - b) / math.sqrt(sp * sp + (a * cp - b) ** 2)
    cos_min = (a * cp + b) / math.sqrt(sp * sp + (a * cp + b) ** 2)
    chi_interval = (math.acos(min(1.0, cos_min)), math.acos(max(-1.0, cos_max)))
    return R, ratio_interval, chi_interval


def composite_rotation_bounds(psi, phi, axis_ratio):
    """Turning-angle range of ``R(psi) E(phi, s/l)``: ``[psi - chi_max, psi - chi_min]``.

    Raises
    ------
    NotARotationError
        When the composite map has real eigenvalues.
    """
    r = float(axis_ratio)
    disc = ((1.0 / r + r) * math.sin(psi) * math.sin(phi) + 2.0 * math.cos(psi) * math.cos(phi)) ** 2
    if disc >= 4.0:
        raise NotARotationError("composite map has real eigenvalues")
    _, _, (chi_min, chi_max) = elliptical_rotation(r, phi)
    return (psi - chi_max, psi - chi_min)


def pd_leading_block(gamma_r, gamma_j, tau, sigma):
    """Decompose the leading 2x2 block of the linearized primal-dual map.

    The block ``[[1, -gR s], [gJ s, 1 - (1+tau) gR gJ s^2]]`` is written as
    ``modulus * R(psi) * E(phi, s/l)``.

    Returns
    -------
    psi, phi, axis_ratio, modulus : float

    Raises
    ------
    InvalidConfigError
        If ``gamma_r * gamma_j * sigma^2 >= 1``, if the block has real
        eigenvalues, or if no decomposition exists.
    """
    if not (gamma_r > 0 and gamma_j > 0 and sigma > 0):
        raise InvalidConfigError("step sizes and singular value must be positive")
    if not gamma_r * gamma_j * sigma ** 2 < 1.0:
        raise InvalidConfigError("need gamma_r * gamma_j * sigma^2 < 1")
    if not 0.0 <= tau <= 1.0:
        raise InvalidConfigError("tau must lie in [0, 1]")
    b = 1.0 - (1.0 + tau) * gamma_r * gamma_j * sigma ** 2
    return block_geometry(1.0, b, sigma, gamma_r, gamma_j)


def pd_block_matrix(gamma_r, gamma_j, tau, sigma):
    """The leading 2x2 block itself."""
    return np.array([[1.0, -gamma_r * sigma],
                     [gamma_j * sigma, 1.0 - (1.0 + tau) * gamma_r * gamma_j * sigma ** 2]])


def rotation_orbit(R, x0, K):
    """Norm ratios ``||x_k||^2/||x_{k-1}||^2`` and angles along ``x_k = R x_{k-1}``.

    Iterates are renormalized each step, which leaves both quantities unchanged.
    """
    x = np.asarray(x0, dtype=float)
    x = x / np.linalg.norm(x)
    ratios = np.empty(K)
    angles = np.empty(K)
    for k in range(K):
        y = R @ x
        ny = np.linalg.norm(y)
        ratios[k] = ny * ny
        angles[k] = math.acos(min(1.0, max(-1.0, float(x @ y) / ny)))
        x = y / ny
    return ratios, angles


# --------------------------------------------------------------------------
# Linear trajectories


@dataclass
class LinearTrace:
    """Angle data along ``z_{k+1} = M z_k`` (index ``k-1`` holds step ``k``)."""

    cos_theta: np.ndarray
    one_minus_cos: np.ndarray
    cos_vartheta: np.ndarray
    log_v_norm: np.ndarray
    records: List[TraceRecord]

    @property
    def theta(self):
        return np.arccos(np.clip(self.cos_theta, -1.0, 1.0))


def run_linear(M, z0, K, z_star=None):
    """Iterate ``z_{k+1} = M z_k`` for ``K`` steps and record angle diagnostics.

    Iterates are kept as a unit direction plus a log-scale so that long runs
    neither underflow nor overflow. The limit is ``z* = 0`` (``z_star`` may
    override it only when it is zero, since a nonzero limit breaks the
    scale invariance used here). The trace stops at the first zero
    displacement.

    Returns
    -------
    LinearTrace

    Raises
    ------
    DivergenceError
        If the iterates grow beyond ``1e12`` times the start.
    """
    M = np.asarray(M, dtype=float)
    z = np.asarray(z0, dtype=float)
    if K < 2:
        raise InvalidConfigError("need at least two steps")
    if z_star is not None and np.any(np.asarray(z_star) != 0):
        raise InvalidConfigError("run_linear tracks the limit z* = 0 only")
    norm0 = np.linalg.norm(z)
    if norm0 == 0:
        raise InvalidConfigError("start must be nonzero")
    direction = z / norm0
    log_scale = math.log(norm0)
    cos_theta = np.full(K, np.nan)
    omc = np.full(K, np.nan)
    cos_vt = np.full(K, np.nan)
    log_v = np.full(K, -np.inf)
    records = []
    prev_dir = None
    for k in range(K):
        y = M @ direction
        step = y - direction
        ns = np.linalg.norm(step)
        if ns == 0.0:
            break
        d = step / ns
        log_v[k] = log_scale + math.log(ns)
        rec = TraceRecord(k + 1, math.exp(log_v[k]) if log_v[k] > -700 else 0.0)
        ny = np.linalg.norm(y)
        if prev_dir is not None:
            e = d - prev_dir
            omc[k] = 0.5 * float(e @ e)
            cos_theta[k] = 1.0 - omc[k]
            rec.cos_theta = float(cos_theta[k])
        if ny > 0:
            cos_vt[k] = float(np.clip(-(d @ y) / ny, -1.0, 1.0))
            rec.cos_vartheta = float(cos_vt[k])
        records.append(rec)
        if ny == 0.0:
            break
        log_scale += math.log(ny)
        if log_scale > math.log(norm0) + math.log(1e12):
            raise DivergenceError(f"linear iteration blew up at k={k + 1}", records)
        direction = y / ny
        prev_dir = d
    n = len(records)
    return LinearTrace(cos_theta[:n], omc[:n], cos_vt[:n], log_v[:n], records)


def friedrichs_angle_lines(normals):
    """Angle between two lines through the origin given by their normals."""
    n1, n2 = (np.asarray(v, dtype=float) for v in normals)
    c = abs(float(n1 @ n2)) / (np.linalg.norm(n1) * np.linalg.norm(n2))
    return math.acos(min(1.0, c))


def seeded_start(n, seed):
    """Gaussian start vector drawn from the package generator."""
    return Xoshiro256(seed).normals(n)


# --------------------------------------------------------------------------
# Predicted-versus-measured experiments


@dataclass
class LabCheck:
    """One predicted-versus-measured comparison."""

    name: str
    predicted: object
    measured: object
    tolerance: float
    passed: bool
    note: str = ""

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        text = f"{self.name}: predicted={_fmt(self.predicted)} measured={_fmt(self.measured)}"
        text += f" tolerance={self.tolerance:g}: {verdict}"
        return text + (f" ({self.note})" if self.note else "")


def _fmt(value):
    if isinstance(value, tuple):
        return "(" + ", ".join(_fmt(v) for v in value) + ")"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _floats(value):
    if isinstance(value, (int, float)):
        return [float(value)]
    return [float(v) for v in value]


def type1_experiment(sigmas, seed=0, iterations=400, window=(100, 400), rel_tol=0.05):
    """Fit the decay rate of ``1 - cos(theta_k)`` against ``2 log eta``."""
    L = make_type1(sigmas, seed)
    if L.M.shape[0] == 1:
        check = LabCheck("angle between successive steps", 0.0, 0.0, 0.0, True,
                         "single eigenvalue: the trajectory is a line, nothing to fit")
        return L, run_linear(L.M, L.balanced_start(), 2), [check]
    trace = run_linear(L.M, L.balanced_start(), iterations)
    target = 2.0 * math.log(L.predicted.eta)
    lo, hi = window
    slope = log_linear_slope(trace.one_minus_cos, lo, hi)
    ok = abs(slope - target) <= rel_tol * abs(target)
    check = LabCheck(f"log-slope of 1-cos(theta_k) over k={lo}..{hi}", target, slope,
                     rel_tol, ok, "relative tolerance")
    return L, trace, [check]


def type2_experiment(psi, eta, modulus=0.99, seed=0, iterations=1000, settle=300, tol=1e-6):
    """Check ``cos(theta_k) -> cos(psi)`` after ``settle`` steps."""
    L = make_type2(psi, modulus, [eta * modulus], seed)
    trace = run_linear(L.M, L.balanced_start(), iterations)
    err = float(np.max(np.abs(trace.cos_theta[settle - 1:] - math.cos(psi))))
    check = LabCheck(f"measured limit cos theta within {tol:g} of cos({psi:g}) from k={settle}",
                     math.cos(psi), float(trace.cos_theta[-1]), tol, err <= tol)
    return L, trace, [check]


def type3_experiment(a, b, c, delta=1.0, tau=1.0, seed=0, tail=(), iterations=10000, skip=50,
                     slack=1e-9):
    """Check that ``theta_k`` stays inside the predicted interval for ``k >= skip``."""
    L = make_type3(a, b, c, delta, tau, seed, tail)
    if L.predicted.angle_interval is None:
        raise InvalidConfigError("the leading block is real, so no angle interval is predicted")
    trace = run_linear(L.M, L.balanced_start(), iterations)
    theta = trace.theta[skip - 1:]
    lo, hi = L.predicted.angle_interval
    measured = (float(theta.min()), float(theta.max()))
    ok = measured[0] >= lo - slack and measured[1] <= hi + slack
    check = LabCheck(f"theta_k range for k>={skip}", (lo, hi), measured, slack, ok,
                     "must lie inside the predicted interval")
    return L, trace, [check]


def ellipse_experiment(axis_ratio, phi, iterations=10000, psi=None, tol=1e-3):
    """Compare orbit extremes of an elliptical (or composite) rotation with the formulas."""
    R, ratio_interval, chi_interval = elliptical_rotation(axis_ratio, phi)
    x0 = np.array([1.0, 0.0])
    ratios, angles = rotation_orbit(R, x0, iterations)
    checks = [
        LabCheck("norm ratio range", ratio_interval, (float(ratios.min()), float(ratios.max())),
                 tol, abs(ratios.min() - ratio_interval[0]) <= tol
                 and abs(ratios.max() - ratio_interval[1]) <= tol),
        LabCheck("turning angle range", chi_interval, (float(angles.min()), float(angles.max())),
                 tol, abs(angles.min() - chi_interval[0]) <= tol
                 and abs(angles.max() - chi_interval[1]) <= tol),
    ]
    if psi is not None:
        interval = composite_rotation_bounds(psi, phi, axis_ratio)
        _, comp = rotation_orbit(circular_rotation(psi) @ R, x0, iterations)
        checks.append(LabCheck("composite turning angle range", interval,
                               (float(comp.min()), float(comp.max())), tol,
                               abs(comp.min() - interval[0]) <= tol
                               and abs(comp.max() - interval[1]) <= tol))
    return checks


def pd_experiment(gamma_r, gamma_j, tau, sigma, tol=1e-10):
    """Rebuild the primal-dual block from its rotation decomposition."""
    psi, phi, ratio, modulus = pd_leading_block(gamma_r, gamma_j, tau, sigma)
    block = pd_block_matrix(gamma_r, gamma_j, tau, sigma)
    rebuilt = modulus * circular_rotation(psi) @ elliptical_rotation(ratio, phi)[0]
    err = float(np.max(np.abs(rebuilt - block)))
    eig = float(np.max(np.abs(np.linalg.eigvals(block))))
    expected = math.sqrt(1.0 - tau * gamma_r * gamma_j * sigma ** 2)
    return [
        LabCheck("block reconstruction max error", 0.0, err, tol, err <= tol),
        LabCheck("eigenvalue modulus", expected, eig, 1e-12, abs(eig - expected) <= 1e-12),
    ]
