"""Trajectory-following linear prediction and vector extrapolation.

The predictor fits the newest displacement ``v_k`` as a combination of the
``q`` previous ones, ``v_k ~ sum_j c_j v_{k-j}``, and continues the fitted
recurrence ``s`` steps ahead (or to its limit) through powers of the
companion matrix ``H(c)``. MPE and RRE are the classical window-based
extrapolations the limit prediction is compared against.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .dense import companion_max_modulus, least_squares, solve_linear
from .errors import InvalidConfigError, SingularSystemError, TrajAccelError

#: Spectral radius guard: extrapolate only when rho(C) < 1 - RHO_MARGIN.
RHO_MARGIN = 1e-10
#: Skip the limit prediction when |1 - sum(c)| falls below this value.
ONE_MINUS_SUM_TOL = 1e-10
#: MPE gives up when |sum(c)| falls below this value.
MPE_DEGENERATE_TOL = 1e-12
#: Horizon used when a finite prediction is requested without a value.
DEFAULT_FINITE_HORIZON = 100


class ExtrapolationRejected(TrajAccelError):
    """A prediction was skipped; ``reason`` is ``"rho"``, ``"degenerate"`` or ``"angle"``."""

    def __init__(self, reason, message=""):
        super().__init__(message or reason)
        self.reason = reason


class DegenerateExtrapolation(ExtrapolationRejected):
    """The MPE normalizer vanished."""

    def __init__(self, message="extrapolation weights do not normalize"):
        super().__init__("degenerate", message)


# --------------------------------------------------------------------------
# Buffer and fit


class DifferenceBuffer:
    """The last ``q`` displacements, newest first.

    Column ``j`` (0-based) of :meth:`matrix` is ``z_{k-j} - z_{k-j-1}``.
    """

    def __init__(self, q):
        if q < 1:
            raise InvalidConfigError("window size q must be at least 1")
        self.q = int(q)
        self._cols = deque(maxlen=self.q)

    def push(self, v):
        self._cols.appendleft(np.array(v, dtype=float))

    @property
    def count_filled(self):
        return len(self._cols)

    @property
    def full(self):
        return len(self._cols) == self.q

    def matrix(self):
        return np.column_stack(list(self._cols))

    def clear(self):
        self._cols.clear()


@dataclass
class FitResult:
    """Fitted coefficients with their residual and companion diagnostics."""

    c: np.ndarray
    epsilon: float
    rho: float
    one_minus_sum: float


def fit_coefficients(V_prev, v_k):
    """Fit ``v_k ~ V_prev c`` in the least-squares sense.

    Columns are scaled to unit norm before the solve and the coefficients
    are scaled back afterwards, which tames nearly collinear windows.

    Parameters
    ----------
    V_prev : (n, q) array_like
        Displacements ``[v_{k-1}, ..., v_{k-q}]``.
    v_k : (n,) array_like

    Returns
    -------
    FitResult
    """
    V_prev = np.asarray(V_prev, dtype=float)
    v_k = np.asarray(v_k, dtype=float)
    norms = np.linalg.norm(V_prev, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    c_scaled, _ = least_squares(V_prev / scale, v_k)
    c = c_scaled / scale
    return make_fit(V_prev, v_k, c)


def make_fit(V_prev, v_k, c):
    """Populate a :class:`FitResult` for given coefficients."""
    c = np.asarray(c, dtype=float)
    epsilon = float(np.linalg.norm(V_prev @ c - v_k))
    return FitResult(c, epsilon, companion_max_modulus(c), float(1.0 - np.sum(c)))


def companion(c):
    """Companion matrix with ``c`` in the first column and ones on the superdiagonal."""
    c = np.asarray(c, dtype=float)
    q = c.shape[0]
    H = np.zeros((q, q))
    H[:, 0] = c
    H[np.arange(q - 1), np.arange(1, q)] = 1.0
    return H


# --------------------------------------------------------------------------
# Predictions


def power_sum_first_column(C, s):
    """First column of ``sum_{i=1}^{s} C^i``.

    Uses ``(I - C)^{-1} (C - C^{s+1}) e_1`` and falls back to accumulating
    powers when ``I - C`` is numerically singular.
    """
    C = np.asarray(C, dtype=float)
    q = C.shape[0]
    e1 = np.zeros(q)
    e1[0] = 1.0
    first = C @ e1
    last = first.copy()
    for _ in range(s):
        last = C @ last
    try:
        return solve_linear(np.eye(q) - C, first - last)
    except SingularSystemError:
        total = np.zeros(q)
        col = e1
        for _ in range(s):
            col = C @ col
            total += col
        return total


def predict_finite(z_k, V_k, C, s):
    """``s``-step continuation ``z_k + V_k (sum_{i=1}^{s} C^i)_{:,1}``."""
    if s < 1:
        raise InvalidConfigError("prediction horizon must be at least 1")
    return np.asarray(z_k, dtype=float) + np.asarray(V_k) @ power_sum_first_column(C, int(s))


def predict_infinite(z_prev, V_k, C):
    """Limit of the fitted recurrence, ``z_{k-1} + V_k ((I - C)^{-1})_{:,1}``.

    Raises
    ------
    ExtrapolationRejected
        ``reason="rho"`` when the companion matrix is not contractive.
    DegenerateExtrapolation
        When ``|1 - sum(c)|`` is too small to normalize.
    """
    C = np.asarray(C, dtype=float)
    c = C[:, 0]
    if companion_max_modulus(c) >= 1.0 - RHO_MARGIN:
        raise ExtrapolationRejected("rho", "companion spectral radius is not below 1")
    if abs(1.0 - np.sum(c)) <= ONE_MINUS_SUM_TOL:
        raise DegenerateExtrapolation()
    q = C.shape[0]
    e1 = np.zeros(q)
    e1[0] = 1.0
    return np.asarray(z_prev, dtype=float) + np.asarray(V_k) @ solve_linear(np.eye(q) - C, e1)


def safeguard_gain(k, E_norm, a, b, delta):
    """Step gain ``min(a, b / (k^(1+delta) ||E||))``; equals ``a`` when ``E = 0``."""
    if E_norm <= 0.0:
        return float(a)
    return float(min(a, b / (k ** (1.0 + delta) * E_norm)))


# --------------------------------------------------------------------------
# MPE / RRE


def _differences(iterates):
    X = np.asarray(iterates, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 3:
        raise InvalidConfigError("extrapolation needs at least three iterates")
    return X, np.diff(X, axis=0).T


def mpe_weights(iterates):
    """Normalized MPE weights ``gamma_0..gamma_r`` for ``r + 2`` iterates."""
    _, U = _differences(iterates)
    r = U.shape[1] - 1
    c_head, _ = least_squares(U[:, :r], -U[:, r])
    c = np.append(c_head, 1.0)
    total = np.sum(c)
    if abs(total) <= MPE_DEGENERATE_TOL:
        raise DegenerateExtrapolation()
    return c / total


def mpe(iterates):
    """Minimal polynomial extrapolation from iterates ``x_k, ..., x_{k+r+1}`` (rows).

    Returns ``sum_i gamma_i x_{k+i}`` for ``i = 0..r``.
    """
    X, _ = _differences(iterates)
    gamma = mpe_weights(X)
    out = gamma @ X[:-1]
    return out if np.ndim(iterates) > 1 else float(out[0])


def rre_weights(iterates):
    """RRE weights: minimize ``||U gamma||`` subject to ``sum(gamma) = 1``."""
    _, U = _differences(iterates)
    r = U.shape[1] - 1
    if r == 0:
        return np.ones(1)
    # Eliminate the last weight through the constraint.
    head, _ = least_squares(U[:, :r] - U[:, [r]], -U[:, r])
    return np.append(head, 1.0 - np.sum(head))


def rre(iterates):
    """Reduced rank extrapolation from iterates ``x_k, ..., x_{k+r+1}`` (rows)."""
    X, _ = _differences(iterates)
    out = rre_weights(X) @ X[:-1]
    return out if np.ndim(iterates) > 1 else float(out[0])


# --------------------------------------------------------------------------
# Predictor driving a fixed-point iteration


@dataclass(frozen=True)
class PredictorConfig:
    """Settings of the linear predictor.

    Parameters
    ----------
    q : int
        Number of past displacements in the fit.
    s : int or None
        Prediction horizon; ``None`` predicts the limit.
    gain : float
        Fixed step gain used without a safeguard.
    safeguard : bool
        Use ``min(a, b / (k^(1+delta) ||E||))`` as the gain.
    a, b, delta : float
        Safeguard constants.
    cadence : int or None
        Extrapolate every ``cadence`` iterations; defaults to ``q + 2``.
    fb_angle_guard : bool
        Skip predictions pointing more than 90 degrees away from ``v_k``.
    coefficient_hook : callable, optional
        ``hook(k, c) -> c`` replaces fitted coefficients; meant for fault
        injection in tests.
    """

    q: int = 4
    s: Optional[int] = None
    gain: float = 1.0
    safeguard: bool = False
    a: float = 1.0
    b: float = 1e6
    delta: float = 3.0
    cadence: Optional[int] = None
    fb_angle_guard: bool = False
    coefficient_hook: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.q < 1:
            raise InvalidConfigError("q must be at least 1")
        if self.s is not None and self.s < 1:
            raise InvalidConfigError("s must be at least 1 or infinite")
        if self.safeguard and not (self.a > 0 and self.b > 0 and self.delta > 0):
            raise InvalidConfigError("safeguard constants a, b, delta must be positive")
        if not self.gain >= 0:
            raise InvalidConfigError("gain must be nonnegative")
        if self.cadence is not None and self.cadence < self.q + 2:
            raise InvalidConfigError("cadence must be at least q + 2")

    @property
    def period(self):
        return self.q + 2 if self.cadence is None else self.cadence


@dataclass
class PredictionEvent:
    """One extrapolation attempt on one block."""

    k: int
    block: int
    accepted: bool
    reason: str
    rho: float
    epsilon: float
    E_norm: float = 0.0
    gain: float = 0.0


class LinearPredictor:
    """Stateful extrapolator plugged into :func:`trajaccel.driver.iterate`.

    Keeps the last ``q + 1`` displacements of the actual iterates; the
    history is not cleared after an accepted extrapolation.
    """

    def __init__(self, config: PredictorConfig, blocks=None):
        self.config = config
        self._blocks = blocks
        self.events: List[PredictionEvent] = []
        self._history = deque(maxlen=config.q + 1)

    def reset(self, z0, blocks=None):
        if blocks is not None:
            self._blocks = blocks
        if self._blocks is None:
            self._blocks = [slice(0, len(z0))]
        self._history.clear()
        self.events = []

    def observe(self, z_new, v):
        self._history.appendleft(v)

    def post(self, z_next, k):
        return z_next

    def propose(self, k, z):
        cfg = self.config
        if k == 0 or k % cfg.period or len(self._history) < cfg.q + 1:
            return z, False
        z_bar = z
        fired = False
        for index, blk in enumerate(self._blocks):
            step = self._block_step(k, index, z[blk], [h[blk] for h in self._history])
            if step is not None:
                if not fired:
                    z_bar = z.copy()
                z_bar[blk] += step
                fired = True
        return z_bar, fired

    def _block_step(self, k, index, z_k, hist):
        cfg = self.config
        V = np.column_stack(hist)
        v_k, V_prev, V_k = V[:, 0], V[:, 1:], V[:, :-1]
        fit = fit_coefficients(V_prev, v_k)
        if cfg.coefficient_hook is not None:
            fit = make_fit(V_prev, v_k, cfg.coefficient_hook(k, fit.c))
        event = PredictionEvent(k, index, False, "", fit.rho, fit.epsilon)
        self.events.append(event)
        if fit.rho >= 1.0 - RHO_MARGIN:
            event.reason = "rho"
            return None
        C = companion(fit.c)
        try:
            if cfg.s is None:
                E = predict_infinite(z_k - v_k, V_k, C) - z_k
            else:
                E = predict_finite(z_k, V_k, C, cfg.s) - z_k
        except ExtrapolationRejected as exc:
            event.reason = exc.reason
            return None
        except SingularSystemError:
            event.reason = "degenerate"
            return None
        if cfg.fb_angle_guard and np.dot(v_k, E) < 0.0:
            event.reason = "angle"
            return None
        E_norm = float(np.linalg.norm(E))
        if cfg.safeguard:
            gain = safeguard_gain(k, E_norm, cfg.a, cfg.b, cfg.delta)
        else:
            gain = cfg.gain
        event.E_norm = E_norm
        event.gain = gain
        if gain == 0.0:
            event.reason = "zero-gain"
            return None
        event.accepted = True
        return gain * E

    def perturbation_total(self):
        """Sum of ``gain * ||E||`` over accepted extrapolations."""
        return float(sum(e.gain * e.E_norm for e in self.events if e.accepted))


class WindowExtrapolator:
    """Cycling MPE/RRE: every ``cycle`` iterations, jump to the extrapolated point.

    The window holds the iterates produced since the previous jump; the
    jump uses its newest ``r + 2`` entries.
    """

    def __init__(self, r, method="mpe", cycle=None):
        if r < 1:
            raise InvalidConfigError("window parameter r must be at least 1")
        if method not in ("mpe", "rre"):
            raise InvalidConfigError(f"unknown window extrapolation {method!r}")
        self.r = int(r)
        self.method = method
        self.cycle = self.r + 2 if cycle is None else int(cycle)
        if self.cycle < self.r + 2:
            raise InvalidConfigError("cycle length must be at least r + 2")
        self._window = []

    def reset(self, z0, blocks=None):
        self._window = [np.array(z0, dtype=float)]

    def observe(self, z_new, v):
        self._window.append(z_new)

    def post(self, z_next, k):
        return z_next

    def propose(self, k, z):
        if len(self._window) < self.cycle:
            return z, False
        X = np.array(self._window[-(self.r + 2):])
        self._window = []
        try:
            s = mpe(X) if self.method == "mpe" else rre(X)
        except DegenerateExtrapolation:
            return z, False
        if not np.all(np.isfinite(s)):
            return z, False
        return s, True


def a2fom_drive(F, config: PredictorConfig, z0, tol=1e-9, max_iter=100_000, **kwargs):
    """Run ``z_{k+1} = F(zbar_k)`` with trajectory-following extrapolation.

    Returns
    -------
    RunResult
        ``result.extras["predictor"]`` holds the :class:`LinearPredictor`
        with its list of extrapolation events.
    """
    from .driver import iterate

    predictor = LinearPredictor(config)
    result = iterate(F, z0, predictor, tol=tol, max_iter=max_iter, **kwargs)
    result.extras["predictor"] = predictor
    return result


def safeguard_budget(config: PredictorConfig, max_E_norm, k_max):
    """Analytic cap ``a * max||E|| + b * sum_{k<=k_max} k^-(1+delta)``."""
    tail = sum(k ** -(1.0 + config.delta) for k in range(1, int(k_max) + 1))
    return config.a * max_E_norm + config.b * tail


__all__ = [
    "DifferenceBuffer", "FitResult", "PredictorConfig", "PredictionEvent",
    "ExtrapolationRejected", "DegenerateExtrapolation", "LinearPredictor",
    "WindowExtrapolator", "fit_coefficients", "companion", "predict_finite",
    "predict_infinite", "power_sum_first_column", "safeguard_gain", "mpe", "rre",
    "mpe_weights", "rre_weights", "a2fom_drive", "safeguard_budget",
]
