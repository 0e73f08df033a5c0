"""Trajectory measurements: angles, identification, classification, bounds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dense import small_svd, spectral_norm
from .errors import InvalidInputError, UndefinedAngleError

#: Absolute threshold for counting support entries.
SUPPORT_TOL = 1e-8
#: Relative threshold (to the largest singular value) for counting rank.
RANK_TOL = 1e-8

TYPE_I = "TypeI"
TYPE_II = "TypeII"
TYPE_III = "TypeIII"
UNDETERMINED = "Undetermined"


@dataclass
class TraceRecord:
    """Diagnostics of one iteration ``z_{k-1} -> z_k``.

    ``cos_theta`` compares ``v_k`` with ``v_{k-1}``; ``cos_vartheta`` compares
    ``v_k`` with ``z* - z_k`` and is only filled when the limit is known.
    """

    k: int
    v_norm: float
    cos_theta: Optional[float] = None
    objective: Optional[float] = None
    support_size: Optional[int] = None
    rank: Optional[int] = None
    extrapolated: bool = False
    cos_vartheta: Optional[float] = None


def cos_between(v, w):
    """Clamped cosine of the angle between ``v`` and ``w``; ``None`` if either is zero."""
    nv = np.linalg.norm(v)
    nw = np.linalg.norm(w)
    if nv == 0.0 or nw == 0.0 or not np.isfinite(nv * nw):
        return None
    return float(np.clip(np.dot(v / nv, w / nw), -1.0, 1.0))


def angle_between(v, w):
    """Angle in radians between two nonzero vectors.

    Raises
    ------
    UndefinedAngleError
        If either vector is zero.
    """
    c = cos_between(np.asarray(v, dtype=float), np.asarray(w, dtype=float))
    if c is None:
        raise UndefinedAngleError("angle with a zero vector is undefined")
    return float(np.arccos(c))


def angle_to_limit(z_k, z_prev, z_star):
    """Angle between the step ``z_k - z_prev`` and the remaining gap ``z_star - z_k``."""
    z_k = np.asarray(z_k, dtype=float)
    return angle_between(z_k - np.asarray(z_prev, dtype=float), np.asarray(z_star, dtype=float) - z_k)


def one_minus_cos(v, w):
    """``1 - cos(angle(v, w))`` computed without cancellation."""
    d = v / np.linalg.norm(v) - w / np.linalg.norm(w)
    return 0.5 * float(d @ d)


def identification_metrics(x, tol=SUPPORT_TOL, rank_tol=None):
    """Support size and (for matrices) numerical rank.

    Parameters
    ----------
    x : array_like, 1-d or 2-d
    tol : float
        Entries with ``|x_i| > tol`` count toward the support.
    rank_tol : float, optional
        Relative singular value threshold, defaults to ``tol``.

    Returns
    -------
    support_size : int
    rank : int or None
        ``None`` for vectors.
    """
    x = np.asarray(x, dtype=float)
    support = int(np.count_nonzero(np.abs(x) > tol))
    if x.ndim < 2:
        return support, None
    rank_tol = tol if rank_tol is None else rank_tol
    s = small_svd(x)[1]
    if s[0] == 0.0:
        return support, 0
    return support, int(np.count_nonzero(s > rank_tol * s[0]))


def classify_trajectory(cos_theta: Sequence[float], tail_fraction=0.25,
                        flat_tol=1e-3, oscillation_tol=1e-2):
    """Label a cosine series as one of the three trajectory types.

    Thresholds are conventions: the tail is TypeI when its mean exceeds
    ``1 - flat_tol`` and it is not trending down, TypeII when its spread
    stays below ``flat_tol`` around a mean inside ``(flat_tol, 1 - flat_tol)``,
    TypeIII when it keeps oscillating with amplitude above ``oscillation_tol``
    while staying away from +-1.
    """
    series = np.array([c for c in cos_theta if c is not None and np.isfinite(c)], dtype=float)
    if series.size < 50:
        return UNDETERMINED
    n_tail = max(2, int(round(series.size * tail_fraction)))
    tail = series[-n_tail:]
    mean = float(np.mean(tail))
    std = float(np.std(tail))
    slope = float(np.polyfit(np.arange(n_tail, dtype=float), tail, 1)[0])
    if mean > 1.0 - flat_tol and slope * n_tail >= -flat_tol * 0.1:
        return TYPE_I
    if std < flat_tol and flat_tol < mean < 1.0 - flat_tol:
        return TYPE_II
    amplitude = float(tail.max() - tail.min())
    if amplitude > oscillation_tol and tail.max() < 1.0 - 1e-6 and tail.min() > -1.0 + 1e-6:
        return TYPE_III
    return UNDETERMINED


def classify_trace(trace, tol, tail_fraction=0.25):
    """Classify the part of a trace after the residual first drops below ``1e3 * tol``.

    Falls back to the whole trace when that part has fewer than 50 angles.
    """
    start = next((i for i, r in enumerate(trace) if r.v_norm < 1e3 * tol), len(trace))
    cos = [r.cos_theta for r in trace[start:] if r.cos_theta is not None]
    if len(cos) < 50:
        cos = [r.cos_theta for r in trace if r.cos_theta is not None]
    return classify_trajectory(cos, tail_fraction)


def log_linear_slope(values, start=None, stop=None):
    """Least-squares slope of ``log(values[start:stop])`` against the index."""
    y = np.asarray(values, dtype=float)[start:stop]
    k = np.arange(len(y), dtype=float)
    keep = y > 0
    return float(np.polyfit(k[keep], np.log(y[keep]), 1)[0])


def _running_power_sum_norms(M, s_max):
    """Entry ``t - 1`` is the largest norm of ``sum_{l=i}^{u} M^l`` over i in {0, 1}, u <= t."""
    n = M.shape[0]
    power = np.eye(n)
    from_zero = np.eye(n)
    from_one = np.zeros((n, n))
    best = 1.0
    out = np.empty(s_max)
    for t in range(s_max):
        power = power @ M
        from_zero = from_zero + power
        from_one = from_one + power
        best = max(best, spectral_norm(from_zero), spectral_norm(from_one))
        out[t] = best
    return out


def prediction_error_bounds(M, z_k, z_star, epsilon_k, c, s_max, z_prev):
    """Upper bounds on ``||zbar_{k,s} - z*||`` for ``s = 1..s_max`` (exactly linear case).

    Entry ``s - 1`` evaluates ``||M^s e_k|| + ||sum_{l<s} M^l|| ||f_k|| + B_{k,s} eps_k``
    with ``e_k = z_k - z*``, ``f_k = M (z_prev - z*) - e_k`` and ``B_{k,s}`` the
    largest norm among partial power sums of ``M`` and of the companion
    matrix ``H(c)`` starting at index 0 or 1 and ending at most at ``s``.

    Parameters
    ----------
    M : (n, n) array_like
        Linear map with ``v_{k+1} = M v_k``.
    z_k, z_star, z_prev : (n,) array_like
    epsilon_k : float
        Coefficient fitting residual.
    c : (q,) array_like
        Fitted coefficients.
    s_max : int
        Largest prediction horizon, at least 1.

    Returns
    -------
    ndarray of shape (s_max,)
    """
    from .accel import companion

    if s_max < 1:
        raise InvalidInputError("prediction horizon must be at least 1")
    M = np.asarray(M, dtype=float)
    z_star = np.asarray(z_star, dtype=float)
    e_k = np.asarray(z_k, dtype=float) - z_star
    f_k = M @ (np.asarray(z_prev, dtype=float) - z_star) - e_k
    f_norm = float(np.linalg.norm(f_k))
    B = np.maximum(_running_power_sum_norms(M, s_max),
                   _running_power_sum_norms(companion(c), s_max))
    out = np.empty(s_max)
    power = np.eye(M.shape[0])
    partial = np.zeros_like(power)
    for t in range(s_max):
        partial = partial + power
        power = power @ M
        drift = spectral_norm(partial) * f_norm if f_norm > 0 else 0.0
        out[t] = np.linalg.norm(power @ e_k) + drift + B[t] * epsilon_k
    return out


def prediction_error_bound(M, z_k, z_star, epsilon_k, c, s, z_prev):
    """Bound of :func:`prediction_error_bounds` for the single horizon ``s``."""
    return float(prediction_error_bounds(M, z_k, z_star, epsilon_k, c, s, z_prev)[-1])