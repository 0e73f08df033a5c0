"""Shared iteration loop with pluggable extrapolation and per-step diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .diagnostics import TraceRecord, cos_between, identification_metrics, SUPPORT_TOL
from .errors import DivergenceError, InvalidConfigError
from .splitting import FixedPointOperator, fista_schedule

#: Iterates with a norm above this value count as divergent.
DIVERGENCE_NORM = 1e12


@dataclass
class RunResult:
    """Outcome of :func:`iterate`."""

    z: np.ndarray
    x: np.ndarray
    trace: List[TraceRecord]
    converged: bool
    extras: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.trace)


class PlainIteration:
    """No extrapolation: ``zbar_k = z_k``."""

    def reset(self, z0, blocks=None):
        pass

    def propose(self, k, z):
        return z, False

    def observe(self, z_new, v):
        pass

    def post(self, z_next, k):
        return z_next


class InertialExtrapolation:
    """Inertial point ``z_k + a_k (z_k - z_{k-1}) + b_k (z_{k-1} - z_{k-2})``.

    Parameters
    ----------
    a, b : float
        Constant coefficients; ignored for ``a`` when ``schedule="fista"``.
    schedule : {"constant", "fista"}
    heavy_ball : bool
        Add the momentum after the map, ``z_{k+1} = F(z_k) + a (z_k - z_{k-1})``,
        instead of evaluating the map at the inertial point.
    """

    def __init__(self, a=0.0, b=0.0, schedule="constant", heavy_ball=False):
        if schedule not in ("constant", "fista"):
            raise InvalidConfigError(f"unknown inertial schedule {schedule!r}")
        self.a = float(a)
        self.b = float(b)
        self.schedule = schedule
        self.heavy_ball = heavy_ball

    def reset(self, z0, blocks=None):
        self._prev = []
        self._coeffs = fista_schedule() if self.schedule == "fista" else None
        self._z = np.array(z0, dtype=float)

    def _next_a(self):
        return next(self._coeffs) if self._coeffs is not None else self.a

    def propose(self, k, z):
        if self.heavy_ball:
            return z, False
        a = self._next_a()
        points = [z] + self._prev
        if len(points) == 1 or (a == 0.0 and self.b == 0.0):
            return z, False
        b = self.b if len(points) > 2 else 0.0
        z_bar = z + a * (z - points[1])
        if b:
            z_bar += b * (points[1] - points[2])
        return z_bar, True

    def post(self, z_next, k):
        if not self.heavy_ball or not self._prev:
            return z_next
        return z_next + self._next_a() * (self._z - self._prev[0])

    def observe(self, z_new, v):
        self._prev = [self._z] + self._prev[:1]
        self._z = z_new


def iterate(op: FixedPointOperator, z0, extrapolator=None, tol=1e-9, max_iter=100_000,
            z_star=None, diagnostics=True, support_tol=SUPPORT_TOL):
    """Iterate ``z_{k+1} = F(zbar_k)`` until ``residual(v_k) <= tol``.

    Parameters
    ----------
    op : FixedPointOperator
    z0 : array_like
        Initial fixed-point variable.
    extrapolator : object, optional
        Provides ``reset``, ``propose(k, z) -> (zbar, flag)``,
        ``post(z_next, k)`` and ``observe(z_new, v)``. Defaults to
        :class:`PlainIteration`.
    tol : float
    max_iter : int
    z_star : array_like, optional
        Known limit, enables ``cos_vartheta``.
    diagnostics : bool
        Record objective and support/rank (costs one shadow evaluation).

    Returns
    -------
    RunResult

    Raises
    ------
    DivergenceError
        When an iterate becomes non-finite or exceeds :data:`DIVERGENCE_NORM`.
    """
    ext = PlainIteration() if extrapolator is None else extrapolator
    z = np.array(z0, dtype=float)
    ext.reset(z, op.blocks())
    trace: List[TraceRecord] = []
    v_prev = None
    converged = False
    for k in range(max_iter):
        z_bar, flag = ext.propose(k, z)
        z_next = ext.post(op(z_bar), k)
        if not np.all(np.isfinite(z_next)) or np.linalg.norm(z_next) > DIVERGENCE_NORM:
            raise DivergenceError(f"iterate diverged at k={k + 1}", trace)
        v = z_next - z
        record = TraceRecord(k + 1, op.residual(v), extrapolated=bool(flag))
        if v_prev is not None:
            record.cos_theta = cos_between(v, v_prev)
        if z_star is not None:
            record.cos_vartheta = cos_between(v, z_star - z_next)
        if diagnostics:
            x = op.shadow(z_next)
            record.objective = op.objective(x)
            if op.matrix_shape is not None:
                record.support_size, record.rank = identification_metrics(
                    x.reshape(op.matrix_shape), support_tol)
            else:
                record.support_size, _ = identification_metrics(x, support_tol)
        trace.append(record)
        ext.observe(z_next, v)
        z, v_prev = z_next, v
        if record.v_norm <= tol:
            converged = True
            break
    return RunResult(z, op.shadow(z), trace, converged)
