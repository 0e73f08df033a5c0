"""Assemble operators and extrapolators from plain settings and run them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .accel import LinearPredictor, PredictorConfig, WindowExtrapolator
from .driver import InertialExtrapolation, PlainIteration, RunResult, iterate
from .errors import InvalidConfigError
from .problems import ProblemInstance, gen_problem, parse_libsvm
from .prox import (AffineProx, GroupL12Prox, L1EnvelopeSmooth, L1Prox, LeastSquaresProx,
                   LeastSquaresSmooth, NonNegativeProx, NuclearProx)
from .splitting import (DouglasRachford, ForwardBackward, GeneralizedForwardBackward,
                        GradientDescent, PrimalDual, RelaxedOperator)

METHODS = ("gd", "fb", "dr", "pd", "gfb")
ACCELERATIONS = ("none", "inertial", "relaxed", "a2fom", "mpe", "rre")


@dataclass
class MethodSpec:
    """Solver choice and its step parameters (``None`` selects the default)."""

    name: str
    gamma: Optional[float] = None
    gamma_r: Optional[float] = None
    gamma_j: Optional[float] = None
    tau: float = 1.0


@dataclass
class AccelSpec:
    """Acceleration choice with its parameters."""

    kind: str = "none"
    params: dict = field(default_factory=dict)


def load_problem(settings: dict) -> ProblemInstance:
    """Build a problem from ``gen_problem`` keywords, or from a LIBSVM file.

    A ``data`` entry names a LIBSVM file whose features and labels become
    ``A`` and ``f`` of a least-squares-type problem (``lasso`` only).
    """
    settings = dict(settings)
    data = settings.pop("data", None)
    max_rows = int(settings.pop("max_rows", 2000))
    if data is None:
        return gen_problem(**settings)
    kind = settings.get("kind", "lasso")
    if kind != "lasso":
        raise InvalidConfigError("a data file can only define a lasso problem")
    with open(data, encoding="utf-8") as handle:
        A, f = parse_libsvm(handle, max_rows=max_rows)
    n = A.shape[1]
    meta = dict(kind=kind, m=A.shape[0], n=n, data=str(data))
    return ProblemInstance(kind, A, f, None, np.zeros(n), dict(mu=float(settings.get("mu", 1.0))),
                           meta)


def _regularizer(problem: ProblemInstance):
    p = problem.params
    mu = p.get("mu", 1.0)
    if problem.kind in ("lasso", "basis_pursuit", "pd_l1_affine"):
        return L1Prox(mu), None
    if problem.kind == "group_bp":
        return GroupL12Prox(p["block_size"], mu), None
    if problem.kind == "lowrank_bp":
        return NuclearProx(p["shape"], mu), tuple(p["shape"])
    raise InvalidConfigError(f"problem kind {problem.kind!r} has no single regularizer")


def build_operator(problem: ProblemInstance, method: MethodSpec):
    """Fixed-point operator solving ``problem`` with ``method``.

    Returns
    -------
    op : FixedPointOperator
    z0 : ndarray
        Starting fixed-point variable.
    z_star : ndarray or None
        Known fixed point, when the problem determines one.
    """
    kind, name = problem.kind, method.name
    if name not in METHODS:
        raise InvalidConfigError(f"unknown method {name!r}")

    if kind == "feasibility_2lines":
        if name != "dr":
            raise InvalidConfigError("the two-line feasibility problem is solved with dr")
        lines = [AffineProx(nrm[None, :], np.zeros(1)) for nrm in problem.params["normals"]]
        gamma = 1.0 if method.gamma is None else method.gamma
        op = DouglasRachford(lines[0], lines[1], 2, gamma)
        return op, problem.x0.copy(), np.zeros(2)

    if kind == "pcp_toy":
        if name != "gfb":
            raise InvalidConfigError("the PCP toy is solved with gfb")
        p = problem.params
        shape = tuple(p["shape"])
        F = L1EnvelopeSmooth(problem.f, p["mu1"])
        Rs = [NuclearProx(shape, p["mu2"]), NonNegativeProx()]
        gamma = 1.0 if method.gamma is None else method.gamma
        op = GeneralizedForwardBackward(F, Rs, problem.f.size, [0.5, 0.5], gamma, shape)
        return op, op.initial(problem.x0), None

    R, shape = _regularizer(problem)
    A, f = problem.A, problem.f
    n = A.shape[1]
    constrained = kind != "lasso"

    if name == "gd":
        if kind != "lasso":
            raise InvalidConfigError("gd applies to the least-squares part of lasso problems")
        return GradientDescent(LeastSquaresSmooth(A, f), n, method.gamma), problem.x0.copy(), None
    if name == "fb":
        if constrained:
            raise InvalidConfigError("fb needs a smooth data term; use dr or pd for constraints")
        op = ForwardBackward(R, LeastSquaresSmooth(A, f), n, method.gamma, shape)
        return op, problem.x0.copy(), None
    if name == "dr":
        gamma = 1.0 if method.gamma is None else method.gamma
        if constrained:
            op = DouglasRachford(R, AffineProx(A, f), n, gamma, shape)
        else:
            # smooth data term in the R slot, so the shadow is the sparse point
            op = DouglasRachford(LeastSquaresProx(A, f), R, n, gamma, shape)
        return op, problem.x0.copy(), None
    if name == "pd":
        m = A.shape[0]
        J = AffineProx(np.eye(m), f) if constrained else LeastSquaresProx(np.eye(m), f)
        op = PrimalDual(R, J, A, method.gamma_r, method.gamma_j, method.tau)
        op.matrix_shape = shape
        return op, op.initial(problem.x0), None
    # gfb with the single regularizer
    if constrained:
        raise InvalidConfigError("gfb needs a smooth data term; use dr or pd for constraints")
    op = GeneralizedForwardBackward(LeastSquaresSmooth(A, f), [R], n, None, method.gamma, shape)
    return op, op.initial(problem.x0), None


def _number(params, key, default, cast=float):
    value = params.get(key, default)
    if value is None:
        return None
    if isinstance(value, str) and value.strip().lower() in ("inf", "none", ""):
        return None
    try:
        return cast(value)
    except (TypeError, ValueError) as exc:
        raise InvalidConfigError(f"acceleration parameter {key}={value!r} is not a number") from exc


def _flag(params, key, default=False):
    value = params.get(key, default)
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise InvalidConfigError(f"acceleration parameter {key}={value!r} is not a boolean")
    return bool(value)


def build_extrapolator(op, accel: AccelSpec):
    """Return ``(operator, extrapolator)``; relaxation wraps the operator."""
    p = accel.params
    kind = accel.kind
    if kind not in ACCELERATIONS:
        raise InvalidConfigError(f"unknown acceleration {kind!r}")
    if kind == "none":
        return op, PlainIteration()
    if kind == "relaxed":
        return RelaxedOperator(op, _number(p, "lam", 1.0)), PlainIteration()
    if kind == "inertial":
        ext = InertialExtrapolation(_number(p, "a", 0.0), _number(p, "b", 0.0),
                                    p.get("schedule", "constant"), _flag(p, "heavy_ball"))
        return op, ext
    if kind == "a2fom":
        config = PredictorConfig(
            q=_number(p, "q", 4, int), s=_number(p, "s", None, int),
            gain=_number(p, "gain", 1.0), safeguard=_flag(p, "safeguard"),
            a=_number(p, "sg_a", 1.0), b=_number(p, "sg_b", 1e6),
            delta=_number(p, "sg_delta", 3.0), cadence=_number(p, "cadence", None, int),
            fb_angle_guard=_flag(p, "angle_guard"))
        return op, LinearPredictor(config)
    r = _number(p, "r", 4, int)
    return op, WindowExtrapolator(r, kind, _number(p, "restart", None, int))


def solve(problem: ProblemInstance, method: MethodSpec, accel: AccelSpec = None,
          tol=1e-9, max_iter=100_000) -> RunResult:
    """Run one solver on one problem and return the trace."""
    op, z0, z_star = build_operator(problem, method)
    op, ext = build_extrapolator(op, accel or AccelSpec())
    result = iterate(op, z0, ext, tol=tol, max_iter=max_iter, z_star=z_star)
    result.extras["operator"] = op
    result.extras["extrapolator"] = ext
    return result
