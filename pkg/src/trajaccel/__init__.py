"""Operator-splitting solvers with trajectory-following acceleration."""

from .accel import LinearPredictor, PredictorConfig, WindowExtrapolator, mpe, rre
from .diagnostics import TraceRecord, classify_trajectory
from .driver import InertialExtrapolation, PlainIteration, RunResult, iterate
from .errors import (DivergenceError, InvalidConfigError, InvalidInputError, ParseError,
                     SingularSystemError, TrajAccelError)
from .problems import gen_problem, parse_libsvm
from .runner import AccelSpec, MethodSpec, solve

__version__ = "0.1.0"
