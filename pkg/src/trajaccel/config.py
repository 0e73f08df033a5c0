"""Experiment manifests: INI files read with :mod:`configparser`.

Grammar
-------
A run file has the sections::

    [problem]       kind, m, n, sparsity, rank, noise, seed, mu, block_size,
                    shape (ROWSxCOLS), angle, mu1, mu2, data, max_rows
    [method]        name (gd|fb|dr|pd|gfb), gamma, gamma_r, gamma_j, tau
    [acceleration]  kind (none|inertial|relaxed|a2fom|mpe|rre) and its
                    parameters: a, b, schedule, heavy_ball (inertial);
                    lam (relaxed); q, s, gain, safeguard, sg_a, sg_b,
                    sg_delta, cadence, angle_guard (a2fom); r, restart
                    (mpe, rre)
    [run]           tol, max_iter, out, plot

A suite file has a ``[suite]`` section (tol, max_iter, plot), any number of
``[problem:NAME]`` sections with the keys of ``[problem]``, and
``[run:LABEL]`` sections with ``problem = NAME``, the keys of ``[method]``
(``method`` instead of ``name``), ``acceleration = KIND`` and acceleration
parameters prefixed with ``accel.``.

A lab file has one ``[lab]`` section, see :mod:`trajaccel.cli`.

Overrides given as ``section.key=value`` replace file entries.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .errors import InvalidConfigError
from .runner import AccelSpec, MethodSpec

INT_KEYS = {"m", "n", "sparsity", "rank", "seed", "block_size", "max_rows", "max_iter",
            "iterations"}
FLOAT_KEYS = {"noise", "mu", "angle", "mu1", "mu2", "gamma", "gamma_r", "gamma_j", "tau",
              "tol"}


@dataclass
class RunConfig:
    """Everything needed for one solver run."""

    problem: dict
    method: MethodSpec
    accel: AccelSpec
    tol: float = 1e-9
    max_iter: int = 100_000
    out: Optional[str] = None
    plot: Optional[str] = None
    label: str = "run"


@dataclass
class SuiteConfig:
    runs: List[RunConfig] = field(default_factory=list)
    plot: bool = False


def parse_number(text):
    """Evaluate a float literal, allowing ``pi`` and ``pi/k`` style fractions."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    parts = text.split("/")
    if len(parts) > 2:
        raise InvalidConfigError(f"cannot read number {text!r}")
    value = 1.0
    for token in parts[0].split("*"):
        token = token.strip()
        value *= math.pi if token == "pi" else _plain_float(token)
    if len(parts) == 2:
        value /= _plain_float(parts[1].strip())
    return value


def _plain_float(token):
    try:
        return float(token)
    except ValueError as exc:
        raise InvalidConfigError(f"cannot read number {token!r}") from exc


def convert(key, text):
    """Type a raw entry by its key name."""
    if key in INT_KEYS:
        try:
            return int(text)
        except ValueError as exc:
            raise InvalidConfigError(f"{key} must be an integer, got {text!r}") from exc
    if key in FLOAT_KEYS:
        return parse_number(text)
    if key == "shape":
        try:
            rows, cols = (int(t) for t in text.lower().split("x"))
        except ValueError as exc:
            raise InvalidConfigError(f"shape must look like ROWSxCOLS, got {text!r}") from exc
        return (rows, cols)
    return text.strip()


def read_ini(path, overrides: Sequence[str] = ()):
    """Parse ``path`` and apply ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise InvalidConfigError(f"malformed config {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise InvalidConfigError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.rsplit(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key.strip(), value.strip())
    return parser


def _section(parser, name):
    return dict(parser.items(name)) if parser.has_section(name) else {}


def problem_settings(raw: Dict[str, str]):
    if "kind" not in raw and "data" not in raw:
        raise InvalidConfigError("problem section needs a kind")
    return {key: convert(key, value) for key, value in raw.items()}


def method_spec(raw: Dict[str, str], name_key="name"):
    if name_key not in raw:
        raise InvalidConfigError(f"method needs a {name_key}")
    values = {k: convert(k, raw[k]) for k in ("gamma", "gamma_r", "gamma_j", "tau") if k in raw}
    return MethodSpec(raw[name_key].strip(), **values)


def run_config(path, overrides: Sequence[str] = ()) -> RunConfig:
    """Read a single-run manifest."""
    parser = read_ini(path, overrides)
    accel = _section(parser, "acceleration")
    run = _section(parser, "run")
    return RunConfig(
        problem=problem_settings(_section(parser, "problem")),
        method=method_spec(_section(parser, "method")),
        accel=AccelSpec(accel.pop("kind", "none").strip(), accel),
        tol=convert("tol", run.get("tol", "1e-9")),
        max_iter=convert("max_iter", run.get("max_iter", "100000")),
        out=run.get("out"),
        plot=run.get("plot"),
    )


def suite_config(path, overrides: Sequence[str] = ()) -> SuiteConfig:
    """Read a suite manifest with named problems and runs."""
    parser = read_ini(path, overrides)
    head = _section(parser, "suite")
    tol = convert("tol", head.get("tol", "1e-9"))
    max_iter = convert("max_iter", head.get("max_iter", "100000"))
    plot = head.get("plot", "no").strip().lower() in ("1", "true", "yes", "on")
    problems = {}
    for name in parser.sections():
        if name.startswith("problem:"):
            problems[name.split(":", 1)[1].strip()] = problem_settings(dict(parser.items(name)))
    suite = SuiteConfig(plot=plot)
    for name in parser.sections():
        if not name.startswith("run:"):
            continue
        raw = dict(parser.items(name))
        label = name.split(":", 1)[1].strip()
        ref = raw.get("problem", "").strip()
        if ref not in problems:
            raise InvalidConfigError(f"run {label!r} refers to unknown problem {ref!r}")
        params = {k.split(".", 1)[1]: v for k, v in raw.items() if k.startswith("accel.")}
        suite.runs.append(RunConfig(
            problem=dict(problems[ref], _name=ref),
            method=method_spec(raw, "method"),
            accel=AccelSpec(raw.get("acceleration", "none").strip(), params),
            tol=convert("tol", raw["tol"]) if "tol" in raw else tol,
            max_iter=convert("max_iter", raw["max_iter"]) if "max_iter" in raw else max_iter,
            label=label,
        ))
    if not suite.runs:
        raise InvalidConfigError("suite defines no runs")
    return suite


def lab_settings(path, overrides: Sequence[str] = ()) -> dict:
    parser = read_ini(path, overrides)
    if not parser.has_section("lab"):
        raise InvalidConfigError("lab config needs a [lab] section")
    return dict(parser.items("lab"))
