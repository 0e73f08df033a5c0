import csv
import math
import os
from pathlib import Path

import pytest

from trajaccel.cli import SUMMARY_COLUMNS, main, thread_count
from trajaccel.config import parse_number, run_config, suite_config
from trajaccel.errors import InvalidConfigError
from trajaccel.traceio import CSV_HEADER

SUITE = Path(__file__).resolve().parents[1] / "src" / "trajaccel" / "suites" / "paper-desk.ini"

LASSO_FB = """
[problem]
kind = lasso
m = 24
n = 64
sparsity = 4
mu = 1.0
seed = 0

[method]
name = fb

[run]
tol = 1e-8
max_iter = 5000
"""

BP_DR = """
[problem]
kind = basis_pursuit
m = 24
n = 64
sparsity = 4
seed = 0

[method]
name = dr

[acceleration]
kind = {kind}
q = 4
s = inf

[run]
tol = 1e-8
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _rows(path):
    with open(path) as handle:
        return list(csv.reader(handle))


def test_run_writes_one_row_per_iteration(tmp_path, capsys):
    cfg = _write(tmp_path, "run.ini", LASSO_FB)
    out = tmp_path / "trace.csv"
    assert main(["run", "--config", cfg, "--out", str(out), "--plot", str(tmp_path / "t.svg")]) == 0
    summary = capsys.readouterr().out
    iterations = int(summary.split("iterations=")[1].split()[0])
    rows = _rows(out)
    assert ",".join(rows[0]) == CSV_HEADER
    assert len(rows) - 1 == iterations
    assert "final_residual=" in summary and "wall_time=" in summary
    svg = (tmp_path / "t.svg").read_text()
    assert svg.startswith("<svg") and "<polyline" in svg


def test_run_is_byte_deterministic(tmp_path):
    cfg = _write(tmp_path, "run.ini", BP_DR.format(kind="a2fom"))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--config", cfg, "--out", str(a)]) == 0
    assert main(["run", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_accelerated_run_has_fewer_rows(tmp_path):
    plain = _write(tmp_path, "plain.ini", BP_DR.format(kind="none"))
    fast = _write(tmp_path, "fast.ini", BP_DR.format(kind="a2fom"))
    main(["run", "--config", plain, "--out", str(tmp_path / "p.csv")])
    main(["run", "--config", fast, "--out", str(tmp_path / "f.csv")])
    assert len(_rows(tmp_path / "f.csv")) < len(_rows(tmp_path / "p.csv"))


def test_csv_cells(tmp_path):
    cfg = _write(tmp_path, "run.ini", LASSO_FB)
    out = tmp_path / "trace.csv"
    main(["run", "--config", cfg, "--out", str(out)])
    first, second = _rows(out)[1:3]
    assert first[2] == "" and first[5] == "" and first[7] == ""  # absent fields stay empty
    assert first[6] == "0"
    v = second[1]
    assert float(v) == float(format(float(v), ".17g"))


def test_invalid_step_exits_2_without_csv(tmp_path, capsys):
    cfg = _write(tmp_path, "run.ini", LASSO_FB)
    out = tmp_path / "trace.csv"
    assert main(["run", "--config", cfg, "--out", str(out), "--set", "method.gamma=50"]) == 2
    assert not out.exists()
    assert "step size" in capsys.readouterr().err


def test_malformed_config_exits_2(tmp_path):
    cfg = _write(tmp_path, "bad.ini", "[problem\nkind=lasso")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == 2


def test_divergence_exits_3_with_partial_trace(tmp_path):
    text = LASSO_FB + "\n[acceleration]\nkind = inertial\na = 1.9\nb = 0.9\n"
    cfg = _write(tmp_path, "div.ini", text)
    out = tmp_path / "trace.csv"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 3
    assert len(_rows(out)) > 1


def test_lab_type2_reports_pass(tmp_path, capsys):
    cfg = _write(tmp_path, "lab.ini", "[lab]\ntype = type2\npsi = 0.05\neta = 0.96\n")
    report = tmp_path / "report.txt"
    out = tmp_path / "lab.csv"
    code = main(["lab", "--config", cfg, "--out", str(out), "--set", f"lab.report={report}"])
    assert code == 0
    line = capsys.readouterr().out.strip()
    assert "measured limit cos theta within 1e-06 of cos(0.05)" in line and line.endswith("PASS")
    assert report.read_text().strip() == line
    assert _rows(out)[0] == CSV_HEADER.split(",")


def test_lab_type1_scalar_degenerate(tmp_path, capsys):
    cfg = _write(tmp_path, "lab.ini", "[lab]\ntype = type1\nsigmas = 0.5\n")
    assert main(["lab", "--config", cfg]) == 0
    assert "PASS" in capsys.readouterr().out


def test_lab_type3_assumption_violation_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, "lab.ini", "[lab]\ntype = type3\na = 0.5\nb = 0.9\nc = 0.8\n")
    assert main(["lab", "--config", cfg]) == 2
    assert "delta*tau*c^2 + a*b < 1" in capsys.readouterr().err


def test_lab_ellipse_and_pd(tmp_path, capsys):
    cfg = _write(tmp_path, "lab.ini", "[lab]\ntype = ellipse\naxis_ratio = 0.5\nphi = pi/8.01\n"
                                      "psi = pi/3\n")
    assert main(["lab", "--config", cfg]) == 0
    cfg = _write(tmp_path, "pd.ini", "[lab]\ntype = pd\ngamma_r = 0.5\ngamma_j = 0.5\n"
                                    "tau = 1\nsigma = 1.2\n")
    assert main(["lab", "--config", cfg]) == 0


def test_bench_paper_desk_suite(tmp_path, monkeypatch):
    monkeypatch.setenv("ACCEL_THREADS", "2")
    outdir = tmp_path / "bench"
    assert main(["bench", "--suite", str(SUITE), "--outdir", str(outdir), "--plot"]) == 0
    with open(outdir / "summary.csv") as handle:
        rows = list(csv.DictReader(handle))
    assert tuple(rows[0].keys()) == SUMMARY_COLUMNS
    methods = {(r["problem"], r["method"]) for r in rows}
    for label in ("fb", "fista", "a2fb"):
        assert ("lasso", label) in methods
    for label in ("dr", "idr", "3pt-idr", "a2dr"):
        assert ("basis_pursuit", label) in methods
    its = {r["method"]: int(r["iterations_to_tol"]) for r in rows if r["problem"] == "feasibility"}
    assert its["feas-a2dr"] < its["feas-3pt-idr"] < its["feas-dr"] < its["feas-idr"]
    for problem, label in methods:
        assert (outdir / f"{problem}__{label}.csv").exists()
        assert "<polyline" in (outdir / f"{problem}__{label}.svg").read_text()


def test_bench_records_failures_and_continues(tmp_path):
    suite = _write(tmp_path, "suite.ini", """
[problem:p]
kind = lasso
m = 24
n = 64
sparsity = 4

[run:good]
problem = p
method = fb

[run:bad]
problem = p
method = fb
gamma = 99
""")
    assert main(["bench", "--suite", suite, "--outdir", str(tmp_path / "o")]) == 1
    with open(tmp_path / "o" / "summary.csv") as handle:
        rows = {r["method"]: r for r in csv.DictReader(handle)}
    assert rows["good"]["status"] == "ok" and rows["bad"]["status"].startswith("error")


def test_bench_unknown_problem_is_config_error(tmp_path):
    suite = _write(tmp_path, "suite.ini", "[run:x]\nproblem = nope\nmethod = fb\n")
    assert main(["bench", "--suite", suite, "--outdir", str(tmp_path / "o")]) == 2


def test_thread_count(monkeypatch):
    monkeypatch.setenv("ACCEL_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("ACCEL_THREADS", "0")
    assert thread_count() == 1
    monkeypatch.setenv("ACCEL_THREADS", "many")
    assert thread_count() == (os.cpu_count() or 1)


def test_parse_number():
    assert parse_number("pi/12") == pytest.approx(math.pi / 12)
    assert parse_number("2*pi/3") == pytest.approx(2 * math.pi / 3)
    assert parse_number("1e-3") == 1e-3
    with pytest.raises(InvalidConfigError):
        parse_number("pie")


def test_overrides_and_typing(tmp_path):
    cfg = run_config(_write(tmp_path, "run.ini", LASSO_FB), ["problem.seed=4", "run.tol=1e-6"])
    assert cfg.problem["seed"] == 4 and cfg.tol == 1e-6 and cfg.method.name == "fb"
    with pytest.raises(InvalidConfigError):
        run_config(_write(tmp_path, "r.ini", LASSO_FB), ["no-dot=1"])


def test_shipped_suite_parses():
    suite = suite_config(SUITE)
    assert len(suite.runs) == 11
