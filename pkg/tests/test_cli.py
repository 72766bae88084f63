import csv
import io
from pathlib import Path

import numpy as np
import pytest

from ipalm.cli import BETA0_SWEEP, compare, load_config, main, parse_config_text
from ipalm.core import ConfigurationError, OuterParams, ipalm_solve
from ipalm.problems import LAD, build_problem, dump_libsvm, load_libsvm, synthetic_instance
from ipalm.solvers import InnerSolverConfig

GOLDEN_HEADER = Path(__file__).parent / "data" / "trace_header.csv"


def _read_trace(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def test_equality_qp_run(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    summary = tmp_path / "summary.txt"
    code = main(["run", "--problem", "equality_qp", "--out", str(out), "--summary", str(summary)])
    assert code == 0
    rows = _read_trace(out)
    betas = np.array([float(r["beta_s"]) for r in rows])
    np.testing.assert_allclose(betas, 0.9 ** np.arange(len(rows)), rtol=1e-12)
    text = summary.read_text()
    for key in ("status: converged", "F:", "infeasibility:", "kkt_x_bound:", "kkt_lam_bound:",
                "inner_iterations:", "wall_ms:"):
        assert key in text
    assert capsys.readouterr().out == text


def test_iteration_limit_exit_status(tmp_path):
    code = main(["run", "--problem", "planted_bp", "--max-outer", "2", "--out", str(tmp_path / "t.csv")])
    assert code == 2


@pytest.mark.parametrize("argv, needle", [
    (["--eta", "0.95"], "eta must be < rho"),
    (["--rho", "0.4"], "rho"),
    (["--beta0", "-1"], "beta0"),
    (["--max-outer", "-3"], "max_outer"),
    (["--eps", "-1"], "target_eps"),
    (["--kkt", "--eta", "0.8"], "rho^3"),
    (["--solver", "newton"], "solver"),
    (["--tau", "0"], "tau"),
    (["--problem", "nope"], "unknown problem kind"),
    (["--data", "/nonexistent/file.svm"], "file"),
    (["--solver", "lkatyusha", "--tau", "2"], "exceeds floor(sqrt(m))"),
])
def test_validation_errors(argv, needle, capsys):
    base = ["run", "--problem", "equality_qp"]
    assert main(base + argv) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert needle.lower() in err.lower()


def test_malformed_data_file(tmp_path, capsys):
    bad = tmp_path / "bad.svm"
    bad.write_text("1 1:2\n1 3:1 2:1\n")
    assert main(["run", "--problem", "lad", "--data", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_config_file_and_flag_override(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("[problem]\nkind = lad_small\n\n[outer]\nbeta0 = 5\nmax_outer = 7\n")
    values = parse_config_text(cfg_file.read_text())
    assert values == {"problem.kind": "lad_small", "outer.beta0": "5", "outer.max_outer": "7"}
    cfg = load_config({**values, "outer.beta0": 2.0})
    assert cfg.outer.beta0 == 2.0 and cfg.outer.max_outer == 7
    with pytest.raises(ConfigurationError):
        load_config({"problem.kind": "lad", "outer.colour": "red"})
    with pytest.raises(ConfigurationError):
        parse_config_text("no equals sign")


def test_lad_cli_matches_api(tmp_path, capsys):
    _, cert = synthetic_instance("lad", (30, 8), seed=4)
    path = tmp_path / "lad.svm"
    path.write_bytes(dump_libsvm(cert["data"]))
    code = main(["run", "--problem", "lad", "--data", str(path), "--max-outer", "25"])
    assert code in (0, 2)
    line = next(ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("F: "))

    problem = build_problem(LAD(0.01), load_libsvm(path))
    x, _, _ = ipalm_solve(problem, InnerSolverConfig(), OuterParams(max_outer=25))
    assert line == f"F: {problem.objective(x)!r}"


def test_trace_schema_matches_golden(tmp_path):
    out = tmp_path / "t.csv"
    main(["run", "--problem", "equality_qp", "--no-timing", "--out", str(out)])
    header = out.read_text(encoding="utf-8").splitlines()[0]
    assert header == GOLDEN_HEADER.read_text(encoding="utf-8").strip()
    rows = _read_trace(out)
    assert [int(r["s"]) for r in rows] == list(range(len(rows)))
    assert all(float(r["wall_ms"]) == 0.0 for r in rows)


def test_trace_is_byte_identical_across_runs(tmp_path):
    paths = [tmp_path / f"t{i}.csv" for i in range(2)]
    for p in paths:
        main(["run", "--problem", "fused_lasso", "--solver", "lkatyusha", "--seed", "7",
              "--max-outer", "10", "--no-timing", "--out", str(p)])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_compare_scalar_qp():
    cfg = load_config({"problem.kind": "equality_qp", "problem.dims": "1"})
    buf = io.StringIO()
    code, rows = compare(cfg, stdout=buf)
    assert code == 0
    assert [r["beta0"] for r in rows] == list(BETA0_SWEEP)
    assert all(r["status"] == "converged" for r in rows)
    assert sum(r["best"] for r in rows) == 1
    assert buf.getvalue().splitlines()[0].endswith(",best")


def test_compare_identical_configs_give_identical_rows():
    cfg = load_config({"problem.kind": "lad_small", "outer.max_outer": 10})
    _, a = compare(cfg, betas=(1.0, 1.0), stdout=io.StringIO())
    for key in ("F", "infeas", "inner_cum", "log_rel_error", "status"):
        assert a[0][key] == a[1][key]


def test_compare_planted_bp_reaches_high_accuracy(tmp_path):
    cfg = load_config({"problem.kind": "planted_bp", "outer.max_outer": 60})
    _, rows = compare(cfg, out_dir=tmp_path, stdout=io.StringIO())
    best = next(r for r in rows if r["best"])
    assert np.log10(best["abs_rel_error"]) <= -6
    assert best["infeas"] <= 1e-6
    assert (tmp_path / "compare.csv").exists()
    plot = _read_trace(tmp_path / f"plot_beta0_{best['beta0']:g}.csv")
    assert list(plot[0]) == ["s", "inner_cum", "log_rel_error"]


def test_compare_needs_a_bracket():
    cfg = load_config({"problem.kind": "lad", "outer.max_outer": 2})
    with pytest.raises(ConfigurationError):
        compare(cfg, betas=(1.0,), stdout=io.StringIO())
