"""Command-line harness.

``ipalm run`` solves one configured problem and writes a CSV trace plus a
summary; ``ipalm compare`` sweeps ``beta0`` and reports the best run against a
bracket of the optimal value.

Configuration files hold ``key = value`` lines with dotted keys, optionally
grouped under ``[section]`` headers::

    [problem]
    kind = lad
    data = train.libsvm
    normalize = true

    solver.kind = approx
    outer.beta0 = 10

Command-line flags override file values. Exit status: 0 when the stopping test
fired, 2 when an iteration limit was hit, 1 on configuration or input errors.
"""

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .core import ConfigurationError, OuterParams, ipalm_kkt_solve, ipalm_solve
from .diagnostics import error_report
from .problems import (
    LAD,
    BasisPursuit,
    FusedLasso,
    LabeledDataset,
    LibsvmParseError,
    SoftMarginSVM,
    build_problem,
    load_libsvm,
    normalize_rows,
    synthetic_instance,
)
from .solvers import InnerSolverConfig

__all__ = ["RunConfig", "load_config", "run", "compare", "main", "BETA0_SWEEP"]

logger = logging.getLogger(__name__)

BETA0_SWEEP = (1e-2, 1e-1, 1.0, 10.0, 100.0)

EXIT_CONVERGED, EXIT_CONFIG, EXIT_LIMIT = 0, 1, 2

_DATA_KINDS = {"lad", "basis_pursuit", "fused_lasso", "svm"}
_SYNTHETIC_ONLY = {"equality_qp", "planted_bp", "lad_small"}
_SYNTHETIC_FOR = {"lad": "lad", "fused_lasso": "fused_lasso", "svm": "svm",
                  "basis_pursuit": "planted_bp"}
_DEFAULT_DIMS = {"equality_qp": (10,), "planted_bp": (20, 50), "lad_small": (8, 4),
                 "lad": (40, 20), "fused_lasso": (40, 20), "svm": (40, 10)}

_KEYS = {
    "problem.kind": str, "problem.data": str, "problem.dims": str, "problem.sparsity": int,
    "problem.seed": int, "problem.normalize": "bool", "problem.lam": float,
    "problem.lambda_r": float, "problem.lambda_1mr": float, "problem.ridge": float,
    "solver.kind": str, "solver.tau": int, "solver.seed": int, "solver.safety_cap": int,
    "outer.beta0": float, "outer.rho": float, "outer.eta": float, "outer.m0": int,
    "outer.eps0": float, "outer.max_outer": int, "outer.target_eps": float,
    "outer.kkt": "bool", "outer.bounded_domain": "bool", "outer.early_stop": "bool",
    "output.path": str, "output.summary": str, "output.timing": "bool",
    "report.every": int,
}


@dataclass
class RunConfig:
    """Everything needed for one solve."""

    problem: dict = field(default_factory=dict)
    solver: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    outer: OuterParams = field(default_factory=OuterParams)
    output_path: str = None
    summary_path: str = None
    timing: bool = True
    report_every: int = 0


def _to_bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"expected a boolean, got {v!r}")


def parse_config_text(text):
    """Parse flat ``key = value`` text into a dict with dotted keys."""
    out = {}
    section = ""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"config line {no}: expected 'key = value'")
        key = key.strip()
        if section and "." not in key:
            key = f"{section}.{key}"
        out[key] = value.strip()
    return out


def load_config(values):
    """Build a :class:`RunConfig` from a dict of dotted keys (strings or typed values)."""
    typed = {}
    for key, value in values.items():
        if value is None:
            continue
        if key not in _KEYS:
            raise ConfigurationError(f"unknown config key {key!r}")
        kind = _KEYS[key]
        try:
            typed[key] = _to_bool(value) if kind == "bool" else kind(value)
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key}: {value!r}") from exc

    def pick(prefix):
        return {k.split(".", 1)[1]: v for k, v in typed.items() if k.startswith(prefix + ".")}

    problem = pick("problem")
    kind = problem.get("kind")
    if kind is None:
        raise ConfigurationError("problem.kind is required")
    if kind not in _DATA_KINDS | _SYNTHETIC_ONLY:
        raise ConfigurationError(f"unknown problem kind {kind!r}")
    if kind in _SYNTHETIC_ONLY and "data" in problem:
        raise ConfigurationError(f"problem kind {kind!r} is synthetic and takes no data file")

    s = pick("solver")
    try:
        solver = InnerSolverConfig(kind=s.get("kind", "apg"), tau=s.get("tau", 1),
                                   seed=s.get("seed", 0), safety_cap=s.get("safety_cap", 10_000_000))
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    o = pick("outer")
    kkt = o.pop("kkt", False)
    outer = OuterParams(kkt_mode=kkt, **o)
    out = pick("output")
    return RunConfig(problem=problem, solver=solver, outer=outer,
                     output_path=out.get("path"), summary_path=out.get("summary"),
                     timing=out.get("timing", True), report_every=typed.get("report.every", 0))


def _benchmark_kind(name, p):
    lam = p.get("lam", 0.01)
    if name == "lad":
        return LAD(lam)
    if name == "basis_pursuit":
        return BasisPursuit()
    if name == "fused_lasso":
        return FusedLasso(p.get("lambda_r", 0.01), p.get("lambda_1mr", 0.01), p.get("ridge", 0.0))
    return SoftMarginSVM(lam)


def build_from_config(cfg):
    """Return ``(problem, certificate_or_None)``."""
    p = cfg.problem
    name = p["kind"]
    if "data" in p:
        data = load_libsvm(p["data"])
        if p.get("normalize", False):
            data = LabeledDataset(normalize_rows(data.X), data.labels)
        return build_problem(_benchmark_kind(name, p), data), None
    family = name if name in _SYNTHETIC_ONLY else _SYNTHETIC_FOR[name]
    dims = (tuple(int(d) for d in p["dims"].split(",")) if "dims" in p else _DEFAULT_DIMS[family])
    problem, cert = synthetic_instance(family, dims, p.get("sparsity"), p.get("seed", 0))
    if family in ("lad", "fused_lasso", "svm") and set(p) & {"lam", "lambda_r", "lambda_1mr", "ridge"}:
        problem = build_problem(_benchmark_kind(name, p), cert["data"])
    return problem, cert


def solve_config(cfg):
    problem, cert = build_from_config(cfg)
    solve = ipalm_kkt_solve if cfg.outer.kkt_mode else ipalm_solve
    x, lam, trace = solve(problem, cfg.solver, cfg.outer)
    return problem, cert, x, lam, trace


def summary_text(problem, x, trace):
    last = trace.records[-1]
    lines = [
        ("status", trace.status),
        ("outer_iterations", len(trace) - 1),
        ("F", repr(problem.objective(x))),
        ("infeasibility", repr(problem.infeasibility(x))),
        ("kkt_x_bound", repr(last.kkt_x_bound)),
        ("kkt_lam_bound", repr(last.kkt_lam_bound)),
        ("inner_iterations", last.inner_cum),
        ("wall_ms", f"{last.wall_ms:.3f}"),
    ]
    return "".join(f"{k}: {v}\n" for k, v in lines)


def _exit_code(trace):
    return EXIT_CONVERGED if trace.converged else EXIT_LIMIT


def run(cfg, stdout=None):
    """Execute one configured solve; returns the exit status."""
    stdout = sys.stdout if stdout is None else stdout
    problem, _, x, _, trace = solve_config(cfg)
    if cfg.output_path:
        trace.to_csv(cfg.output_path, timing=cfg.timing)
    text = summary_text(problem, x, trace)
    if cfg.summary_path:
        Path(cfg.summary_path).write_text(text, encoding="utf-8")
    stdout.write(text)
    return _exit_code(trace)


def compare(cfg, f_lower=None, f_upper=None, betas=BETA0_SWEEP, out_dir=None, stdout=None):
    """Sweep ``beta0`` over `betas` and report the run with the smallest error.

    The optimal value is bracketed by ``[f_lower, f_upper]``; for synthetic
    problems with a known optimum the bracket defaults to that value.
    Returns ``(exit_status, rows)``.
    """
    stdout = sys.stdout if stdout is None else stdout
    rows, traces = [], []
    for b0 in betas:
        outer = OuterParams(**{**vars(cfg.outer), "beta0": float(b0)})
        one = RunConfig(cfg.problem, cfg.solver, outer, timing=cfg.timing)
        problem, cert, x, _, trace = solve_config(one)
        lo, hi = f_lower, f_upper
        if lo is None and cert is not None and "F" in cert:
            lo = hi = cert["F"]
        if lo is None or hi is None:
            raise ConfigurationError("compare needs an F bracket (--f-lower/--f-upper)")
        F = problem.objective(x)
        rep = error_report(F, lo, hi)
        rows.append({"beta0": b0, "status": trace.status, "outer": len(trace) - 1,
                     "inner_cum": trace.records[-1].inner_cum, "F": F,
                     "infeas": problem.infeasibility(x), "abs_rel_error": abs(rep.rel_error),
                     "log_rel_error": rep.log_rel_error, "below_confidence": rep.below_confidence,
                     "confidence_error": rep.confidence_error})
        traces.append((b0, [(r.s, r.inner_cum, error_report(r.F, lo, hi).log_rel_error)
                            for r in trace.records]))

    def score(row):
        # errors under the confidence level are indistinguishable; infeasibility breaks ties
        return max(row["abs_rel_error"], row["confidence_error"]), row["infeas"]

    best = min(range(len(rows)), key=lambda i: score(rows[i]))
    for i, row in enumerate(rows):
        row["best"] = i == best

    cols = ["beta0", "status", "outer", "inner_cum", "F", "infeas", "abs_rel_error",
            "log_rel_error", "below_confidence", "best"]
    w = csv.writer(stdout, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "compare.csv", "w", encoding="utf-8", newline="") as fh:
            cw = csv.writer(fh, lineterminator="\n")
            cw.writerow(cols)
            for row in rows:
                cw.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
        for b0, pts in traces:
            with open(out / f"plot_beta0_{b0:g}.csv", "w", encoding="utf-8", newline="") as fh:
                cw = csv.writer(fh, lineterminator="\n")
                cw.writerow(["s", "inner_cum", "log_rel_error"])
                for s, ic, e in pts:
                    cw.writerow([s, ic, repr(e)])
    return _exit_code_rows(rows), rows


def _exit_code_rows(rows):
    return EXIT_CONVERGED if all(r["status"] == "converged" for r in rows) else EXIT_LIMIT


# ------------------------------------------------------------------ argparse


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--problem", help="lad | basis_pursuit | fused_lasso | svm | "
                                          "equality_qp | planted_bp | lad_small")
    common.add_argument("--data", help="libsvm file (optionally gzip-compressed)")
    common.add_argument("--dims", help="synthetic dimensions, e.g. 20,50")
    common.add_argument("--sparsity", type=int)
    common.add_argument("--normalize", action="store_true", default=None,
                        help="scale data rows to unit norm")
    common.add_argument("--solver", help="apg | approx | lkatyusha | bregman")
    common.add_argument("--tau", type=int)
    common.add_argument("--beta0", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--eta", type=float)
    common.add_argument("--eps", type=float, help="stopping tolerance")
    common.add_argument("--max-outer", type=int)
    common.add_argument("--seed", type=int, help="seed for the solver and synthetic data")
    common.add_argument("--kkt", action="store_true", default=None)
    common.add_argument("--no-timing", action="store_true",
                        help="write zero wall times so traces are byte-identical")

    ap = argparse.ArgumentParser(prog="ipalm", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="solve one problem")
    r.add_argument("--out", help="trace CSV path")
    r.add_argument("--summary", help="summary text path")
    c = sub.add_parser("compare", parents=[common], help="beta0 sweep")
    c.add_argument("--f-lower", type=float)
    c.add_argument("--f-upper", type=float)
    c.add_argument("--betas", help="comma-separated beta0 values (default 1e-2,...,100)")
    c.add_argument("--out", help="directory for the table and per-run plot data")
    return ap


def _values_from_args(args):
    values = {}
    if args.config:
        values.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
    flags = {
        "problem.kind": args.problem, "problem.data": args.data, "problem.dims": args.dims,
        "problem.sparsity": args.sparsity, "problem.normalize": args.normalize,
        "solver.kind": args.solver, "solver.tau": args.tau,
        "outer.beta0": args.beta0, "outer.rho": args.rho, "outer.eta": args.eta,
        "outer.target_eps": args.eps, "outer.max_outer": args.max_outer, "outer.kkt": args.kkt,
    }
    if args.seed is not None:
        flags["solver.seed"] = args.seed
        flags["problem.seed"] = args.seed
    if args.command == "run":
        flags["output.path"] = args.out
        flags["output.summary"] = args.summary
    if args.no_timing:
        flags["output.timing"] = False
    values.update({k: v for k, v in flags.items() if v is not None})
    return values


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(_values_from_args(args))
        if args.command == "run":
            return run(cfg)
        betas = (BETA0_SWEEP if not args.betas
                 else tuple(float(b) for b in args.betas.split(",")))
        status, _ = compare(cfg, args.f_lower, args.f_upper, betas, args.out)
        return status
    except (ConfigurationError, LibsvmParseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
