"""``tailgc`` command-line interface.

Exit status: 0 on success, 1 on usage errors, 2 on data or estimation
errors. Data goes to the requested output files or standard output;
diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .causality import decimate_vdar1, hong_test, lr_tail_test
from .core import BinaryPanel, read_panel_csv, write_panel_csv, write_real_panel_csv
from .dgp import (BiVdarParams, DarParams, Vdar1Params, simulate_dar, simulate_garch,
                  simulate_vdar1, simulate_vdar_bivariate, star_coupling)
from .estimation import mle_dar, mle_vdar1, mle_vdar_bivariate, select_order_bic
from .experiments import ExperimentConfig, run_roc, run_size_power
from .network import build_multivariate_network, build_pairwise_network, metrics
from .preprocess import VolatilityConfig, garch_var_filter, intraday_to_panel, read_intraday_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _fraction(text: str) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _json_arg(text: str):
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc}") from None


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [_jsonable(v) for v in obj]
    return obj


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True)


def _write_text(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _params_dict(params) -> dict:
    return {k: getattr(params, k) for k in params.__dataclass_fields__}


# -- subcommands --------------------------------------------------------------------

def cmd_simulate(a) -> int:
    P = a.params or {}
    if a.model == "garch":
        x1, x2 = simulate_garch(a.scenario, a.T, a.seed)
        if a.hits:
            panel = BinaryPanel.from_series([garch_var_filter(x1), garch_var_filter(x2)])
            _write_panel(panel, a.out)
        else:
            vals = np.column_stack([x1.values, x2.values])
            _write_real(["x1", "x2"], vals, a.out)
        return EXIT_OK
    if a.model == "dar":
        params = DarParams(P.get("nu", 0.5), P.get("gamma", [1.0]), P.get("chi", 0.05))
        s = simulate_dar(params, a.T, a.seed)
        panel = BinaryPanel(s.values[:, None], ("X",))
    elif a.model == "vdar2":
        p = int(P.get("p", 1))
        params = BiVdarParams(P.get("nu", [0.5, 0.5]), P.get("lam", [0.0, 0.0]),
                              P.get("chi", [0.05, 0.05]),
                              P.get("gamma_self", [[1.0 / p] * p] * 2),
                              P.get("gamma_cross", [[1.0 / p] * p] * 2))
        x, y = simulate_vdar_bivariate(params, a.T, a.seed, copula_rho=P.get("copula_rho"))
        panel = BinaryPanel.from_series([x, y])
    elif a.model == "vdar1":
        if not {"nu", "lam", "chi"} <= set(P):
            raise UsageError("vdar1 needs --params with nu, lam and chi")
        panel = simulate_vdar1(Vdar1Params(P["nu"], P["lam"], P["chi"]), a.T, a.seed)
    else:  # star
        params = star_coupling(int(P.get("N", 10)), P.get("kind", "out"), seed=a.seed,
                               nu=P.get("nu", 0.5), chi=P.get("chi", 0.1), u=P.get("u"))
        panel = simulate_vdar1(params, a.T, a.seed)
    _write_panel(panel, a.out)
    return EXIT_OK


def _write_panel(panel, out):
    if out is None or out == "-":
        write_panel_csv(panel, sys.stdout)
    else:
        write_panel_csv(panel, out)


def _write_real(labels, vals, out):
    if out is None or out == "-":
        write_real_panel_csv(labels, vals, sys.stdout)
    else:
        write_real_panel_csv(labels, vals, out)


def _columns(panel: BinaryPanel, cols: str | None, want: int):
    if cols is None:
        if panel.N < want:
            raise UsageError(f"panel has {panel.N} column(s); {want} needed")
        return [panel[k] for k in range(want)]
    names = [c.strip() for c in cols.split(",")]
    if len(names) != want:
        raise UsageError(f"--cols needs exactly {want} column name(s)")
    missing = [n for n in names if n not in panel.labels]
    if missing:
        raise UsageError(f"unknown column(s): {', '.join(missing)}")
    return [panel[n] for n in names]


def cmd_fit(a) -> int:
    panel = read_panel_csv(a.input)
    if a.model == "dar":
        (x,) = _columns(panel, a.cols, 1)
        fit = mle_dar(x, a.p or 1)
    elif a.model == "vdar2":
        x, y = _columns(panel, a.cols, 2)
        p = a.p or select_order_bic(x, y, a.p_max)
        fit = mle_vdar_bivariate(x, y, p)
    else:
        if a.cols:
            panel = panel.select([c.strip() for c in a.cols.split(",")])
        fit = mle_vdar1(panel)
    doc = {"model": a.model, "p": fit.p, "params": _params_dict(fit.params),
           "loglik": fit.loglik, "converged": fit.converged}
    print(_dumps(doc))
    return EXIT_OK


def cmd_gc_test(a) -> int:
    panel = read_panel_csv(a.input)
    target, source = _columns(panel, a.cols, 2)
    if a.method == "lr":
        res = lr_tail_test(target, source, a.p_max, a.p)
    else:
        res = hong_test(target, source, a.bandwidth)
    print(_dumps(res.to_dict()))
    return EXIT_OK


def cmd_decimate(a) -> int:
    panel = read_panel_csv(a.input)
    res = decimate_vdar1(panel)
    lines = [",".join(("target",) + panel.labels)]
    for lab, row in zip(panel.labels, res.lambda_validated):
        lines.append(",".join([lab] + [f"{v:.10g}" for v in row]))
    _write_text("\n".join(lines) + "\n", a.out)
    doc = {"q_star": res.q_star, "tilted_path": [list(t) for t in res.tilted_path],
           "labels": list(panel.labels)}
    if a.path_out:
        Path(a.path_out).write_text(_dumps(doc) + "\n")
    elif a.out not in (None, "-"):
        print(_dumps(doc))
    return EXIT_OK


def _emit_summary(doc, table_out, summary_out):
    text = _dumps(doc) + "\n"
    if summary_out:
        Path(summary_out).write_text(text)
    elif table_out not in (None, "-"):
        sys.stdout.write(text)
    else:
        sys.stderr.write(text)


def cmd_network(a) -> int:
    panel = read_panel_csv(a.input)
    if a.method == "decimation":
        g = build_multivariate_network(panel)
    else:
        k = a.p_max if a.method == "lr" else a.bandwidth
        g = build_pairwise_network(panel, a.method, a.level, k)
    for d in g.diagnostics:
        sys.stderr.write(f"warning: {d}\n")
    rows = ["source\ttarget"] + [f"{s}\t{t}" for s, t in sorted(g.edges)]
    _write_text("\n".join(rows) + "\n", a.out)
    _emit_summary(metrics(g), a.out, a.metrics_out)
    return EXIT_OK


def cmd_preprocess(a) -> int:
    grid = read_intraday_csv(a.input)
    cfg = VolatilityConfig(alpha=a.alpha, theta=a.theta)
    panel = intraday_to_panel(grid, cfg, side=a.side, causal=a.causal_rescale)
    _write_panel(panel, a.out)
    freq = {lab: float(panel.values[:, k].mean()) for k, lab in enumerate(panel.labels)}
    doc = {"T": panel.T, "hit_frequency": freq,
           "chi_range": [min(freq.values()), max(freq.values())]}
    _emit_summary(doc, a.out, a.summary_out)
    return EXIT_OK


def _load_config(path, seed, n_jobs):
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a mapping")
    detectors = raw.pop("detectors", None)
    raw["master_seed"] = seed
    if n_jobs:
        raw["n_jobs"] = n_jobs
    if detectors and "detector" not in raw:
        raw["detector"] = detectors[0]
    return ExperimentConfig.from_dict(raw), detectors


def cmd_mc_experiment(a) -> int:
    cfg, _ = _load_config(a.config, a.seed, a.n_jobs)
    report = run_size_power(cfg)
    text = report.to_csv()
    _write_text(text, a.out)
    fails = sum(p.failures for p in report.points)
    if fails:
        sys.stderr.write(f"warning: {fails} run(s) failed and were excluded\n")
    return EXIT_OK


def cmd_roc(a) -> int:
    cfg, detectors = _load_config(a.config, a.seed, a.n_jobs)
    reports = run_roc(cfg, detectors)
    lines = ["detector,fpr,tpr"]
    for name, rep in reports.items():
        lines += [f"{name},{f:.10g},{t:.10g}" for f, t in rep.roc]
    _write_text("\n".join(lines) + "\n", a.out)
    _emit_summary({"auc": {k: r.auc for k, r in reports.items()}}, a.out, a.summary_out)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------

class _DefaultsFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults only when they carry information."""

    def _get_help_string(self, action):
        if action.default in (None, False) or action.default is argparse.SUPPRESS:
            return action.help
        return super()._get_help_string(action)


def build_parser() -> argparse.ArgumentParser:
    fmt = _DefaultsFormatter
    parser = _Parser(prog="tailgc", description="Granger causality in tail for binary "
                     "extreme-event series.", formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a panel from a DGP", formatter_class=fmt)
    p.add_argument("--model", choices=["dar", "vdar2", "vdar1", "star", "garch"], required=True)
    p.add_argument("--T", type=int, required=True, help="series length")
    p.add_argument("--seed", type=int, required=True, help="random seed (required)")
    p.add_argument("--params", type=_json_arg, default=None,
                   help="model parameters as JSON, or @file.json")
    p.add_argument("--scenario", choices=["NULL", "ALTER1", "ALTER2"], default="NULL",
                   help="GARCH scenario")
    p.add_argument("--hits", action="store_true", help="GARCH: emit 5%% VaR hits instead of returns")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="maximum-likelihood fit", formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True, help="panel CSV")
    p.add_argument("--model", choices=["dar", "vdar2", "vdar1"], default="vdar2")
    p.add_argument("--cols", default=None, help="comma-separated column names")
    p.add_argument("--p", type=int, default=None, help="imposed order (dar, vdar2)")
    p.add_argument("--p-max", type=int, default=3, help="BIC search bound (vdar2)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("gc-test", help="test SOURCE -> TARGET causality in tail",
                       formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True, help="panel CSV")
    p.add_argument("--cols", default=None, help="TARGET,SOURCE column names")
    p.add_argument("--method", choices=["lr", "hong"], default="lr")
    p.add_argument("--p-max", type=int, default=3, help="BIC search bound (lr)")
    p.add_argument("--p", type=int, default=None, help="imposed order (lr)")
    p.add_argument("--bandwidth", "--M", dest="bandwidth", type=int, default=5,
                   help="Daniell kernel bandwidth M (hong)")
    p.set_defaults(func=cmd_gc_test)

    p = sub.add_parser("decimate", help="prune VDAR(1) couplings", formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True, help="panel CSV")
    p.add_argument("--out", default=None, help="validated coupling matrix CSV (default: stdout)")
    p.add_argument("--path-out", default=None, help="tilted-likelihood path JSON")
    p.set_defaults(func=cmd_decimate)

    p = sub.add_parser("network", help="build a causality network", formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True, help="panel CSV")
    p.add_argument("--method", choices=["lr", "hong", "decimation"], default="lr")
    p.add_argument("--level", type=float, default=0.05, help="FDR level")
    p.add_argument("--p-max", type=int, default=3, help="BIC search bound (lr)")
    p.add_argument("--bandwidth", "--M", dest="bandwidth", type=int, default=5,
                   help="Daniell kernel bandwidth M (hong)")
    p.add_argument("--out", default=None, help="edge list TSV (default: stdout)")
    p.add_argument("--metrics-out", default=None, help="metrics JSON")
    p.set_defaults(func=cmd_network)

    p = sub.add_parser("preprocess", help="intraday returns to hit panel", formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True,
                   help="CSV day,slot,symbol,price or day,slot,symbol,return")
    p.add_argument("--theta", type=float, default=4.0, help="threshold in spot-volatility units")
    p.add_argument("--alpha", type=_fraction, default="2/61", help="EWMA weight")
    p.add_argument("--side", choices=["left", "right"], default="left")
    p.add_argument("--causal-rescale", action="store_true",
                   help="intraday profile from past days only")
    p.add_argument("--out", default=None, help="panel CSV (default: stdout)")
    p.add_argument("--summary-out", default=None, help="summary JSON")
    p.set_defaults(func=cmd_preprocess)

    for name, func, helptext in (("mc-experiment", cmd_mc_experiment, "Monte Carlo size/power"),
                                 ("roc", cmd_roc, "ROC curves and AUC")):
        p = sub.add_parser(name, help=helptext, formatter_class=fmt)
        p.add_argument("--config", required=True, help="YAML or JSON experiment config")
        p.add_argument("--seed", type=int, required=True, help="master seed (required)")
        p.add_argument("--n-jobs", type=int, default=None, help="worker processes")
        p.add_argument("--out", default=None, help="output CSV (default: stdout)")
        if name == "roc":
            p.add_argument("--summary-out", default=None, help="AUC JSON")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"tailgc: error: {exc}\n")
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError, ArithmeticError) as exc:
        sys.stderr.write(f"tailgc: {type(exc).__name__}: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
