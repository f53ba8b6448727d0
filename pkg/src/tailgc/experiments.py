"""Monte Carlo size/power harness and ROC curves.

A run is: derive a per-run random stream from ``(master_seed, sweep index,
seed index)``, draw any randomised DGP parameters, simulate, apply the
detector, and record whether it rejected and whether the simulated link
was really there. Rates are then aggregated per sweep point.

DGP specs are plain dicts so they can live in YAML/JSON config files::

    {"model": "vdar_bivariate", "nu": 0.5, "lam": [0.25, 0.0], "chi": 0.05, "p": 1}
    {"model": "garch", "scenario": "ALTER1"}
    {"model": "star", "N": 10, "kind": "out", "nu": 0.5, "chi": 0.1}
    {"model": "vdar1", "nu": [...], "lam": [[...]], "chi": [...]}

Scalars for two-equation parameters apply to both equations; a value of
the form ``{"uniform": [lo, hi]}`` is redrawn for every run, and a
top-level ``"null_prob": q`` switches the tested link off (``lam1`` or
``lam2`` set to 0) with probability ``q`` per run.
"""

from __future__ import annotations

import copy
import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .causality import decimate_vdar1, hong_test, lr_tail_test
from .dgp import (BiVdarParams, Vdar1Params, simulate_garch, simulate_vdar1,
                  simulate_vdar_bivariate, star_coupling, star_edges)
from .network import build_pairwise_network
from .preprocess import garch_var_filter

BIVARIATE_MODELS = ("vdar_bivariate", "garch")
NETWORK_MODELS = ("vdar1", "star")
PAIR_METHODS = ("lr", "hong", "constant")
NETWORK_METHODS = ("decimation", "pairwise_lr", "pairwise_hong")


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo study.

    ``sweep`` is ``{"param": name, "values": [...]}``; ``name`` is a DGP key
    (``nu1``, ``lam1``, ``chi`` ...) or ``"T"``. ``direction`` selects the
    tested link of bivariate DGPs: ``forward`` tests Y -> X, ``reverse``
    tests X -> Y.
    """

    dgp: dict
    detector: dict
    T: int
    n_seeds: int
    level: float = 0.05
    sweep: dict | None = None
    direction: str = "forward"
    master_seed: int = 0
    n_jobs: int = 1
    name: str = ""

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be at least 1")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if self.direction not in ("forward", "reverse"):
            raise ValueError("direction must be 'forward' or 'reverse'")
        model = self.dgp.get("model")
        method = self.detector.get("method")
        if model in BIVARIATE_MODELS:
            if method not in PAIR_METHODS:
                raise ValueError(f"detector {method!r} does not apply to model {model!r}")
        elif model in NETWORK_MODELS:
            if method not in NETWORK_METHODS:
                raise ValueError(f"detector {method!r} does not apply to model {model!r}")
        else:
            raise ValueError(f"unknown DGP model {model!r}")
        if model == "garch" and self.dgp.get("scenario", "NULL") is None:
            # YAML reads a bare NULL as a null value
            self.dgp["scenario"] = "NULL"
        if self.sweep is not None and ("param" not in self.sweep or "values" not in self.sweep):
            raise ValueError("sweep needs 'param' and 'values'")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def sweep_values(self) -> list:
        return list(self.sweep["values"]) if self.sweep else [None]


@dataclass(frozen=True)
class SweepPoint:
    """Aggregated rates at one sweep value.

    ``fpr`` is computed over runs without the tested link(s) and ``tpr``
    over runs with it; either is None when no such run exists. For network
    detectors the rates are pooled over all ordered pairs of all runs.
    """

    value: object
    n: int
    fpr: float | None
    tpr: float | None
    se_fpr: float | None
    se_tpr: float | None
    failures: int = 0
    scores: tuple[tuple[float, bool], ...] = field(default=(), repr=False)

    @property
    def se(self) -> float | None:
        return self.se_tpr if self.fpr is None else self.se_fpr if self.tpr is None else None


@dataclass(frozen=True)
class ExperimentReport:
    points: tuple[SweepPoint, ...] = ()
    roc: tuple[tuple[float, float], ...] = ()
    auc: float | None = None
    name: str = ""

    def to_csv(self, path_or_file=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sweep_value", "n", "fpr", "tpr", "se", "se_fpr", "se_tpr", "failures"])
        fmt = lambda v: "" if v is None else (f"{v:.6g}" if isinstance(v, float) else str(v))
        for p in self.points:
            w.writerow([fmt(p.value), p.n, fmt(p.fpr), fmt(p.tpr), fmt(p.se),
                        fmt(p.se_fpr), fmt(p.se_tpr), p.failures])
        text = buf.getvalue()
        _emit(text, path_or_file)
        return text

    def roc_csv(self, path_or_file=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for a, b in self.roc:
            w.writerow([f"{a:.10g}", f"{b:.10g}"])
        text = buf.getvalue()
        _emit(text, path_or_file)
        return text


def _emit(text, path_or_file):
    if path_or_file is None:
        return
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        Path(path_or_file).write_text(text)


def binomial_se(rate: float, n: int) -> float:
    return float(np.sqrt(rate * (1.0 - rate) / n)) if n > 0 else float("nan")


# -- per-run machinery ------------------------------------------------------------

def run_streams(master_seed: int, sweep_idx: int, seed_idx: int):
    """Parameter-draw generator and simulation seed of one run."""
    ss = np.random.SeedSequence([int(master_seed), int(sweep_idx), int(seed_idx)])
    a, b = ss.generate_state(2, np.uint32)
    return np.random.default_rng(int(a)), int(b)


def _draw(value, rng):
    if isinstance(value, dict) and "uniform" in value:
        lo, hi = value["uniform"]
        return float(rng.uniform(lo, hi))
    if isinstance(value, list):
        return [_draw(v, rng) for v in value]
    return value


def _pair(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value, value]


def _set_param(dgp: dict, name: str, value) -> None:
    if name in dgp or name[-1] not in "12":
        dgp[name] = value
        return
    base, idx = name[:-1], int(name[-1]) - 1
    arr = _pair(dgp.get(base, 0.0))
    arr[idx] = value
    dgp[base] = arr


def _resolve(cfg: ExperimentConfig, sweep_value, rng) -> tuple[dict, int]:
    dgp = copy.deepcopy(cfg.dgp)
    T = cfg.T
    if cfg.sweep is not None:
        if cfg.sweep["param"] == "T":
            T = int(sweep_value)
        else:
            _set_param(dgp, cfg.sweep["param"], sweep_value)
    null_prob = dgp.pop("null_prob", None)
    dgp = {k: _draw(v, rng) for k, v in dgp.items()}
    if null_prob is not None and rng.uniform() < null_prob:
        _set_param(dgp, "lam1" if cfg.direction == "forward" else "lam2", 0.0)
    return dgp, T


def _bivariate_params(dgp: dict) -> BiVdarParams:
    p = int(dgp.get("p", 1))
    nu, lam, chi = _pair(dgp["nu"]), _pair(dgp.get("lam", 0.0)), _pair(dgp["chi"])
    gs = dgp.get("gamma_self", [[1.0 / p] * p] * 2)
    gc = dgp.get("gamma_cross", [[1.0 / p] * p] * 2)
    return BiVdarParams(nu, lam, chi, gs, gc)


def _simulate_pair(dgp: dict, T: int, seed: int, direction: str):
    """Returns ``(target, source, truth)`` for the tested direction."""
    if dgp["model"] == "vdar_bivariate":
        P = _bivariate_params(dgp)
        x, y = simulate_vdar_bivariate(P, T, seed, copula_rho=dgp.get("copula_rho"))
        i = 0 if direction == "forward" else 1
        truth = bool(P.nu[i] > 0 and P.lam[i] > 0)
    else:
        scenario = dgp.get("scenario", "NULL")
        r1, r2 = simulate_garch(scenario, T, seed)
        x, y = garch_var_filter(r1), garch_var_filter(r2)
        truth = direction == "forward" and scenario.upper() != "NULL"
    if direction == "forward":
        return x, y, truth
    return y, x, truth


def _network_params(dgp: dict, seed: int) -> Vdar1Params:
    if dgp["model"] == "star":
        return star_coupling(int(dgp["N"]), dgp.get("kind", "out"), seed=seed,
                             nu=dgp.get("nu", 0.5), chi=dgp.get("chi", 0.1), u=dgp.get("u"))
    return Vdar1Params(dgp["nu"], dgp["lam"], dgp["chi"])


def _pair_pvalue(det: dict, target, source) -> float:
    method = det["method"]
    if method == "lr":
        return lr_tail_test(target, source, int(det.get("p_max", 3)), det.get("p")).p_value
    if method == "hong":
        return hong_test(target, source, int(det.get("M", 5))).p_value
    return float(det.get("p_value", 1.0))


def _network_edges(det: dict, panel, level: float) -> set[tuple[int, int]]:
    if det["method"] == "decimation":
        return decimate_vdar1(panel).edges()
    method = det["method"].split("_", 1)[1]
    k = int(det.get("p_max", 3) if method == "lr" else det.get("M", 5))
    g = build_pairwise_network(panel, method, level, k)
    idx = {lab: n for n, lab in enumerate(panel.labels)}
    return {(idx[a], idx[b]) for a, b in g.edges}


def run_once(cfg: ExperimentConfig, sweep_idx: int, sweep_value, seed_idx: int,
             detectors: list[dict] | None = None):
    """One simulation; returns a list with one outcome per detector.

    Pairwise outcomes are ``("pair", p_value, truth)``; network outcomes
    are ``("net", fp, negatives, tp, positives)``.
    """
    rng, seed = run_streams(cfg.master_seed, sweep_idx, seed_idx)
    dgp, T = _resolve(cfg, sweep_value, rng)
    detectors = detectors or [cfg.detector]
    if dgp["model"] in BIVARIATE_MODELS:
        target, source, truth = _simulate_pair(dgp, T, seed, cfg.direction)
        return [("pair", _pair_pvalue(d, target, source), truth) for d in detectors]
    params = _network_params(dgp, seed)
    panel = simulate_vdar1(params, T, seed)
    N = params.N
    true = star_edges(params)
    out = []
    for d in detectors:
        found = _network_edges(d, panel, cfg.level)
        tp = len(found & true)
        fp = len(found - true)
        out.append(("net", fp, N * (N - 1) - len(true), tp, len(true)))
    return out


def _safe_run(args):
    cfg, sweep_idx, value, seed_idx, detectors = args
    try:
        return run_once(cfg, sweep_idx, value, seed_idx, detectors)
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        return exc


def _collect(cfg: ExperimentConfig, detectors: list[dict]):
    """Run every (sweep point, seed); results are ordered by seed index."""
    jobs = [(cfg, si, v, k, detectors)
            for si, v in enumerate(cfg.sweep_values()) for k in range(cfg.n_seeds)]
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as ex:
            results = list(ex.map(_safe_run, jobs, chunksize=max(1, len(jobs) // (4 * cfg.n_jobs))))
    else:
        results = [_safe_run(j) for j in jobs]
    per_point = {}
    for (_, si, v, _, _), res in zip(jobs, results):
        per_point.setdefault(si, (v, []))[1].append(res)
    return [per_point[si] for si in sorted(per_point)]


def _aggregate(value, results, k: int, level: float) -> SweepPoint:
    ok = [r[k] for r in results if not isinstance(r, Exception)]
    failures = len(results) - len(ok)
    if ok and ok[0][0] == "net":
        fp, neg, tp, pos = (sum(r[i] for r in ok) for i in range(1, 5))
        fpr = fp / neg if neg else None
        tpr = tp / pos if pos else None
        return SweepPoint(value, len(ok), fpr, tpr,
                          None if fpr is None else binomial_se(fpr, neg),
                          None if tpr is None else binomial_se(tpr, pos), failures)
    scores = tuple((float(r[1]), bool(r[2])) for r in ok)
    null = [p < level for p, t in scores if not t]
    alt = [p < level for p, t in scores if t]
    fpr = float(np.mean(null)) if null else None
    tpr = float(np.mean(alt)) if alt else None
    return SweepPoint(value, len(ok), fpr, tpr,
                      None if fpr is None else binomial_se(fpr, len(null)),
                      None if tpr is None else binomial_se(tpr, len(alt)),
                      failures, scores)


def run_size_power(cfg: ExperimentConfig) -> ExperimentReport:
    """Rejection rates with binomial standard errors at every sweep point."""
    points = [_aggregate(v, res, 0, cfg.level) for v, res in _collect(cfg, [cfg.detector])]
    return ExperimentReport(tuple(points), name=cfg.name)


# -- ROC ------------------------------------------------------------------------------

def roc_curve(scores) -> ExperimentReport:
    """ROC points and trapezoidal AUC from ``(p_value, is_causal)`` pairs.

    A smaller p-value is stronger evidence; the threshold sweeps every
    distinct p-value, rejecting ``p <= threshold``.
    """
    arr = list(scores)
    p = np.array([float(s[0]) for s in arr])
    y = np.array([bool(s[1]) for s in arr])
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both causal and non-causal cases")
    order = np.argsort(p, kind="stable")
    p, y = p[order], y[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    last = np.r_[np.nonzero(np.diff(p))[0], p.shape[0] - 1]  # end of each tie block
    fpr = np.r_[0.0, fp[last] / n_neg]
    tpr = np.r_[0.0, tp[last] / n_pos]
    if fpr[-1] < 1.0 or tpr[-1] < 1.0:
        fpr, tpr = np.r_[fpr, 1.0], np.r_[tpr, 1.0]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    pts = tuple((float(a), float(b)) for a, b in zip(fpr, tpr))
    return ExperimentReport(roc=pts, auc=auc)


def run_roc(cfg: ExperimentConfig, detectors: list[dict] | None = None) -> dict[str, ExperimentReport]:
    """ROC curve per detector, all detectors scoring the same simulated data.

    Intended for DGPs with ``null_prob`` so both classes occur. Keys are
    detector names (``name`` entry, or the method with its parameter).
    """
    detectors = detectors or [cfg.detector]
    names = [d.get("name") or _detector_name(d) for d in detectors]
    collected = _collect(cfg, detectors)
    out = {}
    for k, name in enumerate(names):
        scores = []
        for _, res in collected:
            scores += [(r[k][1], r[k][2]) for r in res if not isinstance(r, Exception)]
        rep = roc_curve(scores)
        out[name] = ExperimentReport(roc=rep.roc, auc=rep.auc, name=name)
    return out


def _detector_name(d: dict) -> str:
    m = d["method"]
    if m == "lr":
        return f"lr_p{d['p']}" if d.get("p") else f"lr_pmax{d.get('p_max', 3)}"
    if m == "hong":
        return f"hong_M{d.get('M', 5)}"
    return m


def config_to_json(cfg: ExperimentConfig) -> str:
    return json.dumps(asdict(cfg), sort_keys=True)
