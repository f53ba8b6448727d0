"""From intraday returns to binary extreme-event series.

Pipeline: remove the intraday U-shape with :func:`intraday_rescale`,
estimate a jump-robust spot volatility with :func:`spot_volatility`, and
flag standardized returns beyond a threshold with :func:`extract_extremes`.
:func:`garch_var_filter` is the alternative hit rule for daily-style data:
an AR(1)-GARCH(1,1) quasi-MLE fit and its 5% Gaussian VaR.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .core import BinaryPanel, BinarySeries, RealSeries

WARMUP = 30
VAR_FLOOR = 1e-12
Z_5PCT = 1.64


class PreprocessWarning(UserWarning):
    pass


class GarchFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntradayPanel:
    """Per-symbol grids of one-minute log returns, shaped ``(days, slots)``."""

    returns: dict[str, np.ndarray]
    days: tuple = field(default=())

    def __post_init__(self):
        clean = {}
        shape = None
        for sym, grid in self.returns.items():
            arr = np.array(grid, dtype=float)
            if arr.ndim != 2 or arr.size == 0:
                raise ValueError(f"{sym}: returns must form a non-empty (days, slots) grid")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{sym}: returns must be finite")
            if shape is not None and arr.shape != shape:
                raise ValueError("all symbols must share the same (days, slots) grid")
            shape = arr.shape
            arr.flags.writeable = False
            clean[str(sym)] = arr
        if not clean:
            raise ValueError("empty input")
        object.__setattr__(self, "returns", clean)
        days = tuple(self.days) if self.days else tuple(range(shape[0]))
        if len(days) != shape[0]:
            raise ValueError("day labels do not match the grid")
        object.__setattr__(self, "days", days)

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(self.returns)

    @property
    def shape(self) -> tuple[int, int]:
        return next(iter(self.returns.values())).shape

    def flat(self, symbol: str) -> np.ndarray:
        """Returns of one symbol in time order (day-major)."""
        return self.returns[symbol].reshape(-1)


@dataclass(frozen=True)
class VolatilityConfig:
    alpha: float = 2.0 / 61.0
    theta: float = 4.0
    mu1: float = float(np.sqrt(2.0 / np.pi))
    sigma0: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.theta > 0.0:
            raise ValueError("theta must be positive")
        if self.sigma0 is not None and not self.sigma0 > 0.0:
            raise ValueError("sigma0 must be positive")


# -- input ----------------------------------------------------------------------------

def read_intraday_csv(path: str | Path) -> IntradayPanel:
    """Read a long ``day,slot,symbol,price`` or ``day,slot,symbol,return`` CSV.

    Prices are turned into within-day log returns, so each day loses its
    first slot. Every (day, slot, symbol) cell must be present exactly once.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header[:3] != ["day", "slot", "symbol"] or len(header) != 4 \
                or header[3] not in ("price", "return"):
            raise ValueError(f"{path}: expected header day,slot,symbol,price|return")
        kind = header[3]
        cells = {}
        for row in reader:
            if not row:
                continue
            key = (row[0].strip(), int(row[1]), row[2].strip())
            if key in cells:
                raise ValueError(f"{path}: duplicate record {key}")
            cells[key] = float(row[3])
    days = sorted({k[0] for k in cells}, key=_day_key)
    slots = sorted({k[1] for k in cells})
    symbols = sorted({k[2] for k in cells})
    grids = {}
    for sym in symbols:
        try:
            g = np.array([[cells[(d, s, sym)] for s in slots] for d in days])
        except KeyError as exc:
            raise ValueError(f"{path}: missing record {exc.args[0]}") from None
        if kind == "price":
            if np.any(g <= 0):
                raise ValueError(f"{path}: prices must be positive")
            g = np.diff(np.log(g), axis=1)
        grids[sym] = g
    return IntradayPanel(grids, tuple(days))


def _day_key(d: str):
    try:
        return (0, float(d), d)
    except ValueError:
        return (1, 0.0, d)


# -- intraday seasonality -------------------------------------------------------------

def _u_profile(absr: np.ndarray, sym: str) -> np.ndarray:
    s = absr.std(axis=1)
    ok = s > 0
    if not ok.all():
        warnings.warn(f"{sym}: {int((~ok).sum())} day(s) with constant absolute returns "
                      "excluded from the intraday profile", PreprocessWarning, stacklevel=3)
    if not ok.any():
        return np.zeros(absr.shape[1])
    return (absr[ok] / s[ok, None]).mean(axis=0)


def _apply_u(r: np.ndarray, u: np.ndarray, sym: str) -> np.ndarray:
    zero = u <= 0
    if zero.any():
        warnings.warn(f"{sym}: {int(zero.sum())} slot(s) with zero profile passed through "
                      "unrescaled", PreprocessWarning, stacklevel=3)
    return np.where(zero, r, r / np.where(zero, 1.0, u))


def intraday_rescale(panel: IntradayPanel, causal: bool = False) -> IntradayPanel:
    """Divide each slot's returns by the average standardized absolute return.

    The profile is ``u_t = mean_d |r_{d,t}| / s_d`` with ``s_d`` the
    population standard deviation of day ``d``'s absolute returns. With
    ``causal=True`` day ``d`` is rescaled with the profile of days ``< d``
    only, and the first day (which has no past) is dropped.
    """
    out = {}
    for sym, r in panel.returns.items():
        absr = np.abs(r)
        if not causal:
            out[sym] = _apply_u(r, _u_profile(absr, sym), sym)
            continue
        if r.shape[0] < 2:
            raise ValueError("causal rescaling needs at least two days")
        s = absr.std(axis=1)
        ratio = np.where(s[:, None] > 0, absr / np.where(s > 0, s, 1.0)[:, None], 0.0)
        csum = np.cumsum(ratio, axis=0)
        cnt = np.cumsum(s > 0)
        rows = []
        for d in range(1, r.shape[0]):
            u = csum[d - 1] / cnt[d - 1] if cnt[d - 1] else np.zeros(r.shape[1])
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PreprocessWarning)
                rows.append(_apply_u(r[d], u, sym))
        out[sym] = np.array(rows)
    days = panel.days[1:] if causal else panel.days
    return IntradayPanel(out, days)


# -- spot volatility -----------------------------------------------------------------

def spot_volatility(returns, cfg: VolatilityConfig | None = None) -> RealSeries:
    """Threshold bipower EWMA estimate of the spot volatility.

    ``sigma_t`` uses returns up to ``t - 1`` only:

        sigma_t^2 = alpha / mu1^2 * |r_t''| |r_t'| + (1 - alpha) sigma_{t-1}^2,

    with ``t'' < t'`` the two most recent returns that were not jumps, a
    jump being ``|r_s| > theta * sigma_s``. While fewer than two non-jump
    returns exist the previous value is carried. The recursion starts at
    ``sigma_0^2 = mean(|r_k| |r_{k+1}|) / mu1^2`` over the first 30 returns
    unless ``cfg.sigma0`` is set.
    """
    cfg = cfg or VolatilityConfig()
    r = np.asarray(returns.values if isinstance(returns, RealSeries) else returns, dtype=float)
    T = r.shape[0]
    if T < 3:
        raise ValueError("insufficient length")
    if not np.all(np.isfinite(r)):
        raise ValueError("returns must be finite")
    a = np.abs(r)
    k = 1.0 / cfg.mu1 ** 2
    if cfg.sigma0 is not None:
        var = cfg.sigma0 ** 2
    else:
        head = a[:WARMUP]
        var = k * float(np.mean(head[:-1] * head[1:]))
    if not var > 0:
        raise ValueError("initial volatility is zero; set sigma0")
    sig = np.empty(T)
    last, prev = -1, -1  # most recent and second most recent non-jump indices
    carried = 0
    for t in range(T):
        if t > 0:
            if prev >= 0:
                var = cfg.alpha * k * a[prev] * a[last] + (1.0 - cfg.alpha) * var
            else:
                carried += 1
        sig[t] = np.sqrt(var)
        if a[t] <= cfg.theta * sig[t]:
            last, prev = t, last
    if carried > 1:
        warnings.warn(f"volatility carried forward at {carried - 1} step(s) with fewer than "
                      "two non-jump returns", PreprocessWarning, stacklevel=2)
    label = returns.label if isinstance(returns, RealSeries) else None
    ts = returns.timestamps if isinstance(returns, RealSeries) else None
    return RealSeries(sig, label, ts)


def extract_extremes(returns, sigma, theta: float = 4.0, side: str = "left") -> BinarySeries:
    """Hits ``r_t / sigma_t < -theta`` (left) or ``> theta`` (right)."""
    r = np.asarray(returns.values if isinstance(returns, RealSeries) else returns, dtype=float)
    s = np.asarray(sigma.values if isinstance(sigma, RealSeries) else sigma, dtype=float)
    if r.shape != s.shape:
        raise ValueError("returns and sigma must have equal lengths")
    if np.any(s <= 0):
        raise ValueError("sigma must be strictly positive")
    z = r / s
    if side == "left":
        hits = z < -theta
    elif side == "right":
        hits = z > theta
    else:
        raise ValueError("side must be 'left' or 'right'")
    label = returns.label if isinstance(returns, RealSeries) else None
    return BinarySeries(hits.astype(np.int8), label)


def hits_from_returns(returns, cfg: VolatilityConfig | None = None, side: str = "left",
                      warmup: int = WARMUP) -> BinarySeries:
    """Spot volatility and threshold hits, dropping the first ``warmup`` points."""
    cfg = cfg or VolatilityConfig()
    sig = spot_volatility(returns, cfg)
    hits = extract_extremes(returns, sig, cfg.theta, side)
    if hits.values.shape[0] <= warmup:
        raise ValueError("series shorter than the warm-up period")
    return BinarySeries(hits.values[warmup:], hits.label)


def intraday_to_panel(panel: IntradayPanel, cfg: VolatilityConfig | None = None,
                      side: str = "left", causal: bool = False,
                      warmup: int = WARMUP) -> BinaryPanel:
    """Full pipeline: rescale, spot volatility, hits; one column per symbol."""
    cfg = cfg or VolatilityConfig()
    scaled = intraday_rescale(panel, causal=causal)
    cols = [hits_from_returns(RealSeries(scaled.flat(s), s), cfg, side, warmup)
            for s in scaled.symbols]
    return BinaryPanel.from_series(cols)


# -- GARCH VaR filter -----------------------------------------------------------------

@dataclass(frozen=True)
class GarchFit:
    """Quasi-MLE of ``x_t = beta x_{t-1} + u_t``, ``s_t = g0 + g1 s_{t-1} + g2 u_{t-1}^2``."""

    beta: float
    gamma0: float
    gamma1: float
    gamma2: float
    sigma: np.ndarray
    resid: np.ndarray
    loglik: float
    converged: bool
    message: str = ""


def _garch_variance(u: np.ndarray, g0: float, g1: float, g2: float, v0: float) -> np.ndarray:
    # s_t = g0 + g2 u_{t-1}^2 + g1 s_{t-1}, with s_0 = v0
    drive = g0 + g2 * np.concatenate([[0.0], u[:-1] ** 2])
    drive[0] = v0
    return np.maximum(lfilter([1.0], [1.0, -g1], drive), VAR_FLOOR)


def fit_ar1_garch(x) -> GarchFit:
    """Gaussian quasi-MLE of the AR(1)-GARCH(1,1) model without spillovers."""
    xv = np.asarray(x.values if isinstance(x, RealSeries) else x, dtype=float)
    T = xv.shape[0]
    if T < 100:
        raise ValueError("insufficient length")
    v0 = float(np.var(xv))
    if not v0 > 0:
        raise ValueError("zero variance")

    def resid(beta):
        return np.concatenate([[xv[0]], xv[1:] - beta * xv[:-1]])

    def nll(th):
        beta, g0, g1, g2 = th
        u = resid(beta)
        s = _garch_variance(u, g0, g1, g2, v0)
        return 0.5 * float(np.sum(np.log(s) + u * u / s))

    b0 = float(np.dot(xv[1:], xv[:-1]) / np.dot(xv[:-1], xv[:-1]))
    b0 = min(max(b0, -0.95), 0.95)
    uv = float(np.var(resid(b0)))
    th0 = np.array([b0, 0.2 * uv, 0.7, 0.1])
    bounds = [(-0.999, 0.999), (1e-10, None), (0.0, 0.999), (0.0, 0.999)]
    res = minimize(nll, th0, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": 500, "ftol": 1e-12, "gtol": 1e-8})
    if not np.isfinite(res.fun) or (not res.success and res.nit >= 500):
        raise GarchFitError(f"GARCH quasi-MLE did not converge: {res.message} "
                            f"(nit={res.nit}, nll={res.fun})")
    beta, g0, g1, g2 = (float(v) for v in res.x)
    u = resid(beta)
    s = _garch_variance(u, g0, g1, g2, v0)
    ll = -float(res.fun) - 0.5 * T * np.log(2.0 * np.pi)
    return GarchFit(beta, g0, g1, g2, np.sqrt(s), u, ll, bool(res.success), str(res.message))


def garch_var_filter(x, z: float = Z_5PCT, on_residual: bool = True) -> BinarySeries:
    """5% VaR exceedances from the fitted AR(1)-GARCH(1,1) model.

    By default a hit is ``u_t < -z sigma_t`` with ``u_t`` the fitted
    innovation, i.e. the observation falls below the conditional VaR
    ``beta x_{t-1} - z sigma_t``. ``on_residual=False`` compares the raw
    observation instead (``x_t < -z sigma_t``), which ignores the
    conditional mean and so is not calibrated at 5% when ``beta != 0``.
    """
    fit = fit_ar1_garch(x)
    xv = np.asarray(x.values if isinstance(x, RealSeries) else x, dtype=float)
    lhs = fit.resid if on_residual else xv
    label = x.label if isinstance(x, RealSeries) else None
    return BinarySeries((lhs < -z * fit.sigma).astype(np.int8), label)
