"""Likelihoods, Yule-Walker warm starts, maximum likelihood and BIC.

All three models share one conditional probability,

    P(X_t) = nu * sum_k q_k * delta(X_t, S_{k,t}) + (1 - nu) * chi^X_t (1 - chi)^(1 - X_t),

where ``S_{k,t}`` are the candidate past values that can be copied and ``q``
is a probability vector over them: the lag weights for DAR(p), the
``(1 - lambda) gamma_self`` / ``lambda gamma_cross`` blend for one equation
of the bivariate VDAR(p), and one row of the coupling matrix for VDAR(1).

Fitting works on the unique ``(X_t, delta(X_t, S_{1,t}), ...)`` patterns
with their counts, so an evaluation costs O(#patterns) instead of O(T).
The likelihood is concave in the mixture weights ``nu q``, ``(1 - nu) chi``
and ``(1 - nu)(1 - chi)``; fits solve that concave problem with L-BFGS-B
(see ``_solve``), so every reported maximum is global.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import as_binary, as_panel, BinaryPanel
from .dgp import BiVdarParams, DarParams, Vdar1Params

TOL = 1e-9
MAX_ITER = 500
_START_FLOOR = 1e-6
_LOG_KNOT = 1e-10


class EstimationError(ValueError):
    """Raised when a model cannot be estimated from the data."""


class DegenerateLikelihoodWarning(RuntimeWarning):
    pass


class DegenerateSeriesWarning(RuntimeWarning):
    pass


class YuleWalkerDomainWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class FitResult:
    """Outcome of a maximum-likelihood fit.

    ``loglik`` is the total conditional log-likelihood; ``loglik_eq`` holds
    the per-equation terms (one for DAR, two for the bivariate model, N for
    VDAR(1)).
    """

    params: DarParams | BiVdarParams | Vdar1Params
    loglik: float
    p: int
    converged: bool
    iterations: int
    loglik_eq: tuple[float, ...] = field(default=())


# -- design matrices ---------------------------------------------------------

def _lag_matches(target: np.ndarray, source: np.ndarray, p: int) -> np.ndarray:
    """Columns ``delta(target_t, source_{t-k})`` for ``k = 1..p``, ``t >= p``."""
    T = target.shape[0]
    tail = target[p:]
    return np.column_stack([tail == source[p - k:T - k] for k in range(1, p + 1)])


def dar_design(x, p: int) -> tuple[np.ndarray, np.ndarray]:
    x = as_binary(x)
    return x[p:], _lag_matches(x, x, p)


def bivariate_design(x, y, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Design for the X equation: own lags first, then lags of Y."""
    x, y = as_binary(x), as_binary(y)
    return x[p:], np.hstack([_lag_matches(x, x, p), _lag_matches(x, y, p)])


def vdar1_design(values: np.ndarray, i: int) -> tuple[np.ndarray, np.ndarray]:
    target = values[1:, i]
    return target, (target[:, None] == values[:-1, :])


@dataclass(frozen=True)
class _Patterns:
    D: np.ndarray
    x: np.ndarray
    w: np.ndarray

    @property
    def nobs(self) -> float:
        return float(self.w.sum())


def _compress(target: np.ndarray, D: np.ndarray) -> _Patterns:
    bits = np.column_stack([target, D]).astype(np.int64)
    width = bits.shape[1]
    if width <= 62:
        codes = bits @ (np.int64(1) << np.arange(width, dtype=np.int64))
        uniq, counts = np.unique(codes, return_counts=True)
        rows = (uniq[:, None] >> np.arange(width, dtype=np.int64)) & 1
    else:
        rows, counts = np.unique(bits, axis=0, return_counts=True)
    return _Patterns(rows[:, 1:].astype(float), rows[:, 0].astype(float), counts.astype(float))


def _mixture(D, x, w, q, nu, chi, want_grad=True):
    """Log-likelihood and its gradient with respect to ``(q, nu, chi)``."""
    m = D @ q
    b = np.where(x > 0, chi, 1.0 - chi)
    P = nu * m + (1.0 - nu) * b
    if np.any(P[w > 0] <= 0.0):
        return -np.inf, None
    ll = float(w @ np.log(P))
    if not want_grad:
        return ll, None
    r = w / P
    g_q = nu * (D.T @ r)
    g_nu = float(r @ (m - b))
    g_chi = float((1.0 - nu) * (r @ (2.0 * x - 1.0)))
    return ll, (g_q, g_nu, g_chi)


def _flag_degenerate(ll):
    if ll == -np.inf:
        warnings.warn("degenerate likelihood", DegenerateLikelihoodWarning, stacklevel=3)
    return ll


# -- public log-likelihoods ----------------------------------------------------

def loglik_dar(x, params: DarParams, *, return_grad: bool = False):
    """Conditional DAR(p) log-likelihood given the first ``p`` observations.

    With ``return_grad=True`` also returns a dict of partial derivatives
    with respect to ``nu``, ``gamma`` and ``chi``.
    """
    xv = as_binary(x)
    p = params.p
    if xv.shape[0] < p + 1:
        raise ValueError("insufficient length")
    target, D = dar_design(xv, p)
    ll, g = _mixture(D.astype(float), target.astype(float), np.ones(target.shape[0]),
                     params.gamma, params.nu, params.chi, want_grad=return_grad)
    ll = _flag_degenerate(ll)
    if not return_grad:
        return ll
    g_q, g_nu, g_chi = g if g is not None else (np.full(p, np.nan), np.nan, np.nan)
    return ll, {"nu": g_nu, "gamma": g_q, "chi": g_chi}


def _bivariate_eq_params(params: BiVdarParams, i: int):
    return (params.nu[i], params.lam[i], params.chi[i],
            params.gamma_self[i], params.gamma_cross[i])


def loglik_vdar_bivariate(x, y, params: BiVdarParams, *, equation: int = 0,
                          return_grad: bool = False):
    """Conditional log-likelihood of one equation of the bivariate VDAR(p).

    ``equation=0`` scores ``x`` given the past of both series with the X
    parameters; ``loglik_vdar_bivariate(y, x, params, equation=1)`` scores the
    Y equation.
    """
    xv, yv = as_binary(x), as_binary(y)
    if xv.shape != yv.shape:
        raise ValueError("series must have equal lengths")
    p = params.p
    if xv.shape[0] < p + 1:
        raise ValueError("insufficient length")
    nu, lam, chi, gs, gc = _bivariate_eq_params(params, equation)
    target, D = bivariate_design(xv, yv, p)
    q = np.concatenate([(1.0 - lam) * gs, lam * gc])
    ll, g = _mixture(D.astype(float), target.astype(float), np.ones(target.shape[0]),
                     q, nu, chi, want_grad=return_grad)
    ll = _flag_degenerate(ll)
    if not return_grad:
        return ll
    if g is None:
        nan = np.full(p, np.nan)
        return ll, {"nu": np.nan, "lam": np.nan, "chi": np.nan, "gamma_self": nan, "gamma_cross": nan}
    g_q, g_nu, g_chi = g
    return ll, {
        "nu": g_nu,
        "lam": float(-g_q[:p] @ gs + g_q[p:] @ gc),
        "chi": g_chi,
        "gamma_self": g_q[:p] * (1.0 - lam),
        "gamma_cross": g_q[p:] * lam,
    }


def loglik_vdar1(panel, params: Vdar1Params, *, return_grad: bool = False):
    """Conditional VDAR(1) log-likelihood given the first cross-section."""
    values = as_panel(panel).values
    T, N = values.shape
    if T < 2:
        raise ValueError("insufficient length")
    if params.N != N:
        raise ValueError("parameter dimension does not match panel width")
    total = 0.0
    g_nu, g_chi, g_lam = np.zeros(N), np.zeros(N), np.zeros((N, N))
    ones = np.ones(T - 1)
    for i in range(N):
        target, D = vdar1_design(values, i)
        ll, g = _mixture(D.astype(float), target.astype(float), ones,
                         params.lam[i], params.nu[i], params.chi[i], want_grad=return_grad)
        total += ll
        if return_grad and g is not None:
            g_lam[i], g_nu[i], g_chi[i] = g
    total = _flag_degenerate(total)
    if not return_grad:
        return total
    return total, {"nu": g_nu, "lam": g_lam, "chi": g_chi}


# -- mixture-weight optimiser ------------------------------------------------
#
# In terms of the component weights v = (nu q, (1 - nu) chi, (1 - nu)(1 - chi))
# every model is a finite mixture with known components, so the
# log-likelihood is concave in v.  Maximising
#     sum_t w_t log(L_t v) - n sum(v)   over v >= 0
# is equivalent (its maximiser has sum(v) = 1) and only needs box
# constraints, which L-BFGS-B enforces exactly: a coupling can reach zero
# and leave it again, and the solution is the global optimum.

def _components(pat: _Patterns) -> np.ndarray:
    """Component likelihoods: one column per copy source, then X=1 and X=0."""
    return np.column_stack([pat.D, pat.x, 1.0 - pat.x])


def _weights_loglik(L, w, v) -> float:
    P = L @ v
    if np.any(P <= 0.0):
        return -np.inf
    return float(w @ np.log(P))


def _ext_log(P):
    """``log`` continued below ``_LOG_KNOT`` by its second-order Taylor expansion.

    The continuation keeps the objective finite, concave and C1 on all of
    ``v >= 0``. It never binds at the optimum, where every pattern has
    probability at least ``w_t / n``.
    """
    z = np.maximum(P, _LOG_KNOT)
    val, d = np.log(z), 1.0 / z
    low = P < _LOG_KNOT
    if np.any(low):
        h = (P[low] - _LOG_KNOT) / _LOG_KNOT
        val[low] = np.log(_LOG_KNOT) + h - 0.5 * h * h
        d[low] = (1.0 - h) / _LOG_KNOT
    return val, d


def _solve(pat: _Patterns, v0, free=None):
    """Maximise the mixture log-likelihood over the weights, starting at ``v0``.

    Coordinates outside ``free`` are pinned at zero. Never returns a point
    worse than the (normalised) start. Returns ``(v, loglik, converged, nit)``.
    """
    L = _components(pat)
    w, n = pat.w, pat.nobs
    K = L.shape[1]
    free = np.ones(K, dtype=bool) if free is None else np.asarray(free, dtype=bool)
    v0 = np.where(free, np.asarray(v0, dtype=float), 0.0)
    v0 = v0 / v0.sum()
    ll0 = _weights_loglik(L, w, v0)
    start = np.where(free, np.maximum(v0, _START_FLOOR), 0.0)
    start = start / start.sum()

    def f(v):
        val, d = _ext_log(L @ v)
        return -float(w @ val) / n + v.sum(), 1.0 - (L.T @ (w * d)) / n

    bounds = [(0.0, None) if fr else (0.0, 0.0) for fr in free]
    res = minimize(f, start, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": MAX_ITER, "ftol": TOL / n, "gtol": 1e-12, "maxcor": 20})
    v = np.where(free, np.clip(res.x, 0.0, None), 0.0)
    v = v / v.sum() if v.sum() > 0 else start
    ll = _weights_loglik(L, w, v)
    if not ll >= ll0:
        v, ll = v0, ll0
    return v, ll, bool(res.nit < MAX_ITER and np.isfinite(ll)), int(res.nit)


def _pack(nu, q, chi) -> np.ndarray:
    return np.concatenate([nu * np.asarray(q, dtype=float), [(1.0 - nu) * chi, (1.0 - nu) * (1.0 - chi)]])


def _unpack(v, chi_default: float):
    """Split weights into ``(nu, q, chi)``; ``q`` is unnormalised copy mass / nu."""
    a = v[:-2]
    nu = float(min(a.sum(), 1.0))
    rest = v[-2] + v[-1]
    chi = float(v[-2] / rest) if rest > 0 else float(chi_default)
    return nu, a, chi


def _normalise(a, fallback):
    s = a.sum()
    return a / s if s > 0 else np.asarray(fallback, dtype=float)


# -- Yule-Walker ---------------------------------------------------------------

def _autocov(Z: np.ndarray, k: int) -> np.ndarray:
    """Population lag-k autocovariance ``E[(Z_t - mu)(Z_{t-k} - mu)']``."""
    T = Z.shape[0]
    Zc = Z - Z.mean(axis=0)
    return Zc[k:].T @ Zc[:T - k] / T


def _var_yule_walker(Z: np.ndarray, p: int):
    """Solve the VAR(p) Yule-Walker system; returns ``(phi0, [Phi_1..Phi_p])``."""
    n = Z.shape[1]
    gam = [_autocov(Z, k) for k in range(p + 1)]
    G = np.empty((n * p, n * p))
    for l in range(p):
        for k in range(p):
            d = k - l
            G[l * n:(l + 1) * n, k * n:(k + 1) * n] = gam[d] if d >= 0 else gam[-d].T
    R = np.hstack(gam[1:p + 1])
    if not np.all(np.isfinite(G)) or np.linalg.cond(G) > 1e12:
        raise EstimationError("Yule–Walker system singular")
    Phi = np.linalg.solve(G.T, R.T).T
    Phis = [Phi[:, k * n:(k + 1) * n] for k in range(p)]
    mu = Z.mean(axis=0)
    phi0 = mu - sum(P @ mu for P in Phis)
    return phi0, Phis


def _safe_ratio(num, den):
    return num / den if den > 0 else np.full_like(num, 1.0 / num.shape[0])


def bivdar_from_var(phi0, Phis) -> BiVdarParams:
    """Map VAR(p) coefficients onto bivariate VDAR(p) parameters.

    Negative coefficients are clipped to zero before the mapping; a
    :class:`YuleWalkerDomainWarning` is issued if any unclipped probability
    falls outside ``[-0.5, 1.5]``.
    """
    A = np.array([np.asarray(P, dtype=float) for P in Phis])  # (p, 2, 2)
    phi0 = np.asarray(phi0, dtype=float)
    raw = []
    for i in range(2):
        own, oth = A[:, i, i], A[:, i, 1 - i]
        nu = own.sum() + oth.sum()
        raw += [nu, oth.sum() / nu if nu != 0 else 0.0, phi0[i] / (1.0 - nu) if nu != 1 else 0.0]
    if any(not -0.5 <= v <= 1.5 for v in raw):
        warnings.warn("Yule–Walker estimates far outside the parameter domain",
                      YuleWalkerDomainWarning, stacklevel=2)
    Ac = np.clip(A, 0.0, None)
    nu, lam, chi, gs, gc = np.zeros(2), np.zeros(2), np.zeros(2), [], []
    for i in range(2):
        own, oth = Ac[:, i, i], Ac[:, i, 1 - i]
        nu[i] = min(own.sum() + oth.sum(), 1.0)
        lam[i] = oth.sum() / (own.sum() + oth.sum()) if nu[i] > 0 else 0.0
        gs.append(_safe_ratio(own, own.sum()))
        gc.append(_safe_ratio(oth, oth.sum()))
        chi[i] = np.clip(phi0[i] / (1.0 - nu[i]), 0.0, 1.0) if nu[i] < 1 else 0.5
    return BiVdarParams(nu, lam, chi, np.array(gs), np.array(gc))


def yule_walker_bivariate(x, y, p: int) -> BiVdarParams:
    """Method-of-moments estimate of the bivariate VDAR(p)."""
    xv, yv = as_binary(x), as_binary(y)
    if xv.shape != yv.shape:
        raise ValueError("series must have equal lengths")
    if p < 1 or xv.shape[0] < p + 2:
        raise ValueError("insufficient length")
    Z = np.column_stack([xv, yv]).astype(float)
    if np.any(Z.std(axis=0) == 0):
        raise EstimationError("Yule–Walker system singular")
    raw0, Phis = _var_yule_walker(Z, p)
    _check_domain_bivariate(raw0, Phis)
    # intercept consistent with the clipped coefficients
    mu = Z.mean(axis=0)
    phi0 = mu - sum(np.clip(P, 0, None) @ mu for P in Phis)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", YuleWalkerDomainWarning)
        return bivdar_from_var(phi0, Phis)


def _check_domain_bivariate(phi0, Phis):
    A = np.array(Phis)
    for i in range(2):
        nu = A[:, i, :].sum()
        lam = A[:, i, 1 - i].sum() / nu if nu != 0 else 0.0
        chi = phi0[i] / (1.0 - nu) if nu != 1 else 0.0
        if any(not -0.5 <= v <= 1.5 for v in (nu, lam, chi)):
            warnings.warn("Yule–Walker estimates far outside the parameter domain",
                          YuleWalkerDomainWarning, stacklevel=3)
            return


def yule_walker_dar(x, p: int) -> DarParams:
    """AR(p) Yule-Walker estimate mapped onto DAR(p) parameters."""
    xv = as_binary(x).astype(float)
    if xv.std() == 0:
        raise EstimationError("Yule–Walker system singular")
    phi0, Phis = _var_yule_walker(xv[:, None], p)
    phi = np.clip(np.array([P[0, 0] for P in Phis]), 0.0, None)
    nu = min(phi.sum(), 1.0)
    gamma = _safe_ratio(phi, phi.sum())
    return DarParams(nu, gamma, float(xv.mean()))


def vdar1_from_var(phi0, Phi1) -> Vdar1Params:
    """Map VAR(1) coefficients onto VDAR(1) parameters.

    Negative coefficients are clipped to zero; a row whose coefficients all
    vanish gets a uniform coupling row (the ratio is undefined) and a
    :class:`YuleWalkerDomainWarning`.
    """
    Phi = np.clip(np.asarray(Phi1, dtype=float), 0.0, None)
    phi0 = np.asarray(phi0, dtype=float)
    N = Phi.shape[0]
    nu = Phi.sum(axis=1)
    lam = np.empty_like(Phi)
    chi = np.empty(N)
    for i in range(N):
        if nu[i] > 0:
            lam[i] = Phi[i] / nu[i]
        else:
            lam[i] = 1.0 / N
            warnings.warn(f"row {i}: zero copy probability, coupling row set to uniform",
                          YuleWalkerDomainWarning, stacklevel=2)
        nu[i] = min(nu[i], 1.0)
        chi[i] = np.clip(phi0[i] / (1.0 - nu[i]), 0.0, 1.0) if nu[i] < 1 else 0.5
    return Vdar1Params(nu, lam, chi)


def yule_walker_vdar1(panel) -> Vdar1Params:
    """Method-of-moments estimate of the VDAR(1) parameters."""
    Z = as_panel(panel).values.astype(float)
    if Z.shape[0] < 3:
        raise ValueError("insufficient length")
    if np.any(Z.std(axis=0) == 0):
        raise EstimationError("Yule–Walker system singular")
    _, (Phi,) = _var_yule_walker(Z, 1)
    mu = Z.mean(axis=0)
    raw_nu = Phi.sum(axis=1)
    if np.any((raw_nu < -0.5) | (raw_nu > 1.5)):
        warnings.warn("Yule–Walker estimates far outside the parameter domain",
                      YuleWalkerDomainWarning, stacklevel=2)
    Phi_c = np.clip(Phi, 0.0, None)
    return vdar1_from_var(mu - Phi_c @ mu, Phi_c)


# -- maximum likelihood --------------------------------------------------------

def _degenerate(target: np.ndarray) -> bool:
    return target.size == 0 or bool(np.all(target == target[0]))


def _boundary_dar(target, p):
    warnings.warn("degenerate series", DegenerateSeriesWarning, stacklevel=3)
    chi = float(target[0]) if target.size else 0.0
    return DarParams(0.0, np.full(p, 1.0 / p), chi)


def _fit_dar_patterns(pat: _Patterns, p: int, start: DarParams):
    v, ll, conv, nit = _solve(pat, _pack(start.nu, start.gamma, start.chi))
    nu, a, chi = _unpack(v, float(pat.x @ pat.w / pat.nobs))
    return DarParams(nu, _normalise(a, np.full(p, 1.0 / p)), chi), ll, conv, nit


def mle_dar(x, p: int) -> FitResult:
    """Maximum-likelihood DAR(p) fit, warm-started at Yule-Walker."""
    xv = as_binary(x)
    if p < 1 or xv.shape[0] < p + 2:
        raise ValueError("insufficient length")
    target, D = dar_design(xv, p)
    if _degenerate(target):
        params = _boundary_dar(target, p)
        return FitResult(params, 0.0, p, False, 0, (0.0,))
    try:
        start = yule_walker_dar(xv, p)
    except EstimationError:
        start = DarParams(0.5, np.full(p, 1.0 / p), float(target.mean()))
    params, ll, conv, nit = _fit_dar_patterns(_compress(target, D), p, start)
    return FitResult(params, ll, p, conv, nit, (ll,))


def _fit_bivariate_eq(target_series, source_series, p, start=None, nested: DarParams | None = None):
    """Fit one bivariate equation.

    ``start`` is a ``(nu, lam, chi, gamma_self, gamma_cross)`` tuple; when
    ``nested`` is given, a second run starts at that DAR(p) solution with
    cross copies switched off, so the result is never below the nested fit.
    Returns ``(params_tuple, loglik, converged, iterations)``.
    """
    target, D = bivariate_design(target_series, source_series, p)
    u = np.full(p, 1.0 / p)
    if _degenerate(target):
        warnings.warn("degenerate series", DegenerateSeriesWarning, stacklevel=3)
        return (0.0, 0.0, float(target[0]) if target.size else 0.0, u, u), 0.0, False, 0
    pat = _compress(target, D)
    if start is None:
        start = (0.5, 0.1, float(target.mean()), u, u)
    nu0, lam0, chi0, gs0, gc0 = start
    best = _solve(pat, _pack(nu0, np.concatenate([(1 - lam0) * np.asarray(gs0), lam0 * np.asarray(gc0)]), chi0))
    if nested is not None:
        alt = _solve(pat, _pack(nested.nu, np.concatenate([nested.gamma, np.zeros(p)]), nested.chi))
        if alt[1] > best[1]:
            best = alt
    v, ll, conv, nit = best
    nu, a, chi = _unpack(v, float(target.mean()))
    own, cross = a[:p], a[p:]
    lam = float(cross.sum() / a.sum()) if a.sum() > 0 else 0.0
    return (nu, lam, chi, _normalise(own, u), _normalise(cross, u)), ll, conv, nit


def _bivariate_starts(xv, yv, p):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", YuleWalkerDomainWarning)
            yw = yule_walker_bivariate(xv, yv, p)
        return [_bivariate_eq_params(yw, i) for i in range(2)]
    except EstimationError:
        return [None, None]


def _assemble_bivariate(eqs) -> BiVdarParams:
    (n1, l1, c1, gs1, gc1), (n2, l2, c2, gs2, gc2) = eqs
    norm = lambda g: np.asarray(g) / np.sum(g)
    return BiVdarParams([n1, n2], [l1, l2], [c1, c2],
                        [norm(gs1), norm(gs2)], [norm(gc1), norm(gc2)])


def mle_vdar_bivariate(x, y, p: int) -> FitResult:
    """Maximum-likelihood fit of both equations of the bivariate VDAR(p).

    ``loglik`` is the joint log-likelihood ``log P(X|Y) + log P(Y|X)``.
    """
    xv, yv = as_binary(x), as_binary(y)
    if xv.shape != yv.shape:
        raise ValueError("series must have equal lengths")
    if p < 1 or xv.shape[0] < p + 2:
        raise ValueError("insufficient length")
    starts = _bivariate_starts(xv, yv, p)
    dx, dy = _fit_dar_target(xv, p), _fit_dar_target(yv, p)
    fits = [_fit_bivariate_eq(xv, yv, p, starts[0], nested=None if dx is None else dx[0]),
            _fit_bivariate_eq(yv, xv, p, starts[1], nested=None if dy is None else dy[0])]
    params = _assemble_bivariate([f[0] for f in fits])
    lls = tuple(f[1] for f in fits)
    return FitResult(params, sum(lls), p, all(f[2] for f in fits),
                     max(f[3] for f in fits), lls)


# VDAR(1) ---------------------------------------------------------------------

class Vdar1Problem:
    """Per-equation compressed VDAR(1) likelihoods of one panel.

    The VDAR(1) log-likelihood is a sum of independent per-equation terms,
    so every fit (and every decimation refit) only touches one equation.
    """

    def __init__(self, panel):
        panel = as_panel(panel)
        self.values = panel.values
        self.T, self.N = self.values.shape
        if self.T < 2:
            raise ValueError("insufficient length")
        self.targets = [self.values[1:, i] for i in range(self.N)]
        self.patterns = [_compress(*vdar1_design(self.values, i)) for i in range(self.N)]

    def degenerate(self, i) -> bool:
        return _degenerate(self.targets[i])

    def bernoulli_loglik(self, i) -> float:
        """Row log-likelihood with no copying and the sample-mean marginal."""
        t = self.targets[i]
        n1 = float(t.sum())
        n0 = t.shape[0] - n1
        chi = n1 / t.shape[0]
        ll = 0.0
        if n1 > 0:
            ll += n1 * np.log(chi)
        if n0 > 0:
            ll += n0 * np.log1p(-chi)
        return ll

    def fit_row(self, i, active, start=None):
        """Fit equation ``i`` with couplings outside ``active`` pinned at 0.

        Returns ``(nu, lam_row, chi, loglik, converged, iterations)``.
        """
        active = np.asarray(active, dtype=bool)
        N = self.N
        if self.degenerate(i):
            lam = np.zeros(N)
            lam[i if active[i] else int(np.argmax(active))] = 1.0 if active.any() else 0.0
            if not active.any():
                lam[i] = 1.0
            return 0.0, lam, float(self.targets[i][0]), 0.0, False, 0
        if not active.any():
            chi = float(self.targets[i].mean())
            lam = np.zeros(N)
            lam[i] = 1.0
            return 0.0, lam, chi, self.bernoulli_loglik(i), True, 0
        if start is None:
            nu0, lam0, chi0 = 0.5, active / active.sum(), float(self.targets[i].mean())
        else:
            nu0, lam0, chi0 = start
        free = np.concatenate([active, [True, True]])
        v, ll, conv, nit = _solve(self.patterns[i], _pack(nu0, np.asarray(lam0, dtype=float), chi0), free)
        nu, a, chi = _unpack(v, float(self.targets[i].mean()))
        return nu, _normalise(a, active / active.sum()), chi, ll, conv, nit


def _yw_vdar1_start(problem: Vdar1Problem):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", YuleWalkerDomainWarning)
            return yule_walker_vdar1(problem.values)
    except EstimationError:
        return None


def mle_vdar1(panel) -> FitResult:
    """Maximum-likelihood VDAR(1) fit, warm-started at Yule-Walker."""
    problem = panel if isinstance(panel, Vdar1Problem) else Vdar1Problem(panel)
    N = problem.N
    yw = _yw_vdar1_start(problem)
    nu, chi, lam = np.zeros(N), np.zeros(N), np.zeros((N, N))
    lls, conv, nit = [], True, 0
    full = np.ones(N, dtype=bool)
    for i in range(N):
        start = None if yw is None else (yw.nu[i], yw.lam[i], yw.chi[i])
        nu[i], lam[i], chi[i], ll, c, it = problem.fit_row(i, full, start)
        lls.append(ll)
        conv &= c
        nit = max(nit, it)
    return FitResult(Vdar1Params(nu, lam, chi), float(sum(lls)), 1, bool(conv), nit, tuple(lls))


# -- order selection ---------------------------------------------------------------

def bic_value(loglik_joint: float, p: int, T: int) -> float:
    return 2.0 * (2 * p + 1) * np.log(T) - 2.0 * loglik_joint


def _fit_dar_target(target_series, p):
    target, D = dar_design(target_series, p)
    if _degenerate(target):
        return None
    try:
        start = yule_walker_dar(target_series, p)
    except EstimationError:
        start = DarParams(0.5, np.full(p, 1.0 / p), float(target.mean()))
    return _fit_dar_patterns(_compress(target, D), p, start)


def bic_path(x, y, p_max: int) -> dict[int, dict]:
    """Fit both equations and the nested DAR models for ``p = 1..p_max``.

    Each equation is started both at Yule-Walker and at its own DAR(p)
    optimum with cross copies switched off, so the full fit never falls
    below the nested one. Returns ``{p: {"x", "y", "dar_x", "dar_y", "bic"}}``;
    the equation entries are ``(params_tuple, loglik, converged, iterations)``
    and the DAR entries are ``(DarParams, loglik, converged, iterations)`` or
    None for a degenerate target.
    """
    xv, yv = as_binary(x), as_binary(y)
    if xv.shape != yv.shape:
        raise ValueError("series must have equal lengths")
    T = xv.shape[0]
    if p_max < 1 or T < p_max + 2:
        raise ValueError("insufficient length")
    return {p: fit_pair(xv, yv, p) for p in range(1, p_max + 1)}


def fit_pair(x, y, p: int, both: bool = True) -> dict:
    """Full and nested fits of one ordered pair at order ``p``.

    With ``both=False`` only the X equation and its nested DAR are fitted
    (no ``"y"``, ``"dar_y"`` or ``"bic"`` entries).
    """
    xv, yv = as_binary(x), as_binary(y)
    starts = _bivariate_starts(xv, yv, p)
    dx = _fit_dar_target(xv, p)
    out = {"x": _fit_bivariate_eq(xv, yv, p, starts[0], nested=None if dx is None else dx[0]),
           "dar_x": dx}
    if both:
        dy = _fit_dar_target(yv, p)
        out["y"] = _fit_bivariate_eq(yv, xv, p, starts[1], nested=None if dy is None else dy[0])
        out["dar_y"] = dy
        out["bic"] = bic_value(out["x"][1] + out["y"][1], p, xv.shape[0])
    return out


def select_order_bic(x, y, p_max: int) -> int:
    """Order with the lowest joint BIC; ties go to the smaller order."""
    path = bic_path(x, y, p_max)
    return min(path, key=lambda p: (path[p]["bic"], p))
