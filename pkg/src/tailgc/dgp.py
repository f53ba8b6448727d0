"""Data-generating processes for binary extreme-event series.

Every simulator draws from ``numpy.random.default_rng(seed)`` (PCG64), so a
given ``(params, T, seed)`` triple always yields the same output.
Binary models start from i.i.d. Bernoulli(chi) initial states with no
burn-in; the GARCH benchmark discards a 1000-step burn-in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import BinaryPanel, BinarySeries, RealSeries

SIMPLEX_TOL = 1e-12
GARCH_BURN_IN = 1000


def _check_prob(name, value):
    arr = np.asarray(value, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"invalid parameters: {name} must lie in [0, 1]")
    return arr


def _check_simplex(name, value):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 0 or np.any(arr < 0.0) or abs(arr.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"invalid parameters: {name} must be a simplex")
    return arr


def _freeze(arr):
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DarParams:
    """DAR(p): copy probability ``nu``, lag weights ``gamma``, marginal ``chi``."""

    nu: float
    gamma: np.ndarray
    chi: float

    def __post_init__(self):
        _check_prob("nu", self.nu)
        _check_prob("chi", self.chi)
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "chi", float(self.chi))
        object.__setattr__(self, "gamma", _freeze(_check_simplex("gamma", self.gamma)))

    @property
    def p(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True)
class BiVdarParams:
    """Bivariate VDAR(p).

    Row ``i`` of every field describes equation ``i`` (0 for X, 1 for Y).
    ``lam[i]`` is the probability of copying from the *other* series,
    ``gamma_self[i]`` the lag weights for own copies and ``gamma_cross[i]``
    the lag weights for cross copies.
    """

    nu: np.ndarray
    lam: np.ndarray
    chi: np.ndarray
    gamma_self: np.ndarray
    gamma_cross: np.ndarray

    def __post_init__(self):
        for name in ("nu", "lam", "chi"):
            arr = _check_prob(name, getattr(self, name))
            if arr.shape != (2,):
                raise ValueError(f"invalid parameters: {name} must have two entries")
            object.__setattr__(self, name, _freeze(arr))
        for name in ("gamma_self", "gamma_cross"):
            arr = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if arr.shape[0] != 2:
                raise ValueError(f"invalid parameters: {name} must have two rows")
            for row in arr:
                _check_simplex(name, row)
            object.__setattr__(self, name, _freeze(arr))
        if self.gamma_self.shape != self.gamma_cross.shape:
            raise ValueError("invalid parameters: gamma shapes differ")

    @property
    def p(self) -> int:
        return self.gamma_self.shape[1]

    @classmethod
    def symmetric(cls, nu, lam, chi, p: int = 1, gamma=None) -> "BiVdarParams":
        """Build params from scalars or pairs; lag weights default to uniform."""
        g = np.full(p, 1.0 / p) if gamma is None else np.asarray(gamma, dtype=float)
        pair = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (2,))
        return cls(pair(nu), pair(lam), pair(chi), np.tile(g, (2, 1)), np.tile(g, (2, 1)))

    def restricted(self, i: int = 0) -> DarParams:
        """The DAR(p) obtained by switching off cross copies in equation ``i``."""
        return DarParams(self.nu[i], self.gamma_self[i], self.chi[i])


@dataclass(frozen=True)
class Vdar1Params:
    """Multivariate VDAR(1) with row-stochastic coupling matrix ``lam``."""

    nu: np.ndarray
    lam: np.ndarray
    chi: np.ndarray

    def __post_init__(self):
        nu = _check_prob("nu", np.atleast_1d(self.nu))
        chi = _check_prob("chi", np.atleast_1d(self.chi))
        lam = np.atleast_2d(np.asarray(self.lam, dtype=float))
        N = nu.shape[0]
        if chi.shape != (N,) or lam.shape != (N, N):
            raise ValueError("invalid parameters: inconsistent dimensions")
        if np.any(lam < 0.0) or np.any(np.abs(lam.sum(axis=1) - 1.0) > SIMPLEX_TOL):
            raise ValueError("invalid parameters: lam must be row-stochastic")
        object.__setattr__(self, "nu", _freeze(nu))
        object.__setattr__(self, "chi", _freeze(chi))
        object.__setattr__(self, "lam", _freeze(lam))

    @property
    def N(self) -> int:
        return self.nu.shape[0]

    def permuted(self, perm) -> "Vdar1Params":
        perm = np.asarray(perm)
        return Vdar1Params(self.nu[perm], self.lam[np.ix_(perm, perm)], self.chi[perm])



def simulate_dar(params: DarParams, T: int, seed: int, initial=None) -> BinarySeries:
    """Simulate a DAR(p) path of length ``T``.

    ``initial`` optionally fixes the first ``p`` states; otherwise they are
    i.i.d. Bernoulli(chi).
    """
    p = params.p
    if T < p + 1:
        raise ValueError("insufficient length")
    rng = np.random.default_rng(seed)
    x = np.empty(T, dtype=np.int8)
    if initial is None:
        x[:p] = rng.random(p) < params.chi
    else:
        x[:p] = np.asarray(initial, dtype=np.int8)
    copy = rng.random(T) < params.nu
    lag = rng.choice(p, size=T, p=params.gamma) + 1
    fresh = rng.random(T) < params.chi
    for t in range(p, T):
        x[t] = x[t - lag[t]] if copy[t] else fresh[t]
    return BinarySeries(x)


def copula_hits(rng, n: int, chi, rho: float | None) -> np.ndarray:
    """Draw ``n`` pairs of Bernoulli(chi) innovations, optionally coupled by a
    Gaussian copula with correlation ``rho``."""
    chi = np.asarray(chi, dtype=float)
    if rho is None:
        return rng.random((n, 2)) < chi
    if not -1.0 < rho < 1.0:
        raise ValueError("copula correlation out of range")
    g = rng.standard_normal((n, 2))
    g[:, 1] = rho * g[:, 0] + np.sqrt(1.0 - rho * rho) * g[:, 1]
    return g < ndtri(chi)


def simulate_vdar_bivariate(params: BiVdarParams, T: int, seed: int,
                            copula_rho: float | None = None) -> tuple[BinarySeries, BinarySeries]:
    """Simulate the bivariate VDAR(p); returns ``(X, Y)``."""
    p = params.p
    if T < p + 1:
        raise ValueError("insufficient length")
    if copula_rho is not None and not -1.0 < copula_rho < 1.0:
        raise ValueError("copula correlation out of range")
    rng = np.random.default_rng(seed)
    z = np.empty((T, 2), dtype=np.int8)
    z[:p] = rng.random((p, 2)) < params.chi
    copy = rng.random((T, 2)) < params.nu
    cross = rng.random((T, 2)) < params.lam
    lag_self = np.column_stack([rng.choice(p, size=T, p=params.gamma_self[i]) + 1 for i in range(2)])
    lag_cross = np.column_stack([rng.choice(p, size=T, p=params.gamma_cross[i]) + 1 for i in range(2)])
    fresh = copula_hits(rng, T, params.chi, copula_rho)
    for t in range(p, T):
        for i in range(2):
            if not copy[t, i]:
                z[t, i] = fresh[t, i]
            elif cross[t, i]:
                z[t, i] = z[t - lag_cross[t, i], 1 - i]
            else:
                z[t, i] = z[t - lag_self[t, i], i]
    return BinarySeries(z[:, 0], "X"), BinarySeries(z[:, 1], "Y")


def simulate_vdar1(params: Vdar1Params, T: int, seed: int,
                   labels: tuple[str, ...] | None = None) -> BinaryPanel:
    """Simulate the N-variate Markov VDAR(1)."""
    if not isinstance(params, Vdar1Params):
        raise ValueError("invalid parameters")
    if T < 2:
        raise ValueError("insufficient length")
    N = params.N
    rng = np.random.default_rng(seed)
    x = np.empty((T, N), dtype=np.int8)
    x[0] = rng.random(N) < params.chi
    copy = rng.random((T, N)) < params.nu
    cum = np.cumsum(params.lam, axis=1)
    cum[:, -1] = 1.0
    u = rng.random((T, N))
    src = (u[:, :, None] >= cum[None, :, :]).sum(axis=2)
    src = np.minimum(src, N - 1)
    fresh = rng.random((T, N)) < params.chi
    for t in range(1, T):
        x[t] = np.where(copy[t], x[t - 1][src[t]], fresh[t])
    return BinaryPanel(x, labels or ())


def star_coupling(N: int, kind: str = "out", seed: int | None = None, *,
                  nu: float = 0.5, chi: float = 0.1, u=None) -> Vdar1Params:
    """Star-shaped VDAR(1) coupling with node 0 as the centre.

    ``out``: the centre copies only itself, every leaf copies the centre or
    itself with probability 1/2 each.

    ``mixed``: each leaf is assigned by a fair coin (drawn from ``seed``)
    either to the *causing* set (``u = 1``) or the *caused* set.  The centre
    copies itself and each causing leaf with probability ``1/(1 + sum(u))``;
    caused leaves copy the centre or themselves with probability 1/2; causing
    leaves copy only themselves.  ``u`` may be passed explicitly.
    """
    if N < 3:
        raise ValueError("degenerate star")
    lam = np.zeros((N, N))
    if kind == "out":
        lam[0, 0] = 1.0
        for i in range(1, N):
            lam[i, 0] = lam[i, i] = 0.5
    elif kind == "mixed":
        if u is None:
            u = np.random.default_rng(seed).integers(0, 2, size=N - 1)
        u = np.asarray(u, dtype=int)
        if u.shape != (N - 1,):
            raise ValueError("u must have one entry per leaf")
        w = 1.0 / (1.0 + u.sum())
        lam[0, 0] = w
        for k, causing in enumerate(u, start=1):
            if causing:
                lam[0, k] = w
                lam[k, k] = 1.0
            else:
                lam[k, 0] = lam[k, k] = 0.5
    else:
        raise ValueError(f"unknown star kind {kind!r}")
    return Vdar1Params(np.full(N, nu), lam, np.full(N, chi))


def star_edges(params: Vdar1Params) -> set[tuple[int, int]]:
    """Directed causal edges ``(source, target)`` implied by off-diagonal couplings."""
    lam = params.lam
    return {(j, i) for i in range(params.N) for j in range(params.N)
            if i != j and lam[i, j] > 0 and params.nu[i] > 0}


# -- GARCH benchmark ---------------------------------------------------------

_GARCH_BC = {"NULL": (0.0, 0.0), "ALTER1": (2.0, 0.0), "ALTER2": (0.0, 0.7)}


@dataclass(frozen=True)
class GarchScenario:
    """Bivariate AR(1)-GARCH(1,1) with spillovers.

    ``beta[i] = (beta_i1, beta_i2)`` and
    ``gamma[i] = (gamma_i0, gamma_i1, gamma_i2, gamma_i3)``.
    """

    tag: str
    beta: np.ndarray
    gamma: np.ndarray

    @classmethod
    def from_tag(cls, tag: str) -> "GarchScenario":
        tag = tag.upper()
        if tag not in _GARCH_BC:
            raise ValueError(f"unknown GARCH scenario {tag!r}")
        b, c = _GARCH_BC[tag]
        beta = np.array([[0.5, b], [0.0, 0.5]])
        gamma = np.array([[0.1, 0.6, 0.2, c], [0.1, 0.6, 0.0, 0.2]])
        return cls(tag, _freeze(beta), _freeze(gamma))

    @property
    def b(self) -> float:
        return float(self.beta[0, 1])

    @property
    def c(self) -> float:
        return float(self.gamma[0, 3])


def simulate_garch(scenario: GarchScenario | str, T: int, seed: int) -> tuple[RealSeries, RealSeries]:
    """Simulate ``(x1, x2)`` from the spillover GARCH model."""
    if isinstance(scenario, str):
        scenario = GarchScenario.from_tag(scenario)
    if T < 2:
        raise ValueError("insufficient length")
    rng = np.random.default_rng(seed)
    n = T + GARCH_BURN_IN
    eps = rng.standard_normal((n, 2))
    (b11, b12), (b21, b22) = scenario.beta.tolist()
    (g10, g11, g12, g13), (g20, g21, g22, g23) = scenario.gamma.tolist()
    x = np.zeros((n, 2))
    s1 = s2 = 0.5
    u1 = u2 = 0.0
    x1 = x2 = 0.0
    for t in range(n):
        s1, s2 = (g10 + g11 * s1 + g12 * u1 * u1 + g13 * u2 * u2,
                  g20 + g21 * s2 + g22 * u1 * u1 + g23 * u2 * u2)
        u1 = np.sqrt(s1) * eps[t, 0]
        u2 = np.sqrt(s2) * eps[t, 1]
        x1, x2 = b11 * x1 + b12 * x2 + u1, b21 * x1 + b22 * x2 + u2
        x[t, 0], x[t, 1] = x1, x2
    x = x[GARCH_BURN_IN:]
    return RealSeries(x[:, 0], "x1"), RealSeries(x[:, 1], "x2")
