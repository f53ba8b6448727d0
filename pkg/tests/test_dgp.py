import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from oracles import copula_hit_corr, lag1_cross_corr_exact, vdar1_states, vdar1_transition
from tailgc.core import lagged_cross_correlation, sample_mean
from tailgc.dgp import (BiVdarParams, DarParams, GarchScenario, Vdar1Params, simulate_dar,
                        simulate_garch, simulate_vdar1, simulate_vdar_bivariate, star_coupling,
                        star_edges)


def mean_tol(chi, T, inflation=20):
    """Three standard errors with an effective sample size of ``T / inflation``."""
    return 3.0 * math.sqrt(chi * (1.0 - chi) / (T / inflation))


class TestParams:
    def test_gamma_must_be_simplex(self):
        with pytest.raises(ValueError, match="invalid parameters"):
            DarParams(0.5, [0.5, 0.4], 0.1)

    def test_probabilities_in_unit_interval(self):
        with pytest.raises(ValueError, match="invalid parameters"):
            DarParams(1.2, [1.0], 0.1)

    def test_vdar1_rows_must_be_stochastic(self):
        with pytest.raises(ValueError, match="invalid parameters"):
            Vdar1Params([0.5, 0.5], [[0.5, 0.4], [0, 1]], [0.1, 0.1])

    def test_bivariate_restricted(self):
        p = BiVdarParams.symmetric([0.3, 0.6], [0.2, 0.0], [0.1, 0.2], p=2)
        r = p.restricted(1)
        assert r.nu == 0.6 and r.chi == 0.2 and r.p == 2


class TestSimulateDar:
    def test_iid_when_nu_zero(self):
        x = simulate_dar(DarParams(0.0, [1.0], 0.5), 100_000, seed=1)
        assert abs(sample_mean(x) - 0.5) <= 3 * math.sqrt(0.25 / 100_000)

    def test_pure_copy_freezes(self):
        x = simulate_dar(DarParams(1.0, [1.0], 0.3), 500, seed=2, initial=[1])
        assert np.all(x.values == 1)

    def test_stationary_mean_is_chi(self):
        x = simulate_dar(DarParams(0.5, [1.0], 0.05), 100_000, seed=3)
        # the DAR(1) autocorrelation is nu, so the variance inflation is (1+nu)/(1-nu) = 3
        assert abs(sample_mean(x) - 0.05) <= 3 * math.sqrt(0.05 * 0.95 * 3 / 100_000)

    def test_insufficient_length(self):
        with pytest.raises(ValueError, match="insufficient length"):
            simulate_dar(DarParams(0.5, [0.5, 0.5], 0.1), 2, seed=0)

    def test_reproducible(self):
        p = DarParams(0.4, [0.3, 0.7], 0.2)
        a = simulate_dar(p, 1000, seed=11)
        b = simulate_dar(p, 1000, seed=11)
        assert a.values.tobytes() == b.values.tobytes()

    @settings(max_examples=15)
    @given(nu=st.floats(0, 0.9), chi=st.floats(0.05, 0.95), p=st.integers(1, 3),
           seed=st.integers(0, 2**31))
    def test_mean_converges_to_chi(self, nu, chi, p, seed):
        x = simulate_dar(DarParams(nu, np.full(p, 1 / p), chi), 20_000, seed)
        assert abs(sample_mean(x) - chi) <= mean_tol(chi, 20_000)


class TestSimulateBivariate:
    def test_decoupled_equations_match_dar_means(self):
        params = BiVdarParams.symmetric([0.5, 0.3], 0.0, [0.05, 0.2])
        x, y = simulate_vdar_bivariate(params, 100_000, seed=5)
        for s, i in ((x, 0), (y, 1)):
            d = simulate_dar(params.restricted(i), 100_000, seed=6 + i)
            tol = mean_tol(params.chi[i], 100_000)
            assert abs(sample_mean(s) - params.chi[i]) <= tol
            assert abs(sample_mean(s) - sample_mean(d)) <= 2 * tol

    def test_coupled_means_are_chi(self):
        params = BiVdarParams.symmetric(0.6, [0.5, 0.25], 0.05)
        x, y = simulate_vdar_bivariate(params, 100_000, seed=7)
        assert abs(sample_mean(x) - 0.05) <= mean_tol(0.05, 100_000)
        assert abs(sample_mean(y) - 0.05) <= mean_tol(0.05, 100_000)

    def test_copula_contemporaneous_correlation(self):
        T = 100_000
        params = BiVdarParams.symmetric(0.0, 0.0, 0.05)
        x, y = simulate_vdar_bivariate(params, T, seed=8, copula_rho=0.75)
        got = lagged_cross_correlation(x, y, 0)
        expected = copula_hit_corr(0.05, 0.75)
        assert got > 0
        # i.i.d. pairs: the correlation estimator has s.e. close to 1/sqrt(T)
        assert abs(got - expected) <= 3 / math.sqrt(T) * 1.5

    def test_copula_rho_out_of_range(self):
        with pytest.raises(ValueError, match="copula correlation out of range"):
            simulate_vdar_bivariate(BiVdarParams.symmetric(0.5, 0.0, 0.1), 10, 0, copula_rho=1.0)

    def test_labels_and_reproducibility(self):
        params = BiVdarParams.symmetric(0.5, 0.5, 0.1, p=2)
        x1, y1 = simulate_vdar_bivariate(params, 500, seed=9, copula_rho=0.3)
        x2, y2 = simulate_vdar_bivariate(params, 500, seed=9, copula_rho=0.3)
        assert (x1.label, y1.label) == ("X", "Y")
        assert x1.values.tobytes() == x2.values.tobytes()
        assert y1.values.tobytes() == y2.values.tobytes()


def transition_counts(values):
    T, N = values.shape
    codes = values @ (1 << np.arange(N - 1, -1, -1))
    counts = np.zeros((2**N, 2**N))
    np.add.at(counts, (codes[:-1], codes[1:]), 1)
    return counts


class TestSimulateVdar1:
    def test_independent_when_nu_zero(self):
        params = Vdar1Params([0, 0, 0], np.eye(3), [0.1, 0.3, 0.5])
        panel = simulate_vdar1(params, 50_000, seed=12)
        for i, chi in enumerate(params.chi):
            assert abs(panel.values[:, i].mean() - chi) <= 3 * math.sqrt(chi * (1 - chi) / 50_000)

    def test_identity_coupling_behaves_as_dar(self):
        params = Vdar1Params([0.5, 0.5], np.eye(2), [0.05, 0.2])
        panel = simulate_vdar1(params, 100_000, seed=13)
        for i in range(2):
            assert abs(panel.values[:, i].mean() - params.chi[i]) <= mean_tol(params.chi[i], 100_000)
        # no cross-coupling: lag-1 cross-correlation near zero
        assert abs(lagged_cross_correlation(panel[0], panel[1], 1)) < 0.02

    def test_star_cross_correlations_match_markov_chain(self):
        T = 10_000
        params = star_coupling(4, "out", nu=0.5, chi=0.1)
        panel = simulate_vdar1(params, T, seed=14)
        for leaf in range(1, 4):
            assert lagged_cross_correlation(panel[leaf], panel[0], 1) > 0.1
        tol = 3 / math.sqrt(T / 3)
        for a, b in ((1, 2), (2, 3), (3, 1)):
            exact = lag1_cross_corr_exact(params.nu, params.lam, params.chi, a, b)
            got = lagged_cross_correlation(panel[a], panel[b], 1)
            assert abs(got - exact) <= tol

    def test_invalid_params(self):
        with pytest.raises(ValueError, match="invalid parameters"):
            simulate_vdar1({"nu": [0.5]}, 10, 0)

    def test_reproducible(self):
        params = star_coupling(5, "mixed", seed=3)
        a = simulate_vdar1(params, 300, seed=15)
        b = simulate_vdar1(params, 300, seed=15)
        assert a.values.tobytes() == b.values.tobytes()

    @settings(max_examples=10)
    @given(st.data())
    def test_transitions_match_exact_chain(self, data):
        N = data.draw(st.integers(2, 3))
        nu = data.draw(st.lists(st.floats(0.05, 0.95), min_size=N, max_size=N))
        chi = data.draw(st.lists(st.floats(0.1, 0.9), min_size=N, max_size=N))
        raw = np.array(data.draw(st.lists(st.floats(0.01, 1.0), min_size=N * N, max_size=N * N)))
        lam = raw.reshape(N, N)
        lam = lam / lam.sum(axis=1, keepdims=True)
        lam[:, -1] = 1.0 - lam[:, :-1].sum(axis=1)
        params = Vdar1Params(nu, lam, chi)
        seed = data.draw(st.integers(0, 2**31))
        panel = simulate_vdar1(params, 40_000, seed)
        states, P = vdar1_transition(params.nu, params.lam, params.chi)
        assert states == vdar1_states(N)
        counts = transition_counts(panel.values.astype(np.int64))
        chi2, dof = 0.0, 0
        for a in range(len(states)):
            n = counts[a].sum()
            if n < 50:
                continue
            expected = n * P[a]
            chi2 += float(np.sum((counts[a] - expected) ** 2 / expected))
            dof += len(states) - 1
        assert dof > 0
        assert stats.chi2.sf(chi2, dof) > 1e-4


class TestStarCoupling:
    def test_out_star_n4(self):
        params = star_coupling(4, "out")
        expected = np.array([[1, 0, 0, 0], [0.5, 0.5, 0, 0], [0.5, 0, 0.5, 0], [0.5, 0, 0, 0.5]])
        np.testing.assert_array_equal(params.lam, expected)
        np.testing.assert_allclose(params.lam.sum(axis=1), 1.0)

    @pytest.mark.parametrize("N", [3, 6, 10, 40])
    def test_out_star_support(self, N):
        lam = star_coupling(N, "out").lam
        off = lam.copy()
        np.fill_diagonal(off, 0)
        rows, cols = np.nonzero(off)
        assert len(rows) == N - 1
        assert set(cols) == {0}

    def test_mixed_hand_example(self):
        lam = star_coupling(5, "mixed", u=[1, 1, 0, 0]).lam
        third = 1 / 3
        np.testing.assert_allclose(lam[0], [third, third, third, 0, 0])
        np.testing.assert_allclose(lam[1], [0, 1, 0, 0, 0])
        np.testing.assert_allclose(lam[2], [0, 0, 1, 0, 0])
        np.testing.assert_allclose(lam[3], [0.5, 0, 0, 0.5, 0])
        np.testing.assert_allclose(lam[4], [0.5, 0, 0, 0, 0.5])

    def test_mixed_seed_reproducible(self):
        a = star_coupling(8, "mixed", seed=42).lam
        b = star_coupling(8, "mixed", seed=42).lam
        np.testing.assert_array_equal(a, b)

    def test_degenerate(self):
        with pytest.raises(ValueError, match="degenerate star"):
            star_coupling(2)

    def test_star_edges(self):
        edges = star_edges(star_coupling(5, "mixed", u=[1, 0, 1, 0]))
        assert edges == {(1, 0), (3, 0), (0, 2), (0, 4)}


class TestGarch:
    def test_scenarios(self):
        assert (GarchScenario.from_tag("null").b, GarchScenario.from_tag("null").c) == (0, 0)
        assert GarchScenario.from_tag("ALTER1").b == 2.0
        assert GarchScenario.from_tag("ALTER2").c == 0.7
        with pytest.raises(ValueError):
            GarchScenario.from_tag("ALTER3")

    def test_null_variance(self):
        _, x2 = simulate_garch("NULL", 100_000, seed=21)
        v = x2.values
        u2 = v[1:] - 0.5 * v[:-1]
        # innovation variance 0.1 / (1 - 0.6 - 0.2); x2 adds the AR(1) factor 1 / (1 - 0.25)
        assert abs(u2.var() / 0.5 - 1) < 0.05
        assert abs(v.var() / (0.5 / 0.75) - 1) < 0.05

    def test_null_zero_mean(self):
        x1, x2 = simulate_garch("NULL", 100_000, seed=22)
        for s in (x1, x2):
            v = s.values
            # AR(1) with coefficient 0.5 doubles the long-run standard deviation
            assert abs(v.mean()) <= 3 * 2 * v.std() / math.sqrt(v.size)

    def test_alter1_mean_spillover(self):
        x1, x2 = simulate_garch("ALTER1", 20_000, seed=23)
        a, b = x1.values[1:], x2.values[:-1]
        assert np.corrcoef(a, b)[0, 1] > 0.5

    def test_reproducible(self):
        a = simulate_garch("ALTER2", 500, seed=24)
        b = simulate_garch("ALTER2", 500, seed=24)
        assert a[0].values.tobytes() == b[0].values.tobytes()
