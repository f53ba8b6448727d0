import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import central_diff, dar_columns, em_mixture_loglik, loglik_bivariate_loop, loglik_dar_loop, loglik_vdar1_loop
from tailgc.core import BinaryPanel
from tailgc.dgp import (BiVdarParams, DarParams, Vdar1Params, simulate_dar, simulate_vdar1,
                        simulate_vdar_bivariate)
from tailgc.estimation import (DegenerateLikelihoodWarning, DegenerateSeriesWarning,
                               EstimationError, YuleWalkerDomainWarning, bic_value, loglik_dar,
                               loglik_vdar1, loglik_vdar_bivariate, mle_dar, mle_vdar1,
                               mle_vdar_bivariate, select_order_bic, vdar1_from_var,
                               yule_walker_bivariate, yule_walker_dar, yule_walker_vdar1)

binary = st.lists(st.integers(0, 1), min_size=4, max_size=30)
interior = st.floats(0.05, 0.95)


def simplex(rng, n):
    g = rng.dirichlet(np.ones(n)) + 0.05
    return g / g.sum()


def rel_err(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-12))


class TestLoglikDar:
    def test_hand_example(self):
        ll = loglik_dar([1, 0, 1], DarParams(0.5, [1.0], 0.5))
        assert ll == pytest.approx(2 * math.log(0.25), abs=1e-12)
        assert ll == pytest.approx(-2.77259, abs=1e-5)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_iid_fair(self, p):
        x = [0, 1, 1, 0, 1, 0, 0, 1]
        assert loglik_dar(x, DarParams(0.0, np.full(p, 1 / p), 0.5)) == pytest.approx((8 - p) * math.log(0.5))

    def test_frozen_chain(self):
        assert loglik_dar([1] * 10, DarParams(1.0, [1.0], 0.3)) == 0.0

    def test_degenerate_flagged(self):
        with pytest.warns(DegenerateLikelihoodWarning, match="degenerate likelihood"):
            assert loglik_dar([0, 1], DarParams(1.0, [1.0], 0.5)) == -math.inf

    @given(x=binary, nu=interior, chi=interior, w=st.floats(0.05, 0.95))
    def test_matches_loop_oracle(self, x, nu, chi, w):
        gamma = np.array([w, 1 - w])
        expected = loglik_dar_loop(x, nu, gamma, chi)
        assert loglik_dar(x, DarParams(nu, gamma, chi)) == pytest.approx(expected, rel=1e-12, abs=1e-12)


class TestLoglikBivariate:
    def test_hand_example(self):
        params = BiVdarParams([0.5, 0.5], [1.0, 0.0], [0.5, 0.5], [[1.0], [1.0]], [[1.0], [1.0]])
        ll = loglik_vdar_bivariate([0, 1], [1, 0], params)
        assert ll == pytest.approx(math.log(0.75), abs=1e-12)

    def test_nested_reduction(self):
        rng = np.random.default_rng(0)
        x, y = rng.integers(0, 2, 50), rng.integers(0, 2, 50)
        params = BiVdarParams([0.4, 0.6], [0.0, 0.3], [0.2, 0.7], [[0.3, 0.7], [0.5, 0.5]],
                              [[0.6, 0.4], [0.2, 0.8]])
        assert loglik_vdar_bivariate(x, y, params) == loglik_dar(x, params.restricted(0))

    def test_no_copy_is_bernoulli(self):
        rng = np.random.default_rng(1)
        x, y = rng.integers(0, 2, 40), rng.integers(0, 2, 40)
        params = BiVdarParams.symmetric([0.0, 0.5], 0.7, 0.3, p=2)
        ones = int(x[2:].sum())
        expected = ones * math.log(0.3) + (38 - ones) * math.log(0.7)
        assert loglik_vdar_bivariate(x, y, params) == pytest.approx(expected)

    def test_second_equation(self):
        rng = np.random.default_rng(2)
        x, y = rng.integers(0, 2, 40), rng.integers(0, 2, 40)
        params = BiVdarParams([0.2, 0.6], [0.1, 0.4], [0.3, 0.4], [[1.0], [1.0]], [[1.0], [1.0]])
        expected = loglik_bivariate_loop(y, x, 0.6, 0.4, 0.4, [1.0], [1.0])
        assert loglik_vdar_bivariate(y, x, params, equation=1) == pytest.approx(expected)

    @given(st.data())
    def test_matches_loop_oracle(self, data):
        x = data.draw(binary)
        y = data.draw(st.lists(st.integers(0, 1), min_size=len(x), max_size=len(x)))
        nu, lam, chi = data.draw(interior), data.draw(st.floats(0, 1)), data.draw(interior)
        a, b = data.draw(interior), data.draw(interior)
        params = BiVdarParams.symmetric(nu, lam, chi, p=2)
        params = BiVdarParams(params.nu, params.lam, params.chi, [[a, 1 - a]] * 2, [[b, 1 - b]] * 2)
        expected = loglik_bivariate_loop(x, y, nu, lam, chi, [a, 1 - a], [b, 1 - b])
        assert loglik_vdar_bivariate(x, y, params) == pytest.approx(expected, rel=1e-12, abs=1e-12)


class TestLoglikVdar1:
    def test_hand_case(self):
        panel = BinaryPanel(np.array([[1, 0], [1, 1], [0, 1]]))
        params = Vdar1Params([0.5, 0.5], [[0.5, 0.5], [0.0, 1.0]], [0.2, 0.3])
        # t=2: X1=1 from (1,0): 0.5*0.5 + 0.5*0.2 = 0.35; X2=1: 0 + 0.5*0.3 = 0.15
        # t=3: X1=0 from (1,1): 0 + 0.5*0.8 = 0.4;        X2=1: 0.5 + 0.15 = 0.65
        expected = math.log(0.35 * 0.15 * 0.4 * 0.65)
        assert loglik_vdar1(panel, params) == pytest.approx(expected, abs=1e-12)

    def test_no_copy_is_bernoulli(self):
        rng = np.random.default_rng(3)
        values = rng.integers(0, 2, (30, 3))
        params = Vdar1Params([0, 0, 0], np.full((3, 3), 1 / 3), [0.2, 0.5, 0.7])
        expected = sum(
            values[1:, i].sum() * math.log(params.chi[i])
            + (29 - values[1:, i].sum()) * math.log(1 - params.chi[i]) for i in range(3))
        assert loglik_vdar1(BinaryPanel(values), params) == pytest.approx(expected)

    def test_single_component_is_dar1(self):
        x = np.array([0, 1, 1, 0, 1, 1, 1, 0])
        ll = loglik_vdar1(BinaryPanel(x[:, None]), Vdar1Params([0.4], [[1.0]], [0.6]))
        assert ll == pytest.approx(loglik_dar(x, DarParams(0.4, [1.0], 0.6)))

    @settings(max_examples=50)
    @given(st.data())
    def test_matches_loop_oracle(self, data):
        N = data.draw(st.integers(1, 4))
        T = data.draw(st.integers(2, 25))
        values = np.array(data.draw(st.lists(st.integers(0, 1), min_size=T * N, max_size=T * N))).reshape(T, N)
        rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
        nu, chi = rng.uniform(0.05, 0.95, N), rng.uniform(0.05, 0.95, N)
        lam = np.array([simplex(rng, N) for _ in range(N)])
        lam[:, -1] = 1 - lam[:, :-1].sum(axis=1)
        expected = loglik_vdar1_loop(values, nu, lam, chi)
        assert loglik_vdar1(BinaryPanel(values), Vdar1Params(nu, lam, chi)) == pytest.approx(expected, rel=1e-12)


class TestGradients:
    """Analytic gradients against central differences of the loop oracles."""

    def test_dar(self):
        rng = np.random.default_rng(10)
        worst = 0.0
        for _ in range(100):
            p = int(rng.integers(1, 4))
            x = simulate_dar(DarParams(0.5, np.full(p, 1 / p), 0.3), 150, int(rng.integers(1 << 30))).values
            nu, chi, gamma = rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), simplex(rng, p)
            _, g = loglik_dar(x, DarParams(nu, gamma, chi), return_grad=True)
            analytic = np.concatenate([[g["nu"]], g["gamma"], [g["chi"]]])
            f = lambda v: loglik_dar_loop(x, v[0], v[1:p + 1], v[p + 1])
            numeric = central_diff(f, np.concatenate([[nu], gamma, [chi]]))
            worst = max(worst, rel_err(analytic, numeric))
        assert worst <= 1e-5

    def test_bivariate(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(100):
            p = int(rng.integers(1, 3))
            x, y = simulate_vdar_bivariate(BiVdarParams.symmetric(0.5, 0.3, 0.3, p=p), 150,
                                           int(rng.integers(1 << 30)))
            x, y = x.values, y.values
            nu, lam, chi = rng.uniform(0.05, 0.95, 3)
            gs, gc = simplex(rng, p), simplex(rng, p)
            params = BiVdarParams([nu, 0.5], [lam, 0.5], [chi, 0.5], [gs, gs], [gc, gc])
            _, g = loglik_vdar_bivariate(x, y, params, return_grad=True)
            analytic = np.concatenate([[g["nu"], g["lam"], g["chi"]], g["gamma_self"], g["gamma_cross"]])
            f = lambda v: loglik_bivariate_loop(x, y, v[0], v[1], v[2], v[3:3 + p], v[3 + p:])
            numeric = central_diff(f, np.concatenate([[nu, lam, chi], gs, gc]))
            worst = max(worst, rel_err(analytic, numeric))
        assert worst <= 1e-5

    def test_vdar1(self):
        rng = np.random.default_rng(12)
        worst = 0.0
        for _ in range(100):
            N = int(rng.integers(2, 4))
            values = rng.integers(0, 2, (60, N))
            nu, chi = rng.uniform(0.05, 0.95, N), rng.uniform(0.05, 0.95, N)
            lam = np.array([simplex(rng, N) for _ in range(N)])
            lam[:, -1] = 1 - lam[:, :-1].sum(axis=1)
            _, g = loglik_vdar1(BinaryPanel(values), Vdar1Params(nu, lam, chi), return_grad=True)
            analytic = np.concatenate([g["nu"], g["lam"].ravel(), g["chi"]])

            def f(v):
                return loglik_vdar1_loop(values, v[:N], v[N:N + N * N].reshape(N, N), v[N + N * N:])

            numeric = central_diff(f, np.concatenate([nu, lam.ravel(), chi]))
            worst = max(worst, rel_err(analytic, numeric))
        assert worst <= 1e-5


class TestYuleWalker:
    def test_vdar1_mapping_hand_example(self):
        params = vdar1_from_var([0.025, 0.025], [[0.4, 0.1], [0.0, 0.5]])
        np.testing.assert_allclose(params.nu, [0.5, 0.5])
        np.testing.assert_allclose(params.lam, [[0.8, 0.2], [0.0, 1.0]])
        np.testing.assert_allclose(params.chi, [0.05, 0.05])

    def test_vdar1_mapping_clips_and_flags_zero_row(self):
        with pytest.warns(YuleWalkerDomainWarning):
            params = vdar1_from_var([0.1, 0.05], [[0.4, -0.1], [-0.2, -0.1]])
        np.testing.assert_allclose(params.lam, [[1.0, 0.0], [0.5, 0.5]])
        assert params.nu[1] == 0.0

    def test_bivariate_consistency(self):
        truth = BiVdarParams([0.5, 0.5], [0.25, 0.0], [0.05, 0.05], [[1.0], [1.0]], [[1.0], [1.0]])
        x, y = simulate_vdar_bivariate(truth, 100_000, seed=31)
        est = yule_walker_bivariate(x, y, 1)
        for name in ("nu", "lam", "chi"):
            np.testing.assert_allclose(getattr(est, name), getattr(truth, name), atol=0.03)

    def test_bivariate_zero_coupling(self):
        truth = BiVdarParams.symmetric(0.5, 0.0, 0.05)
        x, y = simulate_vdar_bivariate(truth, 100_000, seed=32)
        est = yule_walker_bivariate(x, y, 1)
        assert np.all(np.abs(est.lam) <= 0.03)

    def test_periodic_input_is_singular_or_flagged(self):
        x = [0, 1] * 50
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                yule_walker_bivariate(x, x, 1)
            except EstimationError as exc:
                assert "singular" in str(exc)
                return
        assert any(issubclass(w.category, YuleWalkerDomainWarning) for w in caught)

    def test_constant_series_singular(self):
        with pytest.raises(EstimationError, match="singular"):
            yule_walker_dar([1] * 20, 1)

    def test_vdar1_consistency(self):
        truth = Vdar1Params([0.5, 0.6, 0.4], [[0.6, 0.4, 0.0], [0.0, 0.7, 0.3], [0.2, 0.0, 0.8]],
                            [0.1, 0.2, 0.15])
        est = yule_walker_vdar1(simulate_vdar1(truth, 100_000, seed=33))
        for name in ("nu", "lam", "chi"):
            np.testing.assert_allclose(getattr(est, name), getattr(truth, name), atol=0.03)

    def test_vdar1_diagonal_truth(self):
        truth = Vdar1Params([0.5, 0.5, 0.5], np.eye(3), [0.1, 0.1, 0.1])
        est = yule_walker_vdar1(simulate_vdar1(truth, 100_000, seed=34))
        off = est.lam[~np.eye(3, dtype=bool)]
        assert np.all(off <= 0.03)


class TestMleDar:
    def test_consistency(self):
        x = simulate_dar(DarParams(0.5, [1.0], 0.05), 10_000, seed=41)
        fit = mle_dar(x, 1)
        assert fit.converged
        assert abs(fit.params.nu - 0.5) <= 0.05
        assert abs(fit.params.chi - 0.05) <= 0.05
        assert fit.loglik <= 0

    @pytest.mark.parametrize("seed", range(5))
    def test_not_below_warm_start(self, seed):
        x = simulate_dar(DarParams(0.3, [0.6, 0.4], 0.2), 2000, seed=seed)
        fit = mle_dar(x, 2)
        assert fit.loglik >= loglik_dar(x, yule_walker_dar(x, 2)) - 1e-9
        assert fit.loglik == pytest.approx(loglik_dar(x, fit.params), abs=1e-8)

    def test_grid_search_oracle(self):
        x = np.array([1, 1, 0, 0, 1, 0])
        nu = np.arange(0, 1.0005, 0.001)[:, None]
        chi = np.arange(0, 1.0005, 0.001)[None, :]
        with np.errstate(divide="ignore"):
            grid = np.zeros((nu.size, chi.size))
            for t in range(1, 6):
                b = chi if x[t] else 1 - chi
                grid += np.log(nu * (x[t] == x[t - 1]) + (1 - nu) * b)
        fit = mle_dar(x, 1)
        assert fit.loglik == pytest.approx(grid.max(), abs=1e-6)

    @settings(max_examples=20)
    @given(seed=st.integers(0, 2**31), p=st.integers(1, 3), nu=st.floats(0, 0.95),
           chi=st.floats(0.05, 0.5))
    def test_global_optimum_matches_em(self, seed, p, nu, chi):
        x = simulate_dar(DarParams(nu, np.full(p, 1 / p), chi), 300, seed)
        if x.values[p:].min() == x.values[p:].max():
            return
        assert mle_dar(x, p).loglik == pytest.approx(em_mixture_loglik(dar_columns(x.values, p)), abs=1e-6)

    def test_degenerate_series(self):
        with pytest.warns(DegenerateSeriesWarning):
            fit = mle_dar([0] * 50, 1)
        assert not fit.converged
        assert fit.params.nu == 0.0 and fit.params.chi == 0.0

    def test_too_short(self):
        with pytest.raises(ValueError):
            mle_dar([0, 1], 1)


class TestMleBivariate:
    def test_consistency(self):
        truth = BiVdarParams.symmetric(0.5, [0.5, 0.0], 0.05)
        x, y = simulate_vdar_bivariate(truth, 10_000, seed=51)
        fit = mle_vdar_bivariate(x, y, 1)
        assert abs(fit.params.lam[0] - 0.5) <= 0.07
        assert fit.loglik == pytest.approx(sum(fit.loglik_eq))

    @settings(max_examples=30)
    @given(seed=st.integers(0, 2**31), p=st.integers(1, 2), lam=st.floats(0, 0.6))
    def test_nesting(self, seed, p, lam):
        truth = BiVdarParams.symmetric(0.5, [lam, 0.0], 0.1, p=p)
        x, y = simulate_vdar_bivariate(truth, 800, seed)
        full = mle_vdar_bivariate(x, y, p)
        assert full.loglik_eq[0] >= mle_dar(x, p).loglik - 1e-9
        assert full.loglik_eq[1] >= mle_dar(y, p).loglik - 1e-9

    @pytest.mark.slow
    def test_null_coupling_estimates_small(self):
        truth = BiVdarParams.symmetric(0.5, 0.0, 0.05)
        small = 0
        for seed in range(100):
            x, y = simulate_vdar_bivariate(truth, 10_000, seed=1000 + seed)
            small += mle_vdar_bivariate(x, y, 1).params.lam[0] <= 0.05
        assert small >= 90


class TestMleVdar1:
    truth = Vdar1Params([0.5, 0.6, 0.4], [[0.6, 0.4, 0.0], [0.0, 0.7, 0.3], [0.2, 0.0, 0.8]],
                        [0.1, 0.2, 0.15])

    def test_consistency(self):
        fit = mle_vdar1(simulate_vdar1(self.truth, 100_000, seed=61))
        err = max(np.max(np.abs(getattr(fit.params, n) - getattr(self.truth, n)))
                  for n in ("nu", "lam", "chi"))
        assert err <= 0.05

    def test_not_below_warm_start(self):
        panel = simulate_vdar1(self.truth, 5000, seed=62)
        fit = mle_vdar1(panel)
        assert fit.loglik >= loglik_vdar1(panel, yule_walker_vdar1(panel)) - 1e-9
        assert fit.loglik == pytest.approx(loglik_vdar1(panel, fit.params), abs=1e-7)

    def test_rows_match_em(self):
        panel = simulate_vdar1(self.truth, 2000, seed=64)
        fit = mle_vdar1(panel)
        V = panel.values.astype(float)
        for i in range(3):
            cols = np.column_stack([V[1:, i:i + 1] == V[:-1], V[1:, i] == 1, V[1:, i] == 0]).astype(float)
            assert fit.loglik_eq[i] == pytest.approx(em_mixture_loglik(cols), abs=1e-6)

    def test_permutation_equivariance(self):
        panel = simulate_vdar1(self.truth, 5000, seed=63)
        perm = [2, 0, 1]
        a = mle_vdar1(panel).params
        b = mle_vdar1(BinaryPanel(panel.values[:, perm])).params
        np.testing.assert_allclose(b.lam, a.lam[np.ix_(perm, perm)], atol=1e-5)
        np.testing.assert_allclose(b.nu, a.nu[perm], atol=1e-5)
        np.testing.assert_allclose(b.chi, a.chi[perm], atol=1e-5)


class TestBic:
    def test_formula(self):
        assert bic_value(-100.0, 2, 1000) == pytest.approx(2 * 5 * math.log(1000) + 200)

    def test_single_candidate(self):
        x, y = simulate_vdar_bivariate(BiVdarParams.symmetric(0.5, 0.2, 0.2), 500, seed=71)
        assert select_order_bic(x, y, 1) == 1

    def test_selects_order_one(self):
        truth = BiVdarParams.symmetric(0.5, [0.5, 0.0], 0.05)
        hits = sum(select_order_bic(*simulate_vdar_bivariate(truth, 10_000, seed=s), 3) == 1
                   for s in range(20))
        assert hits >= 18

    def test_selects_order_two(self):
        truth = BiVdarParams.symmetric(0.5, [0.5, 0.0], 0.05, p=2, gamma=[0.5, 0.5])
        hits = sum(select_order_bic(*simulate_vdar_bivariate(truth, 10_000, seed=s), 3) == 2
                   for s in range(20))
        assert hits > 10
