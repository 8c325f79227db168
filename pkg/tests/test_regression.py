import numpy as np
import pytest

from quadlab.lp_core import solve_lp
from quadlab.regression import (
    Dataset,
    NewsvendorSpec,
    Residuals,
    bmr_aux_lp_problem,
    fit_biased_mean,
    fit_ols,
    fit_quantile,
    fit_se,
    induced_alpha,
    kb_error,
    newsvendor_policy,
    newsvendor_price,
    residuals,
    se_lp_problem,
)

INTERCEPT_ONLY = Dataset(np.zeros((4, 0)), np.array([1.0, 2.0, 3.0, 4.0]))


def random_dataset(rng, max_n=120, max_d=5):
    n = int(rng.integers(5, max_n))
    d = int(rng.integers(0, max_d + 1))
    x = rng.standard_normal((n, d))
    y = (x @ rng.standard_normal(d) if d else 0.0) + rng.standard_normal(n)
    return Dataset(x, y)


class TestFitOls:
    def test_exact_line(self):
        data = Dataset(np.array([[0.0], [1.0], [2.0]]), np.array([1.0, 3.0, 5.0]))
        m = fit_ols(data)
        assert m.intercept == pytest.approx(1.0, abs=1e-10)
        assert m.coefficients[0] == pytest.approx(2.0, abs=1e-10)

    def test_intercept_only_is_mean(self):
        m = fit_ols(INTERCEPT_ONLY)
        assert m.intercept == pytest.approx(2.5, abs=1e-12)

    def test_two_point(self):
        data = Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
        m = fit_ols(data)
        assert m.intercept == pytest.approx(0.0, abs=1e-12)
        assert m.coefficients[0] == pytest.approx(1.0, abs=1e-12)

    def test_normal_equation_residual(self, rng):
        data = random_dataset(rng, max_n=200)
        m = fit_ols(data)
        full = np.hstack((np.ones((data.n, 1)), data.design))
        beta = np.concatenate(([m.intercept], m.coefficients))
        resid = full.T @ (full @ beta) - full.T @ data.response
        assert np.linalg.norm(resid) <= 1e-8 * max(1.0, np.linalg.norm(full.T @ data.response))

    def test_rank_deficiency_flagged(self):
        x = np.ones((10, 2))
        y = np.arange(10.0)
        m = fit_ols(Dataset(x, y))
        assert m.regularized


class TestFitQuantile:
    def test_intercept_only_median(self):
        m = fit_quantile(INTERCEPT_ONLY, 0.5)
        assert 2.0 - 1e-9 <= m.intercept <= 3.0 + 1e-9
        assert m.objective == pytest.approx(1.0, abs=1e-9)

    def test_all_equal_response(self):
        data = Dataset(np.zeros((5, 0)), np.full(5, 3.3))
        m = fit_quantile(data, 0.7)
        assert m.intercept == pytest.approx(3.3, abs=1e-9)
        assert m.objective == pytest.approx(0.0, abs=1e-12)

    def test_perfect_fit(self, rng):
        x = rng.standard_normal((30, 2))
        y = 1.5 + x @ np.array([2.0, -1.0])
        m = fit_quantile(Dataset(x, y), 0.3)
        assert m.objective == pytest.approx(0.0, abs=1e-9)
        assert m.intercept == pytest.approx(1.5, abs=1e-7)

    def test_objective_matches_split_lp(self, rng):
        # split-residual formulation solved directly as the oracle
        for _ in range(5):
            data = random_dataset(rng, max_n=60, max_d=3)
            alpha = float(rng.uniform(0.1, 0.9))
            m = fit_quantile(data, alpha)
            n, d = data.n, data.d
            p_idx = d + 1
            lp = _split_residual_lp(data, alpha)
            ref = solve_lp(lp)
            assert ref.status == "optimal"
            assert m.objective == pytest.approx(ref.objective, abs=1e-9)

    def test_rejects_endpoints(self):
        with pytest.raises(ValueError):
            fit_quantile(INTERCEPT_ONLY, 1.0)


def _split_residual_lp(data, alpha):
    from quadlab.lp_core import LpProblem

    n, d = data.n, data.d
    lp = LpProblem(d + 1 + 2 * n)
    obj = np.zeros(d + 1 + 2 * n)
    obj[d + 1:d + 1 + n] = alpha / (1 - alpha) / n
    obj[d + 1 + n:] = 1.0 / n
    lp.set_objective(obj)
    for i in range(n):
        lp.set_bounds(d + 1 + i, 0, None)
        lp.set_bounds(d + 1 + n + i, 0, None)
        row = np.zeros(d + 1 + 2 * n)
        row[0] = 1.0
        row[1:d + 1] = data.design[i]
        row[d + 1 + i] = 1.0
        row[d + 1 + n + i] = -1.0
        lp.add_row(row, "=", float(data.response[i]))
    return lp


class TestFitBiasedMean:
    def test_intercept_only_shifted_mean(self):
        for x in (0.7, -0.4, 0.0):
            m = fit_biased_mean(INTERCEPT_ONLY, x)
            assert m.intercept == pytest.approx(2.5 + x, abs=1e-9)

    def test_perfect_fit_zero_bias(self, rng):
        x = rng.standard_normal((25, 2))
        y = x @ np.array([1.0, 2.0]) - 0.5
        m = fit_biased_mean(Dataset(x, y), 0.0)
        assert m.objective == pytest.approx(0.0, abs=1e-9)

    def test_residual_mean_is_minus_x(self, rng):
        for _ in range(10):
            data = random_dataset(rng)
            x = float(rng.uniform(-1, 1))
            m = fit_biased_mean(data, x)
            z = residuals(m, data).z
            assert np.mean(z) == pytest.approx(-x, abs=1e-7)

    def test_formulations_agree(self, rng):
        for _ in range(10):
            data = random_dataset(rng, max_n=80)
            x = float(rng.uniform(-0.5, 0.5))
            a = fit_biased_mean(data, x, formulation="compact")
            b = fit_biased_mean(data, x, formulation="aux")
            assert a.objective == pytest.approx(b.objective, abs=1e-9)

    def test_equiv_alpha_is_exact_quantile_level(self, rng):
        for _ in range(8):
            data = random_dataset(rng, max_n=150)
            x = float(rng.uniform(-0.2, 0.2))
            m = fit_biased_mean(data, x)
            z = residuals(m, data).z
            lo, hi = induced_alpha(residuals(m, data))
            assert lo - 1e-9 <= m.equiv_alpha <= hi + 1e-9
            qr = fit_quantile(data, m.equiv_alpha)
            assert kb_error(z, m.equiv_alpha) == pytest.approx(qr.objective, rel=1e-9)


class TestFitSe:
    def test_intercept_only(self):
        m = fit_se(INTERCEPT_ONLY)
        assert m.intercept == pytest.approx(2.5, abs=1e-9)
        assert m.objective == pytest.approx(0.5, abs=1e-9)

    def test_zero_response(self):
        data = Dataset(np.zeros((6, 0)), np.zeros(6))
        m = fit_se(data)
        assert m.intercept == pytest.approx(0.0, abs=1e-12)
        assert m.objective == pytest.approx(0.0, abs=1e-12)

    def test_matches_biased_mean_at_zero(self, rng):
        data = random_dataset(rng)
        a = fit_se(data)
        b = fit_biased_mean(data, 0.0)
        assert a.objective == pytest.approx(b.objective, abs=1e-9)

    def test_objective_is_half_mean_abs_residual(self, rng):
        for _ in range(10):
            data = random_dataset(rng)
            m = fit_se(data)
            z = residuals(m, data).z
            assert m.objective == pytest.approx(0.5 * np.mean(np.abs(z)), abs=1e-9)

    def test_tracks_ols_on_symmetric_noise(self, rng):
        x = rng.standard_normal((2000, 1))
        y = 1.0 + 2.0 * x[:, 0] + rng.standard_normal(2000)
        data = Dataset(x, y)
        se = fit_se(data)
        ols = fit_ols(data)
        true = np.array([1.0, 2.0])
        d_se = np.linalg.norm(np.concatenate(([se.intercept], se.coefficients)) - true)
        d_ols = np.linalg.norm(np.concatenate(([ols.intercept], ols.coefficients)) - true)
        assert d_se <= 2.0 * max(d_ols, 0.02)

    def test_scale_equivariance(self, rng):
        data = random_dataset(rng)
        lam = 3.5
        scaled = Dataset(data.design, lam * data.response)
        a = fit_se(data)
        b = fit_se(scaled)
        assert b.objective == pytest.approx(lam * a.objective, rel=1e-8)
        assert b.intercept == pytest.approx(lam * a.intercept, abs=1e-6 * max(1, abs(a.intercept)))

    def test_stated_lp_form_agrees(self, rng):
        for _ in range(5):
            data = random_dataset(rng, max_n=60)
            lp, _ = se_lp_problem(data)
            ref = solve_lp(lp)
            m = fit_se(data)
            assert ref.status == "optimal"
            assert m.objective == pytest.approx(ref.objective, abs=1e-9)


class TestResidualsAndAlpha:
    def test_zero_model_zero_data(self):
        data = Dataset(np.zeros((3, 1)), np.zeros(3))
        from quadlab.regression import LinearModel
        z = residuals(LinearModel(0.0, np.zeros(1)), data)
        assert np.array_equal(z.z, np.zeros(3))

    def test_intercept_only_residual(self):
        data = Dataset(np.zeros((1, 0)), np.array([2.0]))
        from quadlab.regression import LinearModel
        z = residuals(LinearModel(1.0, np.zeros(0)), data)
        assert z.z.tolist() == [1.0]

    def test_counting(self):
        assert induced_alpha(Residuals(np.array([-1.0, -1.0, 1.0]))) == (2 / 3, 2 / 3)
        assert induced_alpha(Residuals(np.array([-2.0, -1.0, 0.0, 1.0]))) == (0.5, 0.75)
        assert induced_alpha(Residuals(np.array([3.0, 1.0]))) == (0.0, 0.0)


class TestNewsvendor:
    def test_level_from_prices(self):
        spec = NewsvendorSpec(1.0, 2.0)
        model, alpha = newsvendor_policy(INTERCEPT_ONLY, spec)
        assert alpha == pytest.approx(0.5)
        assert 2.0 - 1e-9 <= model.intercept <= 3.0 + 1e-9

    def test_rejects_equal_prices(self):
        with pytest.raises(ValueError):
            NewsvendorSpec(2.0, 2.0)

    def test_price_from_target(self, rng):
        y = rng.standard_normal(801) + 10.0
        data = Dataset(np.zeros((801, 0)), y)
        model, alpha_star, delta = newsvendor_price(data, 0.0, gamma=1.0)
        assert abs(alpha_star - 0.5) < 0.05
        assert delta == pytest.approx(1.0 / (1.0 - alpha_star), rel=1e-12)

    def test_positive_bias_raises_level(self, rng):
        y = rng.standard_normal(400)
        data = Dataset(np.zeros((400, 0)), y)
        _, a0, _ = newsvendor_price(data, 0.0, gamma=1.0)
        _, a1, _ = newsvendor_price(data, 0.8, gamma=1.0)
        assert a1 > a0

    def test_price_arithmetic(self):
        # alpha* = 0.803 with gamma = 1 prices at 1/(1-0.803)
        assert 1.0 / (1.0 - 0.803) == pytest.approx(5.076, abs=1e-3)

    def test_rejects_nonpositive_cost(self):
        with pytest.raises(ValueError):
            newsvendor_price(INTERCEPT_ONLY, 0.0, gamma=0.0)


class TestAuxFormulationGuards:
    def test_part_variables_disjoint(self, rng):
        data = random_dataset(rng, max_n=50)
        lp, index = bmr_aux_lp_problem(data, 0.1)
        sol = solve_lp(lp)
        assert sol.status == "optimal"
        p, q = sol.x[index["p"]], sol.x[index["q"]]
        assert float(np.max(p * q, initial=0.0)) <= 1e-8
