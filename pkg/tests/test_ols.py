import numpy as np
import pytest

from bmadex.errors import RankDeficiencyError
from bmadex.ols import (auxiliary_fit, fit_matrix, fit_ols,
                        omitted_variable_bias, t_sf_two_sided,
                        tstat_identity_check, two_model_tstats)
from oracles import normal_equations_fit


class TestFitOls:
    def test_perfect_fit(self):
        y = np.array([1.0, 2.0, 3.0])
        design = np.column_stack([np.ones(3), [1.0, 2.0, 3.0]])
        fit = fit_ols(y, design)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.coefficients[1] == pytest.approx(1.0)

    def test_constant_response(self):
        y = np.full(6, 2.5)
        design = np.column_stack([np.ones(6), np.arange(6.0)])
        fit = fit_ols(y, design)
        assert fit.r_squared == 0.0
        assert fit.coefficients[1] == pytest.approx(0.0, abs=1e-12)

    def test_matches_normal_equations_oracle(self, rng):
        y = rng.normal(size=8)
        design = np.column_stack([np.ones(8), rng.normal(size=(8, 2))])
        fit = fit_ols(y, design)
        coef, rss, se = normal_equations_fit(y, design)
        np.testing.assert_allclose(fit.coefficients, coef, atol=1e-10)
        np.testing.assert_allclose(fit.residual_sum_squares, rss, atol=1e-10)
        np.testing.assert_allclose(fit.coefficient_standard_errors, se, atol=1e-10)
        assert fit.dof == 8 - 3
        assert fit.rho == 2

    def test_rank_deficiency_raises(self, rng):
        x = rng.normal(size=10)
        design = np.column_stack([np.ones(10), x, 2.0 * x])
        with pytest.raises(RankDeficiencyError):
            fit_ols(rng.normal(size=10), design)

    def test_too_few_samples_raises(self, rng):
        design = np.column_stack([np.ones(3), rng.normal(size=(3, 2))])
        with pytest.raises(RankDeficiencyError):
            fit_ols(rng.normal(size=3), design)

    def test_r2_invariant_to_affine_rescaling(self, rng):
        y = rng.normal(size=20)
        design = np.column_stack([np.ones(20), rng.normal(size=(20, 2))])
        r2 = fit_ols(y, design).r_squared
        r2_scaled = fit_ols(3.0 * y - 7.0, design).r_squared
        assert r2_scaled == pytest.approx(r2, rel=1e-12)

    def test_fit_matrix_agrees_with_single_fits(self, rng):
        Y = rng.normal(size=(5, 12))
        design = np.column_stack([np.ones(12), rng.normal(size=(12, 2))])
        coef, rss, r2, se = fit_matrix(Y, design)
        for j in range(5):
            fit = fit_ols(Y[j], design)
            np.testing.assert_allclose(coef[:, j], fit.coefficients, atol=1e-12)
            np.testing.assert_allclose(rss[j], fit.residual_sum_squares, atol=1e-12)
            np.testing.assert_allclose(r2[j], fit.r_squared, atol=1e-12)
            np.testing.assert_allclose(se[:, j], fit.coefficient_standard_errors,
                                       atol=1e-12)


class TestAuxiliaryFit:
    def test_orthogonal_extra_gives_zero_coefficient(self):
        x1 = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
        x_extra = np.array([1.0, 1.0, -1.0, -1.0, 1.0, -1.0])
        x_extra -= x_extra.mean()
        # make extra exactly orthogonal to x1 and the intercept
        x_extra -= (x_extra @ x1) / (x1 @ x1) * x1
        aux = auxiliary_fit(x1[:, None], x_extra)
        assert aux.b_x1 == pytest.approx(0.0, abs=1e-12)

    def test_collinear_extra_gives_zero_residual(self, rng):
        X = rng.normal(size=(10, 2))
        aux = auxiliary_fit(X, X[:, 0].copy())
        assert aux.s2_extra_given_x == pytest.approx(0.0, abs=1e-20)
        np.testing.assert_allclose(aux.residuals, 0.0, atol=1e-10)

    def test_matches_normal_equations_oracle(self, rng):
        X = rng.normal(size=(9, 3))
        x_extra = rng.normal(size=9)
        aux = auxiliary_fit(X, x_extra)
        coef, rss, _ = normal_equations_fit(x_extra, np.column_stack([np.ones(9), X]))
        np.testing.assert_allclose(aux.b, coef, atol=1e-10)
        np.testing.assert_allclose(aux.s2_extra_given_x, rss, atol=1e-10)

    def test_residuals_orthogonal_to_regressors(self, rng):
        X = rng.normal(size=(12, 2))
        aux = auxiliary_fit(X, rng.normal(size=12))
        base = np.column_stack([np.ones(12), X])
        np.testing.assert_allclose(base.T @ aux.residuals, 0.0, atol=1e-10)

    def test_extra_covariate_tightens_x1_residual(self, rng):
        X = rng.normal(size=(15, 3))
        aux = auxiliary_fit(X, rng.normal(size=15))
        assert aux.s2_x1_given_rest_extra <= aux.s2_x1_given_rest + 1e-12


class TestTstatIdentity:
    def test_identity_on_rational_instance(self):
        """Pin the exact identity form with rational arithmetic (sympy).

        On a 5-sample instance with small-integer data, every quantity in
        the identity is rational, so the residual of the implemented form
        must vanish identically, scale ratio included.
        """
        sympy = pytest.importorskip("sympy")
        R = sympy.Rational
        y = [R(3), R(-1), R(2), R(5), R(0)]
        x1 = [R(1), R(0), R(1), R(2), R(-1)]
        xe = [R(2), R(1), R(0), R(1), R(1)]

        def lstsq(cols, target):
            A = sympy.Matrix([[c[i] for c in cols] for i in range(5)])
            b = sympy.Matrix(target)
            coef = (A.T * A).inv() * A.T * b
            resid = b - A * coef
            return coef, resid

        ones = [R(1)] * 5
        coef1, resid1 = lstsq([ones, x1], y)
        coef2, resid2 = lstsq([ones, x1, xe], y)
        rss1 = (resid1.T * resid1)[0]
        rss2 = (resid2.T * resid2)[0]
        sigma1_sq = rss1 / R(3)  # n - p = 5 - 2
        sigma2_sq = rss2 / R(2)

        coef_e, resid_e = lstsq([ones, x1], xe)
        s2_e = (resid_e.T * resid_e)[0]
        _, resid_x1 = lstsq([ones], x1)
        s2_x1 = (resid_x1.T * resid_x1)[0]
        _, resid_x1e = lstsq([ones, xe], x1)
        s2_x1e = (resid_x1e.T * resid_x1e)[0]

        # var(beta1_hat) = sigma^2 [ (X'X)^-1 ]_11 = sigma^2 / s2 of x1 given rest
        t1_sq = coef1[1] ** 2 / (sigma1_sq / s2_x1)
        t2_sq = coef2[1] ** 2 / (sigma2_sq / s2_x1e)
        t1 = sympy.sign(coef1[1]) * sympy.sqrt(t1_sq)
        t2 = sympy.sign(coef2[1]) * sympy.sqrt(t2_sq)

        ey = (resid_e.T * sympy.Matrix(y))[0]
        sd_beta1 = sympy.sqrt(sigma1_sq / s2_x1)
        predicted = (sympy.sqrt(s2_x1 / s2_x1e) * sympy.sqrt(sigma2_sq / sigma1_sq) * t2
                     + coef_e[1] * ey / (s2_e * sd_beta1))
        assert sympy.simplify(t1 - predicted) == 0

        # and the printed form without the scale ratio does NOT vanish here
        bare = (sympy.sqrt(s2_x1 / s2_x1e) * t2
                + coef_e[1] * ey / (s2_e * sd_beta1))
        assert sympy.simplify(t1 - bare) != 0

    def test_residual_small_on_random_instances(self, rng):
        for _ in range(100):
            n = int(rng.integers(8, 30))
            k = int(rng.integers(1, 4))
            X = rng.normal(size=(n, k))
            x_extra = rng.normal(size=n)
            y = rng.normal(size=n)
            assert tstat_identity_check(y, X, x_extra) < 1e-8

    def test_orthogonal_extra_zeroes_correction(self, rng):
        n = 24
        x1 = rng.normal(size=n)
        x1 -= x1.mean()
        raw = rng.normal(size=n)
        x_extra = raw - raw.mean()
        x_extra -= (x_extra @ x1) / (x1 @ x1) * x1
        y = rng.normal(size=n)
        y -= y.mean()
        y -= (y @ x1) / (x1 @ x1) * x1
        y -= (y @ x_extra) / (x_extra @ x_extra) * x_extra
        y += 0.7 * x1  # signal along x1 only
        rec = two_model_tstats(y, x1[:, None], x_extra)
        aux = auxiliary_fit(x1[:, None], x_extra)
        assert aux.b_x1 == pytest.approx(0.0, abs=1e-12)
        assert aux.residuals @ y == pytest.approx(0.0, abs=1e-10)
        assert tstat_identity_check(y, x1[:, None], x_extra) < 1e-8
        # with a zero correction term the ratio collapses to the S-scale ratio
        s_ratio = np.sqrt(aux.s2_x1_given_rest / aux.s2_x1_given_rest_extra)
        sigma1 = np.sqrt(fit_rss(y, x1) / (n - 2))
        assert rec.t_m1 == pytest.approx(
            s_ratio * (sigma2_of(y, x1, x_extra, n) / sigma1) * rec.t_m2, abs=1e-8)

    def test_collinear_extra_raises(self, rng):
        X = rng.normal(size=(10, 2))
        with pytest.raises(RankDeficiencyError):
            tstat_identity_check(rng.normal(size=10), X, 3.0 * X[:, 0])


def fit_rss(y, x1):
    design = np.column_stack([np.ones(len(y)), x1])
    return fit_ols(y, design).residual_sum_squares


def sigma2_of(y, x1, x_extra, n):
    design = np.column_stack([np.ones(n), x1, x_extra])
    fit = fit_ols(y, design)
    return np.sqrt(fit.residual_sum_squares / fit.dof)


class TestOmittedVariableBias:
    def test_zero_effect_zero_bias(self, rng):
        aux = auxiliary_fit(rng.normal(size=(10, 2)), rng.normal(size=10))
        assert omitted_variable_bias(0.0, aux) == 0.0

    def test_orthogonal_design_zero_bias(self, rng):
        x1 = np.tile([1.0, -1.0], 8)
        x_extra = np.tile([1.0, 1.0, -1.0, -1.0], 4)
        aux = auxiliary_fit(x1[:, None], x_extra)
        assert omitted_variable_bias(2.0, aux) == pytest.approx(0.0, abs=1e-12)

    def test_monte_carlo_mean_matches_bias(self, rng):
        """2000 simulated genes under the extended model: the mean short-model
        coefficient error matches alpha_extra * b_x1 within 3 standard errors."""
        n = 30
        x1 = rng.normal(size=n)
        x_extra = 0.5 * x1 + rng.normal(size=n)  # correlated confounder
        aux = auxiliary_fit(x1[:, None], x_extra)
        alpha1, alpha_extra, sigma = 1.0, 2.0, 1.0
        expected = omitted_variable_bias(alpha_extra, aux)
        assert expected == pytest.approx(2.0 * aux.b_x1)

        design_short = np.column_stack([np.ones(n), x1])
        mean_signal = alpha1 * x1 + alpha_extra * x_extra
        errors = np.empty(2000)
        for g in range(2000):
            y = mean_signal + rng.normal(0.0, sigma, size=n)
            errors[g] = fit_ols(y, design_short).coefficients[1] - alpha1
        se = errors.std(ddof=1) / np.sqrt(len(errors))
        assert abs(errors.mean() - expected) < 3.0 * se


class TestStandardErrorContract:
    def test_irrelevant_covariate_never_lowers_r2(self, rng):
        for _ in range(50):
            n = 20
            X = rng.normal(size=(n, 2))
            y = rng.normal(size=n)
            base = np.column_stack([np.ones(n), X[:, :1]])
            bigger = np.column_stack([np.ones(n), X])
            assert (fit_ols(y, bigger).r_squared
                    >= fit_ols(y, base).r_squared - 1e-12)

    def test_mean_se_ratio_at_least_one(self, rng):
        """Adding an irrelevant covariate inflates the target standard error
        on average (the efficiency cost of over-adjustment)."""
        n = 25
        ratios = np.empty(500)
        for i in range(500):
            x1 = rng.normal(size=n)
            x_extra = 0.6 * x1 + rng.normal(size=n)
            y = 0.5 * x1 + rng.normal(size=n)  # x_extra irrelevant to y
            short = fit_ols(y, np.column_stack([np.ones(n), x1]))
            long = fit_ols(y, np.column_stack([np.ones(n), x1, x_extra]))
            ratios[i] = (long.coefficient_standard_errors[1]
                         / short.coefficient_standard_errors[1])
        assert ratios.mean() >= 1.0


class TestTDistribution:
    def test_two_sided_p_against_scipy(self, rng):
        from scipy.stats import t as t_dist
        t = rng.normal(scale=2.0, size=50)
        for dof in (3, 10, 76):
            np.testing.assert_allclose(t_sf_two_sided(t, dof),
                                       2.0 * t_dist.sf(np.abs(t), dof),
                                       rtol=1e-10)

    def test_zero_t_gives_p_one(self):
        assert t_sf_two_sided(0.0, 10) == pytest.approx(1.0)
