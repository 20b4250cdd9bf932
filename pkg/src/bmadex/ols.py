"""Per-gene ordinary least squares machinery.

Fits go through a QR decomposition of the design (numerically stable where
R-squared approaches 1, which the Bayes-factor integrand amplifies). Rank
deficiency is detected by comparing the diagonal of R against column norms at
a relative threshold of 1e-10. Two-sided p-values come from the t
distribution, evaluated through the regularized incomplete beta function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betainc

from bmadex.errors import RankDeficiencyError

RANK_TOL = 1e-10


@dataclass
class OlsFit:
    coefficients: np.ndarray
    residual_sum_squares: float
    r_squared: float
    dof: int
    coefficient_standard_errors: np.ndarray
    rho: int  # count of non-intercept covariates


@dataclass
class AuxiliaryRegression:
    """Byproducts of regressing the extra covariate on the base design.

    ``b`` holds the coefficients (intercept first) of the extra covariate on
    [1, X1..Xk]; ``b_x1`` is its X1 entry. ``residuals`` is the length-n
    residual vector of that fit. The three residual sums are: the extra
    covariate given X1..Xk, X1 given X2..Xk, and X1 given X2..Xk plus the
    extra covariate.
    """

    b: np.ndarray
    b_x1: float
    residuals: np.ndarray
    s2_extra_given_x: float
    s2_x1_given_rest: float
    s2_x1_given_rest_extra: float


@dataclass
class TStatRecord:
    t_m1: float
    t_m2: float
    p_m1: float
    p_m2: float


def _qr_checked(design: np.ndarray):
    """QR of the design, raising on rank deficiency."""
    design = np.asarray(design, dtype=float)
    n, p = design.shape
    if n <= p:
        raise RankDeficiencyError(f"need more samples than parameters (n={n}, p={p})")
    Q, R = np.linalg.qr(design)
    col_norms = np.linalg.norm(design, axis=0)
    col_norms[col_norms == 0] = 1.0
    if np.any(np.abs(np.diag(R)) < RANK_TOL * col_norms):
        raise RankDeficiencyError("design matrix is rank deficient")
    return Q, R


def t_sf_two_sided(t: np.ndarray, dof) -> np.ndarray:
    """P(|T_dof| >= |t|) via the regularized incomplete beta function."""
    t = np.asarray(t, dtype=float)
    dof = np.asarray(dof, dtype=float)
    x = dof / (dof + t * t)
    return betainc(dof / 2.0, 0.5, x)


def fit_ols(y: np.ndarray, design: np.ndarray) -> OlsFit:
    """Least squares of ``y`` on ``design`` (first column is the intercept)."""
    y = np.asarray(y, dtype=float)
    Q, R = _qr_checked(design)
    n, p = design.shape
    coef = solve_triangular(R, Q.T @ y)
    resid = y - design @ coef
    rss = float(resid @ resid)
    centered = y - y.mean()
    tss = float(centered @ centered)
    r2 = 0.0 if tss == 0.0 else max(0.0, 1.0 - rss / tss)
    dof = n - p
    sigma2 = rss / dof
    Rinv = solve_triangular(R, np.eye(p))
    se = np.sqrt(sigma2 * np.sum(Rinv * Rinv, axis=1))
    return OlsFit(coefficients=coef, residual_sum_squares=rss, r_squared=r2,
                  dof=dof, coefficient_standard_errors=se, rho=p - 1)


def fit_matrix(Y: np.ndarray, design: np.ndarray):
    """Vectorized least squares of many genes on one shared design.

    ``Y`` is genes x samples. Returns (coefficients p x J, rss J, r2 J,
    standard errors p x J). The residual is formed explicitly (not via the
    Gram identity) so r2 near 1 keeps full precision.
    """
    Y = np.asarray(Y, dtype=float)
    Q, R = _qr_checked(design)
    n, p = design.shape
    coef = solve_triangular(R, Q.T @ Y.T)
    resid = Y.T - design @ coef
    rss = np.einsum("ij,ij->j", resid, resid)
    centered = Y - Y.mean(axis=1, keepdims=True)
    tss = np.einsum("ij,ij->i", centered, centered)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(tss > 0, 1.0 - rss / tss, 0.0)
    r2 = np.clip(r2, 0.0, 1.0)
    sigma2 = rss / (n - p)
    Rinv = solve_triangular(R, np.eye(p))
    unscaled = np.sum(Rinv * Rinv, axis=1)
    se = np.sqrt(unscaled[:, None] * sigma2[None, :])
    return coef, rss, r2, se


def auxiliary_fit(X: np.ndarray, x_extra: np.ndarray) -> AuxiliaryRegression:
    """Regress the extra covariate on [1, X] and collect the residual sums
    needed by the t-statistic relationship and the omitted-variable bias."""
    X = np.asarray(X, dtype=float)
    x_extra = np.asarray(x_extra, dtype=float)
    n, k = X.shape
    ones = np.ones((n, 1))
    base = np.hstack([ones, X])

    fit_e = fit_ols(x_extra, base)
    resid = x_extra - base @ fit_e.coefficients

    rest = np.hstack([ones, X[:, 1:]])
    s2_x1 = fit_ols(X[:, 0], rest).residual_sum_squares
    rest_extra = np.hstack([ones, X[:, 1:], x_extra[:, None]])
    s2_x1_extra = fit_ols(X[:, 0], rest_extra).residual_sum_squares

    return AuxiliaryRegression(b=fit_e.coefficients, b_x1=float(fit_e.coefficients[1]),
                               residuals=resid,
                               s2_extra_given_x=fit_e.residual_sum_squares,
                               s2_x1_given_rest=s2_x1,
                               s2_x1_given_rest_extra=s2_x1_extra)


def two_model_tstats(y: np.ndarray, X: np.ndarray, x_extra: np.ndarray) -> TStatRecord:
    """t statistics and two-sided p-values for the X1 coefficient under the
    base model [1, X] and the extended model [1, X, x_extra]."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    ones = np.ones((n, 1))
    fit1 = fit_ols(y, np.hstack([ones, X]))
    fit2 = fit_ols(y, np.hstack([ones, X, np.asarray(x_extra, float)[:, None]]))
    t1 = fit1.coefficients[1] / fit1.coefficient_standard_errors[1]
    t2 = fit2.coefficients[1] / fit2.coefficient_standard_errors[1]
    return TStatRecord(t_m1=float(t1), t_m2=float(t2),
                       p_m1=float(t_sf_two_sided(t1, fit1.dof)),
                       p_m2=float(t_sf_two_sided(t2, fit2.dof)))


def tstat_identity_check(y: np.ndarray, X: np.ndarray, x_extra: np.ndarray) -> float:
    """Absolute residual of the algebraic identity linking the two t statistics.

    The exact identity is

        t_m1 = (S1 / S1e) * (sigma2_hat / sigma1_hat) * t_m2
               + b_x1 * (e' y) / (S2_e * sd(beta1_hat)),

    with S1, S1e the residual norms of X1 on the other base covariates
    without/with the extra covariate, S2_e the residual sum of squares of the
    extra covariate on the base design, e its residual vector, and
    sigma1_hat/sigma2_hat the residual scale estimates of the two gene
    models. The scale ratio on the t_m2 term is required for the identity to
    hold exactly; it is pinned here by a rational-arithmetic check in the
    test suite.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    x_extra = np.asarray(x_extra, dtype=float)
    n = X.shape[0]
    ones = np.ones((n, 1))
    fit1 = fit_ols(y, np.hstack([ones, X]))
    fit2 = fit_ols(y, np.hstack([ones, X, x_extra[:, None]]))
    aux = auxiliary_fit(X, x_extra)
    if aux.s2_extra_given_x <= RANK_TOL * float(x_extra @ x_extra):
        raise RankDeficiencyError("extra covariate is collinear with the base design")

    t1 = fit1.coefficients[1] / fit1.coefficient_standard_errors[1]
    t2 = fit2.coefficients[1] / fit2.coefficient_standard_errors[1]
    sigma1 = np.sqrt(fit1.residual_sum_squares / fit1.dof)
    sigma2 = np.sqrt(fit2.residual_sum_squares / fit2.dof)
    s_ratio = np.sqrt(aux.s2_x1_given_rest / aux.s2_x1_given_rest_extra)
    correction = (aux.b_x1 * (aux.residuals @ y)
                  / (aux.s2_extra_given_x * fit1.coefficient_standard_errors[1]))
    predicted = s_ratio * (sigma2 / sigma1) * t2 + correction
    return float(abs(t1 - predicted))


def omitted_variable_bias(alpha_extra: float, aux: AuxiliaryRegression) -> float:
    """Expected bias of the X1 coefficient when the extra covariate with true
    coefficient ``alpha_extra`` is omitted from the fitted model."""
    return float(alpha_extra * aux.b_x1)
