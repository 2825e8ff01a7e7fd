"""Desparsified two-step Lasso-GMM: weights, bias correction and inference.

The full procedure (:func:`desparsified_gmm`) is

1. cross-validate and fit the identity-weighted Lasso-GMM;
2. build the diagonal weight ``1/sigma_l^2`` from its residuals;
3. cross-validate and fit the weighted Lasso-GMM;
4. approximate the inverse of the curvature matrix row by row (CLIME);
5. debias, estimate the sandwich variance from first-step residuals and
   form t-statistics and normal confidence intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clime import ClimeResult, clime_full, sigma_hat
from .errors import DegenerateInstrumentVariance, DimensionMismatch, NonPositiveVariance
from .lasso_gmm import CvConfig, LassoFit, _check_xzy, build_design, cross_validate, lasso_solve
from .numerics import as_vector

VARIANCE_FLOOR = 1e-10

# Acklam's rational approximation to the normal quantile
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_ppf(u):
    """Standard normal quantile.

    Acklam's rational approximation (relative error about 1e-9) followed by
    one Halley step on ``Phi(x) - u``. Levels above 1/2 use the symmetry
    ``ppf(u) = -ppf(1 - u)``; ``1 - u`` is exact there, and the Halley step
    then never works with ``Phi`` close to 1.
    """
    if not 0.0 < u < 1.0:
        if u == 0.0:
            return -math.inf
        if u == 1.0:
            return math.inf
        raise ValueError(f"quantile level must lie in (0, 1), got {u}")
    if u > 0.5:
        return -_lower_ppf(1.0 - u)
    return _lower_ppf(u)


def _lower_ppf(u):
    if u < _P_LOW:
        s = math.sqrt(-2.0 * math.log(u))
        x = (((((_C[0] * s + _C[1]) * s + _C[2]) * s + _C[3]) * s + _C[4]) * s + _C[5]) / (
            (((_D[0] * s + _D[1]) * s + _D[2]) * s + _D[3]) * s + 1.0)
    else:
        s = u - 0.5
        t = s * s
        x = (((((_A[0] * t + _A[1]) * t + _A[2]) * t + _A[3]) * t + _A[4]) * t + _A[5]) * s / (
            ((((_B[0] * t + _B[1]) * t + _B[2]) * t + _B[3]) * t + _B[4]) * t + 1.0)
    err = normal_cdf(x) - u
    step = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - step / (1.0 + 0.5 * x * step)


@dataclass
class WeightMatrix:
    """Diagonal GMM weight ``diag(1 / sigma_sq)``."""

    sigma_sq: np.ndarray

    @property
    def diag(self):
        return 1.0 / self.sigma_sq


@dataclass
class VarianceEstimate:
    v_hat_d: np.ndarray
    sigma_zu_hat: np.ndarray


@dataclass
class InferenceResult:
    beta_hat: np.ndarray
    b_hat: np.ndarray
    se: np.ndarray
    t_stats: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    alpha: float
    null: np.ndarray
    n: int
    first_fit: LassoFit
    second_fit: LassoFit
    weights: WeightMatrix
    clime: ClimeResult
    sigma: np.ndarray

    @property
    def sigma_b(self):
        """``sqrt(e_j' Gamma V Gamma' e_j)``, i.e. ``se * sqrt(n)``."""
        return self.se * math.sqrt(self.n)

    def t_stat(self, j, null_value):
        return t_statistic(self.b_hat[j], self.se[j] ** 2 * self.n, self.n, null_value)

    def rejects(self, j, null_value):
        z = normal_ppf(1.0 - self.alpha / 2.0)
        return abs(self.t_stat(j, null_value)) > z


def weight_matrix(Z, residuals):
    """``sigma_l^2 = mean_i Z_il^2 u_i^2``.

    Raises
    ------
    DegenerateInstrumentVariance
        If any variance is at most 1e-10.
    """
    Z = np.asarray(Z, dtype=np.float64)
    u = as_vector(residuals, "residuals")
    if Z.shape[0] != u.shape[0]:
        raise DimensionMismatch(f"Z has {Z.shape[0]} rows, residuals have {u.shape[0]}")
    sigma_sq = (Z**2).T @ u**2 / Z.shape[0]
    bad = np.flatnonzero(sigma_sq <= VARIANCE_FLOOR)
    if bad.size:
        raise DegenerateInstrumentVariance(
            f"instrument variance <= {VARIANCE_FLOOR} for columns {bad.tolist()}"
        )
    return WeightMatrix(sigma_sq=sigma_sq)


def two_step_pipeline(X, Z, Y, cv=None):
    """Cross-validated first-step fit, weights from its residuals, second-step fit.

    Returns
    -------
    first_fit, weights, second_fit
    """
    cv = cv or CvConfig()
    X, Z, Y = _check_xzy(X, Z, Y)
    lam1 = cross_validate(X, Z, Y, None, cv)
    first = lasso_solve(build_design(X, Z, Y, None), lam1)
    W = weight_matrix(Z, first.residuals)
    lam2 = cross_validate(X, Z, Y, W, cv)
    second = lasso_solve(build_design(X, Z, Y, W), lam2)
    return first, W, second


def _moment_map(X, Z, W):
    """``(X'Z/n) diag(w)/q``, a p x q matrix."""
    n, q = Z.shape
    w = np.ones(q) if W is None else 1.0 / as_vector(getattr(W, "sigma_sq", W))
    return (X.T @ Z / n) * (w / q)


def _gamma_matrix(gamma):
    return gamma.gamma_hat if isinstance(gamma, ClimeResult) else np.asarray(gamma, dtype=np.float64)


def debias(beta_hat, gamma, X, Z, W, Y):
    """``b = beta + Gamma (X'Z/n)(W/q) Z'(Y - X beta)/n``."""
    X, Z, Y = _check_xzy(X, Z, Y)
    beta_hat = as_vector(beta_hat, "beta_hat")
    G = _gamma_matrix(gamma)
    p = X.shape[1]
    if beta_hat.shape[0] != p or G.shape != (p, p):
        raise DimensionMismatch(f"beta has {beta_hat.shape[0]} entries, Gamma is {G.shape}, p={p}")
    n = X.shape[0]
    moment = Z.T @ (Y - X @ beta_hat) / n
    return beta_hat + G @ (_moment_map(X, Z, W) @ moment)


def variance_estimate(X, Z, W, first_step_residuals):
    """Sandwich pieces ``V_d`` (p x p) and ``Sigma_Zu = mean_i Z_i Z_i' u_i^2`` (q x q).

    The residuals must come from the identity-weighted first-step fit.
    """
    u = as_vector(first_step_residuals, "residuals")
    n = Z.shape[0]
    Zu = Z * u[:, None]
    sigma_zu = Zu.T @ Zu / n
    Mmap = _moment_map(X, Z, W)
    v_hat = Mmap @ sigma_zu @ Mmap.T
    return VarianceEstimate(v_hat_d=0.5 * (v_hat + v_hat.T), sigma_zu_hat=sigma_zu)


def coordinate_variances(gamma, X, Z, W, first_step_residuals):
    """``e_j' Gamma V_d Gamma' e_j`` for every j.

    Evaluated as ``mean_i (Gamma (X'Z/n)(W/q) Z_i u_i)_j^2``, which avoids the
    q x q middle matrix.

    Raises
    ------
    NonPositiveVariance
    """
    G = _gamma_matrix(gamma)
    u = as_vector(first_step_residuals, "residuals")
    H = (Z * u[:, None]) @ (G @ _moment_map(X, Z, W)).T
    var = np.mean(H**2, axis=0)
    bad = np.flatnonzero(~(var > 0))
    if bad.size:
        raise NonPositiveVariance(f"non-positive variance for coordinates {bad.tolist()}")
    return var


def t_statistic(b_j, variance_j, n, null_value):
    """``sqrt(n) (b_j - null) / sqrt(variance_j)``."""
    if not variance_j > 0:
        raise NonPositiveVariance(f"variance {variance_j} is not positive")
    return math.sqrt(n) * (b_j - null_value) / math.sqrt(variance_j)


def confidence_intervals(b_hat, variances, n, alpha=0.05):
    """Symmetric intervals ``b_j -/+ z_{1-alpha/2} sqrt(variance_j / n)``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    b_hat = np.asarray(b_hat, dtype=np.float64)
    half = normal_ppf(1.0 - alpha / 2.0) * np.sqrt(np.asarray(variances, dtype=np.float64) / n)
    return b_hat - half, b_hat + half


def desparsified_gmm(X, Z, Y, cv=None, alpha=0.05, null=None):
    """Run the full estimation and inference procedure.

    Parameters
    ----------
    X, Z, Y : arrays of shape (n, p), (n, q), (n,)
    cv : CvConfig, optional
    alpha : float
        Confidence intervals have level ``1 - alpha``.
    null : (p,) array, optional
        Hypothesised coefficients for the t-statistics (zeros by default).
    """
    X, Z, Y = _check_xzy(X, Z, Y)
    n, p = X.shape
    null = np.zeros(p) if null is None else as_vector(null, "null")
    if null.shape[0] != p:
        raise DimensionMismatch(f"null vector has {null.shape[0]} entries, X has {p} columns")
    first, W, second = two_step_pipeline(X, Z, Y, cv)
    S = sigma_hat(X, Z, W)
    gamma = clime_full(S)
    b = debias(second.beta, gamma, X, Z, W, Y)
    var = coordinate_variances(gamma, X, Z, W, first.residuals)
    lower, upper = confidence_intervals(b, var, n, alpha)
    se = np.sqrt(var / n)
    return InferenceResult(
        beta_hat=second.beta,
        b_hat=b,
        se=se,
        t_stats=(b - null) / se,
        ci_lower=lower,
        ci_upper=upper,
        alpha=alpha,
        null=null,
        n=n,
        first_fit=first,
        second_fit=second,
        weights=W,
        clime=gamma,
        sigma=S,
    )
