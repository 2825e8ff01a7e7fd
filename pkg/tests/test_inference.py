import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hdgmm.clime import sigma_hat
from hdgmm.errors import DegenerateInstrumentVariance, DimensionMismatch, NonPositiveVariance
from hdgmm.inference import (
    WeightMatrix,
    confidence_intervals,
    coordinate_variances,
    debias,
    desparsified_gmm,
    normal_cdf,
    normal_ppf,
    t_statistic,
    two_step_pipeline,
    variance_estimate,
    weight_matrix,
)
from hdgmm.lasso_gmm import CvConfig
from hdgmm.simulate import DesignSpec, generate_dataset


def _iv_data(rng, n, p, q, noise=1.0):
    Z = rng.standard_normal((n, q))
    pi = rng.standard_normal((q, p)) / np.sqrt(q) + np.eye(q, p)
    X = Z @ pi + 0.5 * rng.standard_normal((n, p))
    beta0 = np.zeros(p)
    beta0[:2] = 1.0
    Y = X @ beta0 + noise * rng.standard_normal(n)
    return X, Z, Y, beta0


# ---------------------------------------------------------------- quantile


@pytest.mark.parametrize("u", [0.5, 0.9, 0.95, 0.975, 0.995])
def test_ppf_roundtrip(u):
    assert abs(normal_cdf(normal_ppf(u)) - u) <= 1e-8


def test_ppf_tails_and_symmetry():
    for u in (1e-10, 1e-4, 0.01, 0.3):
        v = 1 - u
        assert normal_ppf(1 - v) == -normal_ppf(v)
        assert abs(normal_cdf(normal_ppf(u)) - u) <= 1e-8 * max(u, 1e-2)
    assert normal_ppf(0.975) == pytest.approx(1.959963984540054, abs=1e-12)
    with pytest.raises(ValueError):
        normal_ppf(1.5)


def test_ci_half_width_at_five_percent():
    lo, hi = confidence_intervals([0.0], [1.0], 1, 0.05)
    assert abs(hi[0] - 1.959964) <= 1e-5
    assert lo[0] == -hi[0]


def test_ci_collapse_and_bad_alpha():
    lo, hi = confidence_intervals([2.0, -1.0], [4.0, 9.0], 100, 1 - 1e-12)
    assert_allclose(lo, [2.0, -1.0], atol=1e-10)
    assert_allclose(hi, [2.0, -1.0], atol=1e-10)
    with pytest.raises(ValueError):
        confidence_intervals([0.0], [1.0], 1, 1.0)


# ---------------------------------------------------------------- weights


def test_weight_matrix_unit_case():
    W = weight_matrix(np.ones((7, 3)), np.ones(7))
    assert_allclose(W.sigma_sq, 1.0, rtol=1e-15)
    assert_allclose(W.diag, 1.0, rtol=1e-15)


def test_weight_matrix_zero_residuals():
    with pytest.raises(DegenerateInstrumentVariance):
        weight_matrix(np.ones((5, 2)), np.zeros(5))


def test_weight_matrix_loop_oracle(rng):
    n, q = 30, 4
    Z = rng.standard_normal((n, q))
    u = rng.standard_normal(n)
    W = weight_matrix(Z, u)
    for l in range(q):
        s = 0.0
        for i in range(n):
            s += Z[i, l] ** 2 * u[i] ** 2
        assert W.sigma_sq[l] == pytest.approx(s / n, rel=1e-13)


def test_weight_matrix_shape_check():
    with pytest.raises(DimensionMismatch):
        weight_matrix(np.ones((5, 2)), np.ones(4))


# ---------------------------------------------------------------- debias


def test_debias_vanishing_correction(rng):
    n, p, q = 20, 3, 5
    X = rng.standard_normal((n, p))
    Z = rng.standard_normal((n, q))
    beta = rng.standard_normal(p)
    W = rng.uniform(0.5, 2, q)
    gamma = rng.standard_normal((p, p))
    assert_allclose(debias(beta, gamma, X, Z, W, X @ beta), beta, atol=1e-14)
    Y = rng.standard_normal(n)
    assert np.array_equal(debias(beta, np.zeros((p, p)), X, Z, W, Y), beta)


def test_debias_exact_inverse_is_classical_gmm(rng):
    n, p, q = 200, 3, 5
    X, Z, Y, _ = _iv_data(rng, n, p, q)
    W = WeightMatrix(rng.uniform(0.5, 2, q))
    S = sigma_hat(X, Z, W)
    w = W.diag
    classical = np.linalg.solve(S, (X.T @ Z / n) @ (w / q * (Z.T @ Y / n)))
    gamma = np.linalg.inv(S)
    for beta in (np.zeros(p), rng.standard_normal(p) * 3):
        b = debias(beta, gamma, X, Z, W, Y)
        assert np.max(np.abs(b - classical)) <= 1e-8 * np.max(np.abs(classical))


def test_debias_expanded_form_agrees(rng):
    # b = Gamma (X'Z/n)(W/q)(Z'Y/n) + (I - Gamma S) beta
    n, p, q = 50, 6, 8
    X, Z, Y, _ = _iv_data(rng, n, p, q)
    W = rng.uniform(0.5, 2, q)
    gamma = rng.standard_normal((p, p))
    beta = rng.standard_normal(p)
    S = (X.T @ Z / n) @ np.diag(1 / W / q) @ (Z.T @ X / n)
    expanded = gamma @ ((X.T @ Z / n) @ np.diag(1 / W / q) @ (Z.T @ Y / n)) + (np.eye(p) - gamma @ S) @ beta
    assert_allclose(debias(beta, gamma, X, Z, W, Y), expanded, rtol=0, atol=1e-12)


def test_debias_shape_errors(rng):
    X = rng.standard_normal((10, 3))
    with pytest.raises(DimensionMismatch):
        debias(np.zeros(2), np.eye(3), X, X, None, np.ones(10))


# ---------------------------------------------------------------- variance


def test_sigma_zu_constant_residual():
    n = 8
    Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((n, 3)))
    X = np.ones((n, 2))
    est = variance_estimate(X, Q, None, np.full(n, 3.0))
    assert_allclose(est.sigma_zu_hat, 9.0 * Q.T @ Q / n, atol=1e-15)


def test_variance_psd_and_loop_oracle(rng):
    n, p, q = 25, 3, 4
    X = rng.standard_normal((n, p))
    Z = rng.standard_normal((n, q))
    u = rng.standard_normal(n)
    W = rng.uniform(0.5, 2, q)
    gamma = rng.standard_normal((p, p))
    est = variance_estimate(X, Z, W, u)
    for M in (est.sigma_zu_hat, est.v_hat_d):
        assert np.array_equal(M, M.T)
        assert np.linalg.eigvalsh(M).min() >= -1e-10
    var = coordinate_variances(gamma, X, Z, W, u)
    # loops over the sandwich formula
    sigma_zu = np.zeros((q, q))
    for i in range(n):
        for a in range(q):
            for b in range(q):
                sigma_zu[a, b] += Z[i, a] * Z[i, b] * u[i] ** 2 / n
    mmap = np.zeros((p, q))
    for j in range(p):
        for l in range(q):
            mmap[j, l] = sum(X[i, j] * Z[i, l] for i in range(n)) / n / W[l] / q
    V = mmap @ sigma_zu @ mmap.T
    for j in range(p):
        assert var[j] == pytest.approx(gamma[j] @ V @ gamma[j], abs=1e-10)


def test_nonpositive_variance(rng):
    X = rng.standard_normal((10, 2))
    Z = rng.standard_normal((10, 3))
    with pytest.raises(NonPositiveVariance):
        coordinate_variances(np.zeros((2, 2)), X, Z, None, np.ones(10))


def test_t_statistic_properties():
    assert t_statistic(1.5, 2.0, 100, 1.5) == 0.0
    t1 = t_statistic(1.2, 0.7, 100, 1.0)
    t2 = t_statistic(1.2, 0.7, 200, 1.0)
    assert t2 / t1 == pytest.approx(math.sqrt(2), rel=1e-14)
    with pytest.raises(NonPositiveVariance):
        t_statistic(1.0, 0.0, 10, 0.0)


# ---------------------------------------------------------------- pipeline


def test_pipeline_noiseless_recovery(rng):
    n, p = 200, 3
    Z = rng.standard_normal((n, p))
    X = Z @ (np.eye(p) + 0.2 * rng.standard_normal((p, p))) + 0.1 * rng.standard_normal((n, p))
    beta0 = np.array([1.0, -0.5, 0.0])
    # tiny noise keeps the weights non-degenerate
    Y = X @ beta0 + 1e-7 * rng.standard_normal(n)
    _, _, second = two_step_pipeline(X, Z, Y, CvConfig(grid_size=20))
    assert np.max(np.abs(second.beta - beta0)) <= 1e-3


def test_pipeline_deterministic(rng):
    X, Z, Y, _ = _iv_data(rng, 60, 4, 6)
    a = desparsified_gmm(X, Z, Y, CvConfig(grid_size=10))
    b = desparsified_gmm(X, Z, Y, CvConfig(grid_size=10))
    for name in ("beta_hat", "b_hat", "se", "ci_lower", "ci_upper"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_pipeline_high_dimensional_smoke():
    spec = DesignSpec(design_id=1, n=30, p=40, q=80, B=1)
    data = generate_dataset(spec, 0)
    res = desparsified_gmm(data.X, data.Z, data.Y, CvConfig(grid_size=10))
    assert res.b_hat.shape == (40,)
    assert np.all(res.se > 0)
    assert np.all(res.clime.feasibility_slack <= res.clime.mu + 1e-8)


def test_result_fields_consistent(rng):
    X, Z, Y, beta0 = _iv_data(rng, 120, 4, 8)
    null = np.array([1.0, 1.0, 0.0, 0.0])
    res = desparsified_gmm(X, Z, Y, CvConfig(grid_size=10), alpha=0.1, null=null)
    z = normal_ppf(0.95)
    assert_allclose(res.ci_lower, res.b_hat - z * res.se, rtol=1e-14)
    assert_allclose(res.ci_upper, res.b_hat + z * res.se, rtol=1e-14)
    for j in range(4):
        assert res.t_stat(j, null[j]) == pytest.approx(res.t_stats[j], rel=1e-12)
    assert_allclose(res.sigma_b, res.se * np.sqrt(120))
    # first-step residuals feed the variance
    var = coordinate_variances(res.clime, X, Z, res.weights, res.first_fit.residuals)
    assert_allclose(res.se, np.sqrt(var / 120), rtol=1e-14)
    with pytest.raises(DimensionMismatch):
        desparsified_gmm(X, Z, Y, null=np.zeros(3))
