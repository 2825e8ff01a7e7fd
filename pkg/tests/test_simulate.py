import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hdgmm.errors import InvalidSpec
from hdgmm.numerics import toeplitz_correlation
from hdgmm.simulate import (
    DesignSpec,
    default_beta0,
    ell1_error_diagnostic,
    generate_dataset,
    pi_matrix,
    run_design,
    run_replication,
    run_replications,
    summarize,
)


def test_omega_entry():
    assert toeplitz_correlation(5, 0.5)[0, 2] == 0.25


def test_design1_pi_scale():
    spec = DesignSpec(design_id=1, n=10, p=2, q=4)
    pi = pi_matrix(spec)
    assert pi[0, 0] == pytest.approx(1 / math.sqrt(2.5), rel=1e-15)
    assert_allclose(pi, np.vstack([np.eye(2), np.eye(2)]) / math.sqrt(2.5), rtol=1e-15)


def test_design2_and_3_pi():
    assert_allclose(pi_matrix(DesignSpec(design_id=2, n=5, p=3, q=6)), np.full((6, 3), 1 / 6))
    pi3 = pi_matrix(DesignSpec(design_id=3, n=5, p=3, q=8))
    assert np.all(pi3[:2] == 0.25) and np.all(pi3[2:] == 0.0)


def test_beta0_layout():
    b = default_beta0(10)
    assert b.tolist() == [1, 1, 0, 0, 0.5, 0, 0, 0, 0, 0]
    assert np.count_nonzero(default_beta0(50)) == 3
    assert default_beta0(50)[44] == 0.5
    assert default_beta0(4).tolist() == [1, 1, 0.5, 0]
    assert not DesignSpec(design_id=2, n=5, p=4, q=6).canonical_beta


@pytest.mark.parametrize("kwargs", [
    dict(design_id=4, n=10, p=2, q=4),
    dict(design_id=1, n=10, p=2, q=6),
    dict(design_id=3, n=10, p=2, q=6),
    dict(design_id=2, n=10, p=2, q=4, B=0),
    dict(design_id=2, n=10, p=2, q=4, rho_uv=1.5),
    dict(design_id=2, n=10, p=2, q=4, beta0=[1.0]),
    dict(design_id=2, n=0, p=2, q=4),
])
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidSpec):
        DesignSpec(**kwargs)


def test_uncorrelated_errors_when_rho_uv_zero():
    spec = DesignSpec(design_id=2, n=100_000, p=1, q=4, rho_uv=0.0, base_seed=3)
    data = generate_dataset(spec, 0)
    v = data.X[:, 0] - data.Z @ pi_matrix(spec)[:, 0]
    u_tilde = data.u / (np.linalg.norm(data.Z, axis=1) / 2.0)
    assert abs(np.corrcoef(u_tilde, v)[0, 1]) <= 0.01


def test_endogeneity_when_rho_uv_positive():
    spec = DesignSpec(design_id=2, n=20_000, p=2, q=4, base_seed=3)
    data = generate_dataset(spec, 0)
    v = data.X - data.Z @ pi_matrix(spec)
    assert np.corrcoef(data.u, v[:, 0])[0, 1] > 0.15


def test_heteroskedasticity_wiring():
    spec = DesignSpec(design_id=1, n=10_000, p=10, q=20, base_seed=11)
    data = generate_dataset(spec, 0)
    znorm = np.sum(data.Z**2, axis=1)
    assert np.corrcoef(data.u**2, znorm)[0, 1] > 0


def test_z_covariance_matches_omega():
    spec = DesignSpec(design_id=2, n=50_000, p=2, q=5, base_seed=1)
    Z = generate_dataset(spec, 0).Z
    assert np.max(np.abs(Z.T @ Z / spec.n - toeplitz_correlation(5, 0.5))) < 0.03


def test_dataset_reproducible_and_distinct():
    spec = DesignSpec(design_id=1, n=50, p=5, q=10, base_seed=9)
    a, b = generate_dataset(spec, 2), generate_dataset(spec, 2)
    assert a.Y.tobytes() == b.Y.tobytes() and a.Z.tobytes() == b.Z.tobytes()
    assert not np.array_equal(a.Y, generate_dataset(spec, 3).Y)
    assert_allclose(a.Y, a.X @ spec.beta0 + a.u, rtol=0, atol=1e-14)


def test_single_replication_proportions():
    spec = DesignSpec(design_id=1, n=100, p=5, q=10, B=1, base_seed=1, grid_size=10)
    table = run_design(spec)
    for name in ("size", "power"):
        assert getattr(table, name) in (0.0, 1.0)
    assert 0.0 <= table.coverage <= 1.0
    assert [r[0] for r in table.rows()] == ["Size", "Power", "Coverage", "Length", "MSE"]


def test_coverage_recomputed_from_bounds():
    spec = DesignSpec(design_id=2, n=100, p=5, q=10, B=3, base_seed=4, grid_size=10)
    outcomes = [run_replication(spec, r) for r in range(3)]
    for o in outcomes:
        covered = np.array([lo <= b <= hi for lo, b, hi in zip(o.ci_lower, spec.beta0, o.ci_upper)])
        assert np.array_equal(covered, o.covered)
        assert_allclose(o.ci_lengths, o.ci_upper - o.ci_lower)
    table = summarize(spec, outcomes)
    expected = np.mean([[lo <= b <= hi for lo, b, hi in zip(o.ci_lower, spec.beta0, o.ci_upper)]
                        for o in outcomes])
    assert table.coverage == expected
    assert table.mse == pytest.approx(table.metadata["sum_sq_error"] / spec.p)


def test_run_design_deterministic():
    spec = DesignSpec(design_id=3, n=80, p=4, q=8, B=3, base_seed=5, grid_size=10)
    a, b = run_design(spec), run_design(spec)
    for name in ("size", "power", "coverage", "length", "mse"):
        assert getattr(a, name) == getattr(b, name)


def test_ell1_diagnostic_shape_and_order():
    spec = DesignSpec(design_id=1, n=100, p=4, q=8, base_seed=2, grid_size=10)
    out = ell1_error_diagnostic(spec, [60, 120], reps=2)
    assert len(out) == 2 and all(e > 0 for e in out)
    with pytest.raises(ValueError):
        ell1_error_diagnostic(spec, [120, 60], reps=2)


def test_ell1_diagnostic_noiseless():
    # u = 0 up to a tiny scale that keeps the second-step weights defined
    spec = DesignSpec(design_id=1, n=200, p=4, q=8, base_seed=2, grid_size=30, noise_scale=1e-4,
                      min_ratio=1e-7)
    out = ell1_error_diagnostic(spec, [200], reps=2)
    assert out[0] <= 1e-3


def test_parallel_matches_serial():
    spec = DesignSpec(design_id=2, n=60, p=4, q=8, B=4, base_seed=8, grid_size=8)
    serial = run_replications(spec, threads=1)
    parallel = run_replications(spec, threads=2)
    for a, b in zip(serial, parallel):
        assert a.ci_lower.tobytes() == b.ci_lower.tobytes()
        assert a.t_null == b.t_null
