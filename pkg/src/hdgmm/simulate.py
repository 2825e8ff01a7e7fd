"""Monte Carlo designs and performance summaries.

Data generation for replication ``r`` of a design:

* ``Z_i ~ N_q(0, Omega)`` with ``Omega_jk = rho_z^|j-k|``, drawn as
  ``E @ chol(Omega).T`` from an n x q block of standard normals;
* ``eps_i ~ N_{p+2}(0, I)`` (second n x (p+2) block from the same stream);
  ``u~_i = sqrt(rho_uv) eps_i1 + sqrt(1-rho_uv) eps_i2`` and
  ``v_i = sqrt(rho_uv) eps_i1 1_p + sqrt(1-rho_uv) eps_i3``;
* ``X_i = pi' Z_i + v_i``, ``u_i = u~_i ||Z_i||_2 / sqrt(q)``,
  ``Y_i = X_i' beta0 + u_i``.

The first-stage matrix ``pi`` (q x p) is, by design,

1. ``(2 + 2 rho_z^(q/2))^(-1/2) [I_p; I_p]`` (requires ``q = 2p``);
2. ``1_{q,p} / q``;
3. 0.25 in the first ``q/4`` rows, zero below.

The generator of replication ``r`` is seeded with
:func:`~hdgmm.numerics.mix_seed` ``(base_seed, r)``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import HDGMMError, InvalidSpec
from .inference import desparsified_gmm, normal_ppf, two_step_pipeline
from .lasso_gmm import CvConfig
from .numerics import cholesky, make_rng, mix_seed, toeplitz_correlation

POWER_SHIFT = {1: 0.5, 2: 1.5, 3: 1.5}
TEST_COORD = 1


def default_beta0(p):
    """``(1, 1, 0_{p-8}, 0.5, 0_5)``; for ``p < 8`` the fallback ``(1, 1, 0.5, 0, ...)``."""
    beta = np.zeros(p)
    if p >= 8:
        beta[[0, 1]] = 1.0
        beta[p - 6] = 0.5
    else:
        beta[: min(p, 3)] = [1.0, 1.0, 0.5][: min(p, 3)]
    return beta


@dataclass
class DesignSpec:
    design_id: int
    n: int
    p: int
    q: int
    rho_z: float = 0.5
    rho_uv: float = 0.25
    beta0: np.ndarray | None = None
    B: int = 100
    base_seed: int = 0
    grid_size: int = 50
    folds: int = 5
    alpha: float = 0.05
    noise_scale: float = 1.0
    min_ratio: float = 1e-3

    def __post_init__(self):
        if self.design_id not in (1, 2, 3):
            raise InvalidSpec(f"design_id must be 1, 2 or 3, got {self.design_id}")
        if min(self.n, self.p, self.q) < 1:
            raise InvalidSpec("n, p and q must be positive")
        if self.design_id == 1 and (self.q != 2 * self.p or self.q % 2):
            raise InvalidSpec(f"design 1 needs q = 2p, got p={self.p}, q={self.q}")
        if self.design_id == 3 and self.q % 4:
            raise InvalidSpec(f"design 3 needs q divisible by 4, got q={self.q}")
        if not 0 <= self.rho_uv <= 1:
            raise InvalidSpec(f"rho_uv must lie in [0, 1], got {self.rho_uv}")
        if self.B < 1:
            raise InvalidSpec("B must be at least 1")
        if self.beta0 is None:
            self.beta0 = default_beta0(self.p)
        else:
            self.beta0 = np.asarray(self.beta0, dtype=np.float64)
            if self.beta0.shape != (self.p,):
                raise InvalidSpec(f"beta0 must have {self.p} entries")

    @property
    def canonical_beta(self):
        return self.p >= 8

    @property
    def cv(self):
        return CvConfig(folds=self.folds, grid_size=self.grid_size, min_ratio=self.min_ratio)

    def to_dict(self):
        d = asdict(self)
        d["beta0"] = self.beta0.tolist()
        return d


@dataclass
class Dataset:
    X: np.ndarray
    Z: np.ndarray
    Y: np.ndarray
    beta0: np.ndarray
    u: np.ndarray


@dataclass
class ReplicationOutcome:
    reject_size: bool
    reject_power: bool
    covered: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    ci_lengths: np.ndarray
    sq_error: float
    t_null: float
    delta_diag: float | None
    kkt_gaps: tuple
    clime_excess: float


@dataclass
class SummaryTable:
    size: float
    power: float
    coverage: float
    length: float
    mse: float
    metadata: dict = field(default_factory=dict)

    MEASURES = ("size", "power", "coverage", "length", "mse")

    def rows(self):
        return [(name.capitalize() if name != "mse" else "MSE", getattr(self, name))
                for name in self.MEASURES]


def pi_matrix(spec):
    q, p = spec.q, spec.p
    if spec.design_id == 1:
        scale = (2.0 + 2.0 * spec.rho_z ** (q / 2)) ** -0.5
        return scale * np.kron(np.ones((2, 1)), np.eye(q // 2))
    if spec.design_id == 2:
        return np.ones((q, p)) / q
    pi = np.zeros((q, p))
    pi[: q // 4] = 0.25
    return pi


def generate_dataset(spec, rep_index):
    rng = make_rng(mix_seed(spec.base_seed, rep_index))
    n, p, q = spec.n, spec.p, spec.q
    L = cholesky(toeplitz_correlation(q, spec.rho_z))
    Z = rng.standard_normal((n, q)) @ L.T
    eps = rng.standard_normal((n, p + 2))
    a, b = math.sqrt(spec.rho_uv), math.sqrt(1.0 - spec.rho_uv)
    u_tilde = a * eps[:, 0] + b * eps[:, 1]
    v = a * eps[:, [0]] + b * eps[:, 2:]
    X = Z @ pi_matrix(spec) + v
    u = spec.noise_scale * u_tilde * np.linalg.norm(Z, axis=1) / math.sqrt(q)
    Y = X @ spec.beta0 + u
    return Dataset(X=X, Z=Z, Y=Y, beta0=spec.beta0.copy(), u=u)


def run_replication(spec, rep_index):
    """Full pipeline on one generated dataset, scored against the truth."""
    data = generate_dataset(spec, rep_index)
    try:
        res = desparsified_gmm(data.X, data.Z, data.Y, cv=spec.cv, alpha=spec.alpha)
    except HDGMMError as exc:
        seed = mix_seed(spec.base_seed, rep_index)
        raise type(exc)(f"replication {rep_index} (seed {seed}) failed: {exc}") from exc
    z = normal_ppf(1.0 - spec.alpha / 2.0)
    j = TEST_COORD
    truth = data.beta0
    t_null = res.t_stat(j, truth[j])
    t_alt = res.t_stat(j, truth[j] + POWER_SHIFT[spec.design_id])
    delta = math.sqrt(spec.n) * ((res.clime.gamma_hat @ res.sigma - np.eye(spec.p))
                                 @ (res.beta_hat - truth))
    return ReplicationOutcome(
        reject_size=bool(abs(t_null) > z),
        reject_power=bool(abs(t_alt) > z),
        covered=(res.ci_lower <= truth) & (truth <= res.ci_upper),
        ci_lower=res.ci_lower,
        ci_upper=res.ci_upper,
        ci_lengths=res.ci_upper - res.ci_lower,
        sq_error=float(np.sum((res.b_hat - truth) ** 2)),
        t_null=float(t_null),
        delta_diag=float(delta[j]),
        kkt_gaps=(res.first_fit.kkt_gap, res.second_fit.kkt_gap),
        clime_excess=float(np.max(res.clime.feasibility_slack - res.clime.mu)),
    )


def _run_one(args):
    spec, r = args
    return run_replication(spec, r)


def run_replications(spec, threads=1):
    """All B outcomes, in replication order regardless of scheduling."""
    jobs = [(spec, r) for r in range(spec.B)]
    if threads <= 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_one, jobs))


def summarize(spec, outcomes, runtime=None):
    covered = np.array([o.covered for o in outcomes])
    lengths = np.array([o.ci_lengths for o in outcomes])
    sq = np.array([o.sq_error for o in outcomes])
    meta = {
        "design": spec.design_id,
        "n": spec.n,
        "p": spec.p,
        "q": spec.q,
        "B": len(outcomes),
        "base_seed": spec.base_seed,
        "grid_size": spec.grid_size,
        "folds": spec.folds,
        "alpha": spec.alpha,
        "canonical_beta0": spec.canonical_beta,
        "sum_sq_error": float(sq.mean()),
    }
    if runtime is not None:
        meta["runtime_seconds"] = runtime
    return SummaryTable(
        size=float(np.mean([o.reject_size for o in outcomes])),
        power=float(np.mean([o.reject_power for o in outcomes])),
        coverage=float(covered.mean()),
        length=float(lengths.mean()),
        mse=float(sq.mean() / spec.p),
        metadata=meta,
    )


def run_design(spec, threads=1):
    """Run all replications of `spec` and aggregate the five performance measures."""
    start = time.perf_counter()
    outcomes = run_replications(spec, threads)
    return summarize(spec, outcomes, runtime=time.perf_counter() - start)


def ell1_error_diagnostic(spec, n_list, reps=20):
    """Mean ``||beta_hat - beta0||_1`` of the two-step Lasso-GMM fit for each n."""
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    out = []
    for n in n_list:
        s = replace(spec, n=n, B=reps)
        errs = []
        for r in range(reps):
            data = generate_dataset(s, r)
            _, _, second = two_step_pipeline(data.X, data.Z, data.Y, s.cv)
            errs.append(float(np.sum(np.abs(second.beta - data.beta0))))
        out.append(float(np.mean(errs)))
    return out
