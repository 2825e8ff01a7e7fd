"""Penalized GMM estimation by reduction to an ordinary Lasso.

With a diagonal weight ``w_l`` (``w = 1`` for the first step,
``w_l = 1 / sigma_l^2`` for the second) the GMM quadratic form

    (Y - X b)' Z diag(w) Z' (Y - X b) / (q n^2)

equals ``||r - A b||_2^2`` for

    A = diag(sqrt(w)) Z'X / (n sqrt(q)),   r = diag(sqrt(w)) Z'Y / (n sqrt(q)).

:func:`lasso_solve` minimises ``||r - A b||^2 + 2 lam ||b||_1`` by cyclic
coordinate descent on the Gram matrix ``A'A``. At a solution the gradient
``g = -A'(r - A b)`` satisfies ``|g_j| <= lam`` on zero coordinates and
``g_j = -lam * sign(b_j)`` elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DegenerateWeight, DimensionMismatch, InputError, MaxIterationsExceeded
from .numerics import as_matrix, as_vector

COEF_TOL = 1e-8
KKT_TOL = 1e-6
MAX_SWEEPS = 10_000
WEIGHT_FLOOR = 1e-10


@dataclass
class GmmDesign:
    """Least-squares form ``(A, r)`` of a weighted GMM criterion."""

    A: np.ndarray
    r: np.ndarray
    n: int
    weight_kind: str
    gram: np.ndarray = field(repr=False)
    corr: np.ndarray = field(repr=False)
    X: np.ndarray | None = field(default=None, repr=False)
    Y: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_arrays(cls, A, r, n=1):
        """Design for an arbitrary least-squares pair (no X/Y attached)."""
        A = as_matrix(A, "A")
        r = as_vector(r, "r")
        if A.shape[0] != r.shape[0]:
            raise DimensionMismatch(f"A has {A.shape[0]} rows, r has {r.shape[0]}")
        return cls(A=A, r=r, n=n, weight_kind="identity", gram=A.T @ A, corr=A.T @ r)

    @property
    def p(self):
        return self.A.shape[1]

    @property
    def q(self):
        return self.A.shape[0]

    def loss(self, beta):
        resid = self.r - self.A @ beta
        return float(resid @ resid)

    def objective(self, beta, lam):
        return self.loss(beta) + 2.0 * lam * float(np.sum(np.abs(beta)))

    def gradient(self, beta):
        """``-A'(r - A beta)``, i.e. ``-X'Z/n W/q Z'(Y - X beta)/n``."""
        return self.gram @ beta - self.corr


@dataclass
class LassoFit:
    beta: np.ndarray
    lam: float
    residuals: np.ndarray | None
    kkt_gap: float
    active_set: np.ndarray
    n_sweeps: int
    objective_trace: np.ndarray | None = field(default=None, repr=False)


@dataclass
class CvConfig:
    """K-fold settings. ``grid=None`` builds :func:`default_lambda_grid` per call."""

    folds: int = 5
    grid: np.ndarray | None = None
    grid_size: int = 50
    min_ratio: float = 1e-3


def weight_vector(W, q):
    """Diagonal of the weight matrix: ones for identity, ``1/sigma_sq`` otherwise.

    `W` may be None (identity), an object with a ``sigma_sq`` attribute, or a
    q-vector of variances.
    """
    if W is None:
        return np.ones(q), "identity"
    sigma_sq = as_vector(getattr(W, "sigma_sq", W), "sigma_sq")
    if sigma_sq.shape[0] != q:
        raise DimensionMismatch(f"weight has {sigma_sq.shape[0]} entries, Z has {q} columns")
    if np.any(sigma_sq <= WEIGHT_FLOOR):
        bad = np.flatnonzero(sigma_sq <= WEIGHT_FLOOR)
        raise DegenerateWeight(f"instrument variances <= {WEIGHT_FLOOR} at columns {bad.tolist()}")
    return 1.0 / sigma_sq, "diagonal"


def _check_xzy(X, Z, Y):
    X = as_matrix(X, "X")
    Z = as_matrix(Z, "Z")
    Y = as_vector(Y, "Y")
    if not X.shape[0] == Z.shape[0] == Y.shape[0]:
        raise DimensionMismatch(
            f"row counts differ: X has {X.shape[0]}, Z has {Z.shape[0]}, Y has {Y.shape[0]}"
        )
    return X, Z, Y


def build_design(X, Z, Y, W=None, check=True):
    """Factor the weighted GMM loss as ``||r - A beta||^2``.

    Parameters
    ----------
    X : (n, p) array
    Z : (n, q) array
    Y : (n,) array
    W : None, WeightMatrix or (q,) array of instrument variances
        None means the identity weight of the first step.
    check : bool
        Verify the loss identity on a random coefficient vector.
    """
    X, Z, Y = _check_xzy(X, Z, Y)
    n, q = Z.shape
    w, kind = weight_vector(W, q)
    scale = np.sqrt(w) / (n * np.sqrt(q))
    A = (Z.T @ X) * scale[:, None]
    r = (Z.T @ Y) * scale
    design = GmmDesign(A=A, r=r, n=n, weight_kind=kind, gram=A.T @ A, corr=A.T @ r, X=X, Y=Y)
    if check:
        beta = np.random.default_rng(0).standard_normal(X.shape[1])
        m = Z.T @ (Y - X @ beta)
        direct = float(m @ (w / q * m)) / n**2
        if abs(design.loss(beta) - direct) > 1e-10 * max(1.0, abs(direct)):
            raise ArithmeticError("GMM loss factorisation failed")
    return design


@numba.njit(cache=True)
def _coordinate_descent(G, c, lam, beta, tol, kkt_tol, max_sweeps, trace):
    p = c.shape[0]
    h = c - G @ beta
    gap = np.inf
    for sweep in range(max_sweeps):
        max_change = 0.0
        for j in range(p):
            gjj = G[j, j]
            if gjj <= 0.0:
                new = 0.0
            else:
                z = h[j] + gjj * beta[j]
                if z > lam:
                    new = (z - lam) / gjj
                elif z < -lam:
                    new = (z + lam) / gjj
                else:
                    new = 0.0
            d = new - beta[j]
            if d != 0.0:
                for k in range(p):
                    h[k] -= d * G[k, j]
                beta[j] = new
                if abs(d) > max_change:
                    max_change = abs(d)
        if trace.shape[0] > 0:
            pen = 0.0
            for j in range(p):
                pen += abs(beta[j])
            trace[sweep] = beta @ (G @ beta) - 2.0 * (c @ beta) + 2.0 * lam * pen
        if max_change <= tol:
            h = c - G @ beta
            gap = 0.0
            for j in range(p):
                if beta[j] == 0.0:
                    v = abs(h[j]) - lam
                elif beta[j] > 0.0:
                    v = abs(h[j] - lam)
                else:
                    v = abs(h[j] + lam)
                if v > gap:
                    gap = v
            if gap <= kkt_tol:
                return sweep + 1, gap, True
    return max_sweeps, gap, False


def kkt_gap(design, beta, lam):
    """Largest violation of the Lasso stationarity conditions."""
    g = design.gradient(beta)
    zero = beta == 0
    viol = np.where(zero, np.abs(g) - lam, np.abs(g + lam * np.sign(beta)))
    return float(max(0.0, viol.max()))


def lasso_solve(design, lam, beta0=None, tol=COEF_TOL, kkt_tol=KKT_TOL,
                max_sweeps=MAX_SWEEPS, debug=False):
    """Minimise ``||r - A b||^2 + 2 lam ||b||_1`` by cyclic coordinate descent.

    Sweeps run over ``j = 0..p-1`` in order until the largest coefficient
    change in a sweep is at most `tol` and the KKT gap is at most `kkt_tol`.
    `beta0` warm-starts the iteration. With ``debug=True`` the objective is
    recorded after every sweep and checked to be non-increasing.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    p = design.p
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)
    trace = np.empty(max_sweeps if debug else 0)
    sweeps, gap, ok = _coordinate_descent(
        design.gram, design.corr, float(lam), beta, tol, kkt_tol, max_sweeps, trace
    )
    if not ok:
        raise MaxIterationsExceeded(
            f"coordinate descent did not converge in {max_sweeps} sweeps (KKT gap {gap:.3g})"
        )
    objective_trace = None
    if debug:
        objective_trace = trace[:sweeps].copy()
        rises = np.diff(objective_trace)
        slack = 1e-12 * max(1.0, float(np.max(np.abs(objective_trace))))
        if np.any(rises > slack):
            raise AssertionError("penalized objective increased during a sweep")
    residuals = None
    if design.X is not None and design.Y is not None:
        residuals = design.Y - design.X @ beta
    return LassoFit(
        beta=beta,
        lam=float(lam),
        residuals=residuals,
        kkt_gap=kkt_gap(design, beta, lam),
        active_set=np.flatnonzero(beta),
        n_sweeps=int(sweeps),
        objective_trace=objective_trace,
    )


def lasso_path(design, lambdas, **kwargs):
    """Fits along `lambdas` (any order), warm-starting from larger to smaller values.

    Returns a list of :class:`LassoFit` aligned with the input order.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    order = np.argsort(-lambdas, kind="stable")
    fits = [None] * len(lambdas)
    beta = None
    for idx in order:
        fit = lasso_solve(design, lambdas[idx], beta0=beta, **kwargs)
        fits[idx] = fit
        beta = fit.beta
    return fits


def default_lambda_grid(design, count=50, min_ratio=1e-3):
    """`count` log-spaced values from ``max|A'r|`` down to `min_ratio` times that."""
    if count < 2:
        raise ValueError("grid needs at least 2 values")
    if not 0 < min_ratio < 1:
        raise ValueError(f"min_ratio must lie in (0, 1), got {min_ratio}")
    lam_max = float(np.max(np.abs(design.corr)))
    if not lam_max > 0:
        raise InputError("Z'Y is identically zero; no informative lambda grid")
    return np.geomspace(lam_max, lam_max * min_ratio, count)


def fold_indices(n, K):
    """Consecutive folds; the first ``n % K`` folds get one extra index."""
    sizes = np.full(K, n // K)
    sizes[: n % K] += 1
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [np.arange(bounds[k], bounds[k + 1]) for k in range(K)]


def cv_curve(X, Z, Y, W=None, config=None):
    """Cross-validation criterion for every grid value.

    Each fold's training fit minimises the GMM form built from the other
    folds (moments averaged over the training rows). The held-out criterion
    is ``m_k' diag(w)/q m_k`` with ``m_k`` the *sum* of ``Z_i u_i`` over the
    fold, summed over folds.

    Returns
    -------
    grid : (L,) array
    criterion : (L,) array
    """
    config = config or CvConfig()
    X, Z, Y = _check_xzy(X, Z, Y)
    n, q = Z.shape
    K = config.folds
    if not 2 <= K <= n:
        raise DimensionMismatch(f"{K}-fold CV needs 2 <= K <= n, got n={n}")
    if config.grid is None:
        grid = default_lambda_grid(build_design(X, Z, Y, W, check=False), config.grid_size,
                                   config.min_ratio)
    else:
        grid = np.asarray(config.grid, dtype=np.float64).ravel()
        if grid.size == 0:
            raise ValueError("lambda grid is empty")
    w, _ = weight_vector(W, q)
    crit = np.zeros(grid.shape[0])
    for idx in fold_indices(n, K):
        train = np.ones(n, dtype=bool)
        train[idx] = False
        design = build_design(X[train], Z[train], Y[train], W, check=False)
        betas = np.array([f.beta for f in lasso_path(design, grid)])
        zy = Z[idx].T @ Y[idx]
        zx = Z[idx].T @ X[idx]
        held = zy[None, :] - betas @ zx.T
        crit += (held**2) @ (w / q)
    return grid, crit


def cross_validate(X, Z, Y, W=None, config=None):
    """Grid value minimising the K-fold GMM criterion; ties go to the larger lambda."""
    grid, crit = cv_curve(X, Z, Y, W, config)
    best = np.flatnonzero(crit == crit.min())
    return float(grid[best].max())
