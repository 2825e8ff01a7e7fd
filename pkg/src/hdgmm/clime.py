"""Row-wise l1-minimal approximate inverse of the GMM curvature matrix.

For the (possibly singular) p x p matrix ``S = (X'Z/n) (W/q) (Z'X/n)`` each
row of the approximate inverse solves

    min ||a||_1   s.t.   ||a S - e_j'||_inf <= mu_j,

with ``mu_j = max(1.2 * inf_a ||a S - e_j'||_inf, 1e-8)``. Both the infimum
and the constrained problem are linear programs over ``a = a_plus - a_minus``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .lasso_gmm import build_design
from .lp import LpProblem, lp_solve
from .numerics import as_matrix

MU_FACTOR = 1.2
MU_FLOOR = 1e-8


@dataclass
class ClimeResult:
    gamma_hat: np.ndarray
    mu: np.ndarray
    feasibility_slack: np.ndarray


def sigma_hat(X, Z, W=None):
    """``A'A`` for the design of :func:`~hdgmm.lasso_gmm.build_design`.

    This equals ``(X'Z/n) diag(w)/q (Z'X/n)`` and is symmetric PSD by
    construction. Rank is at most ``min(n, q, p)``.
    """
    X = np.asarray(X, dtype=np.float64)
    design = build_design(X, Z, np.zeros(X.shape[0]), W, check=False)
    S = design.gram
    return 0.5 * (S + S.T)


def _check_sigma(sigma):
    sigma = as_matrix(sigma, "sigma")
    if sigma.shape[0] != sigma.shape[1]:
        raise DimensionMismatch(f"sigma must be square, got {sigma.shape}")
    return sigma


def row_residual(a, sigma, j):
    """``||a sigma - e_j'||_inf``."""
    v = a @ sigma
    v[j] -= 1.0
    return float(np.max(np.abs(v)))


def clime_inf(sigma, j):
    """``inf_a ||a sigma - e_j'||_inf`` as an LP in ``(a_plus, a_minus, t)``."""
    sigma = _check_sigma(sigma)
    p = sigma.shape[0]
    e = np.zeros(p)
    e[j] = 1.0
    ones = np.ones((p, 1))
    # rows: a S - t <= e_j  and  -a S - t <= -e_j, with S' since a is a row
    St = sigma.T
    G = np.block([[St, -St, -ones], [-St, St, -ones]])
    h = np.concatenate([e, -e])
    c = np.zeros(2 * p + 1)
    c[-1] = 1.0
    res = lp_solve(LpProblem(c, G, h))
    return max(res.value, 0.0)


def clime_mu(sigma, j, factor=MU_FACTOR, floor=MU_FLOOR):
    """Per-row constraint level ``max(factor * inf, floor)``."""
    return max(factor * clime_inf(sigma, j), floor)


def clime_row(sigma, j, mu):
    """l1-minimal row ``a`` with ``||a sigma - e_j'||_inf <= mu``.

    Raises
    ------
    Infeasible
        If `mu` is below the smallest attainable residual for row `j`.
    """
    sigma = _check_sigma(sigma)
    p = sigma.shape[0]
    e = np.zeros(p)
    e[j] = 1.0
    St = sigma.T
    G = np.block([[St, -St], [-St, St]])
    h = np.concatenate([mu + e, mu - e])
    res = lp_solve(LpProblem(np.ones(2 * p), G, h))
    return res.x[:p] - res.x[p:]


def clime_full(sigma, mu=None):
    """Approximate inverse from all rows.

    Parameters
    ----------
    sigma : (p, p) array
    mu : None, float or (p,) array
        Constraint levels; None uses :func:`clime_mu` for each row.
    """
    sigma = _check_sigma(sigma)
    p = sigma.shape[0]
    if mu is None:
        mu = np.array([clime_mu(sigma, j) for j in range(p)])
    else:
        mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (p,)).copy()
    gamma = np.vstack([clime_row(sigma, j, mu[j]) for j in range(p)])
    resid = gamma @ sigma - np.eye(p)
    return ClimeResult(
        gamma_hat=gamma,
        mu=mu,
        feasibility_slack=np.max(np.abs(resid), axis=1),
    )
