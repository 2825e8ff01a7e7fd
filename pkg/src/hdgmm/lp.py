"""Dense two-phase primal simplex for small linear programs.

Solves ``min c'x  s.t.  G x <= h, x >= 0``. Slack variables turn the rows
into equalities; rows with a negative right-hand side are negated and get an
artificial variable, whose sum is driven to zero in phase 1. Entering and
leaving variables follow Bland's lowest-index rule, so the method terminates
on degenerate problems. The optimal basis is re-solved against the original
rows at the end to clean up accumulated pivoting error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CycleDetected, DimensionMismatch, Infeasible, Unbounded
from .numerics import as_matrix, as_vector

PIVOT_EPS = 1e-11
COST_EPS = 1e-10


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        c = as_vector(self.c, "c")
        G = as_matrix(self.G, "G")
        h = as_vector(self.h, "h")
        if G.shape != (h.shape[0], c.shape[0]):
            raise DimensionMismatch(f"G is {G.shape}, expected ({h.shape[0]}, {c.shape[0]})")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)


@dataclass
class LpResult:
    x: np.ndarray
    value: float
    basis: np.ndarray
    iterations: int
    reduced_costs: np.ndarray


def _pivot(T, row, col):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])


def _reduced_cost_row(T, basis, cost):
    m = len(basis)
    cb = cost[basis]
    row = np.empty(T.shape[1])
    row[:-1] = cost - cb @ T[:m, :-1]
    row[-1] = -(cb @ T[:m, -1])
    return row


def _run(T, basis, allowed, max_iter, cost_eps):
    """Bland's-rule simplex on a canonical tableau; modifies T and basis in place."""
    m = len(basis)
    for it in range(max_iter):
        rc = T[-1, :-1]
        candidates = np.flatnonzero((rc < -cost_eps) & allowed)
        if candidates.size == 0:
            return it
        col = candidates[0]
        column = T[:m, col]
        rows = np.flatnonzero(column > PIVOT_EPS)
        if rows.size == 0:
            raise Unbounded(f"objective unbounded along column {col}")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = ties[np.argmin(basis[ties])]
        _pivot(T, row, col)
        basis[row] = col
    raise CycleDetected(f"simplex exceeded {max_iter} pivots")


def lp_solve(problem, max_iter=None):
    """Solve ``min c'x  s.t.  G x <= h, x >= 0``.

    Returns
    -------
    LpResult
        Vertex-optimal ``x``, objective value, final basis (indices into
        ``[x, slacks, artificials]``), pivot count and phase-2 reduced costs
        of the ``[x, slacks]`` columns.

    Raises
    ------
    Infeasible, Unbounded, CycleDetected
    """
    if not isinstance(problem, LpProblem):
        problem = LpProblem(*problem)
    c, G, h = problem.c, problem.G, problem.h
    m, d = G.shape
    neg = h < 0
    n_art = int(neg.sum())
    N = d + m + n_art
    sign = np.where(neg, -1.0, 1.0)

    M = np.zeros((m, N))
    M[:, :d] = G * sign[:, None]
    M[np.arange(m), d + np.arange(m)] = sign
    art_rows = np.flatnonzero(neg)
    M[art_rows, d + m + np.arange(n_art)] = 1.0
    b = h * sign

    basis = np.where(neg, 0, d + np.arange(m))
    basis[art_rows] = d + m + np.arange(n_art)

    T = np.zeros((m + 1, N + 1))
    T[:m, :N] = M
    T[:m, -1] = b
    if max_iter is None:
        max_iter = 200 * (m + N)
    scale = max(1.0, float(np.max(np.abs(c))))
    iterations = 0

    if n_art:
        cost1 = np.zeros(N)
        cost1[d + m:] = 1.0
        T[-1] = _reduced_cost_row(T, basis, cost1)
        iterations += _run(T, basis, np.ones(N, dtype=bool), max_iter, COST_EPS)
        infeas = -T[-1, -1]
        if infeas > 1e-9 * max(1.0, float(np.max(np.abs(b)))):
            raise Infeasible(f"phase 1 ended with infeasibility {infeas:.3g}")
        # drive zero-level artificials out of the basis where possible
        for row in np.flatnonzero(basis >= d + m):
            cols = np.flatnonzero(np.abs(T[row, : d + m]) > PIVOT_EPS)
            if cols.size:
                _pivot(T, row, cols[0])
                basis[row] = cols[0]

    cost2 = np.zeros(N)
    cost2[:d] = c
    allowed = np.zeros(N, dtype=bool)
    allowed[: d + m] = True
    T[-1] = _reduced_cost_row(T, basis, cost2)
    iterations += _run(T, basis, allowed, max_iter, COST_EPS * scale)

    z = np.zeros(N)
    z[basis] = T[:m, -1]
    real = basis < d + m
    try:
        z_ref = np.zeros(N)
        sol = np.linalg.solve(M[np.ix_(real, basis[real])], b[real]) if real.all() else None
        if sol is not None:
            z_ref[basis] = sol
            if np.all(z_ref >= -1e-9):
                z = z_ref
    except np.linalg.LinAlgError:
        pass
    z = np.where(z < 0, 0.0, z)
    x = z[:d]
    return LpResult(
        x=x,
        value=float(c @ x),
        basis=basis.copy(),
        iterations=iterations,
        reduced_costs=T[-1, : d + m].copy(),
    )
