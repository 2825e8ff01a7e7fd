"""First-differenced dynamic panels as a cross-sectional GMM problem.

Model ``y_it = rho y_i,t-1 + x_it' delta + mu_i + u_it`` for ``t = 1..T``
with ``y_i0 = 0``. Differencing removes ``mu_i``; the stacked equations are
the differenced ones for ``t = 3..T`` (``n (T - 2)`` rows, unit-major, period
ascending), with regressors ``(dy_i,t-1, dx_it')``.

Instrument columns (``q = (T-2)(T-1)/2 + T(T-1)K``):

* lagged levels: for ``t = 3..T`` a block holding ``y_i1, ..., y_i,t-2``,
  nonzero only on rows of period t;
* strictly exogenous regressors: for ``s = 2..T`` a block of the full
  history ``x_i1, ..., x_iT`` (period-major, then k), nonzero only on rows
  of period s. The ``s = 2`` block therefore has no nonzero rows in the
  stack; it is kept so the column count matches the moment count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidSpec, TooFewPeriods
from .numerics import make_rng


@dataclass
class PanelData:
    y: np.ndarray
    x: np.ndarray
    y0_zero: bool = True
    mu: np.ndarray | None = None
    u: np.ndarray | None = None
    rho0: float | None = None
    delta0: np.ndarray | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 2:
            x = x[:, :, None]
        if x.size == 0:
            x = np.zeros(self.y.shape + (0,))
        self.x = x
        if self.y.ndim != 2:
            raise DimensionMismatch(f"y must be n x T, got shape {self.y.shape}")
        if self.x.shape[:2] != self.y.shape:
            raise DimensionMismatch(f"x has shape {self.x.shape}, y has {self.y.shape}")
        if self.y.shape[1] < 3:
            raise TooFewPeriods(f"need T >= 3 periods, got {self.y.shape[1]}")

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def T(self):
        return self.y.shape[1]

    @property
    def K(self):
        return self.x.shape[2]


@dataclass
class StackedGmm:
    Y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    unit: np.ndarray
    period: np.ndarray

    @property
    def q(self):
        return self.Z.shape[1]


def instrument_count(T, K):
    return (T - 2) * (T - 1) // 2 + T * (T - 1) * K


def _lag_offset(t):
    # columns used by the lagged-level blocks of periods 3..t-1
    return (t - 3) * (t - 2) // 2


def panel_to_gmm(data):
    """Stack differenced equations and build the block instrument matrix."""
    if data.T < 3:
        raise TooFewPeriods(f"need T >= 3 periods, got {data.T}")
    n, T, K = data.n, data.T, data.K
    y = data.y
    ylag = np.concatenate([np.zeros((n, 1)), y[:, :-1]], axis=1)
    dy = y - ylag
    dx = np.diff(data.x, axis=1)  # dx[:, t-2] is period t (t = 2..T)

    periods = np.arange(3, T + 1)
    rows = n * (T - 2)
    Y = dy[:, 2:].reshape(rows)
    X = np.empty((rows, 1 + K))
    X[:, 0] = dy[:, 1:-1].reshape(rows)
    X[:, 1:] = dx[:, 1:, :].reshape(rows, K)

    q_lag = (T - 2) * (T - 1) // 2
    q = instrument_count(T, K)
    Z = np.zeros((n, T - 2, q))
    history = data.x.reshape(n, T * K)
    for col, t in enumerate(periods):
        start = _lag_offset(t)
        Z[:, col, start:start + t - 2] = y[:, : t - 2]
        xs = q_lag + (t - 2) * T * K
        Z[:, col, xs:xs + T * K] = history
    return StackedGmm(
        Y=Y,
        X=X,
        Z=Z.reshape(rows, q),
        unit=np.repeat(np.arange(n), T - 2),
        period=np.tile(periods, n),
    )


def simulate_panel(n, T, K, rho0, delta0, seed, mu_scale=1.0, u_scale=1.0, mu_shift=0.0):
    """Draw a balanced panel with ``y_i0 = 0``.

    ``mu_i``, ``x_itk`` and ``u_it`` are independent standard normals (drawn
    in that order), scaled by `mu_scale` / `u_scale`; `mu_shift` is added to
    every ``mu_i``.
    """
    if not abs(rho0) < 1:
        raise InvalidSpec(f"|rho0| must be < 1, got {rho0}")
    if T < 3:
        raise TooFewPeriods(f"need T >= 3 periods, got {T}")
    delta0 = np.broadcast_to(np.asarray(delta0, dtype=np.float64), (K,)).copy()
    rng = make_rng(seed)
    mu = mu_scale * rng.standard_normal(n) + mu_shift
    x = rng.standard_normal((n, T, K))
    u = u_scale * rng.standard_normal((n, T))
    y = np.zeros((n, T))
    prev = np.zeros(n)
    for t in range(T):
        prev = rho0 * prev + x[:, t, :] @ delta0 + mu + u[:, t]
        y[:, t] = prev
    return PanelData(y=y, x=x, mu=mu, u=u, rho0=float(rho0), delta0=delta0)


def stacked_error_differences(data):
    """``u_it - u_i,t-1`` for the stacked rows (needs the simulated ``u``)."""
    if data.u is None:
        raise ValueError("panel carries no error draws")
    return (data.u[:, 2:] - data.u[:, 1:-1]).reshape(-1)
