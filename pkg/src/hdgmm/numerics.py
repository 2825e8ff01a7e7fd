"""Dense linear-algebra kernels, norms and seeded Gaussian generation.

Matrices are plain C-ordered (row-major) ``float64`` numpy arrays. The
helpers :func:`as_matrix` and :func:`as_vector` validate shape and
finiteness at the boundary of every public entry point.

Random numbers come from numpy's Philox4x64 counter-based bit generator;
normal variates use numpy's ziggurat sampler (``Generator.standard_normal``).
Both algorithms are fixed by numpy's stream-compatibility policy, so a seed
reproduces the same stream on every platform.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, EmptyInput, NotPositiveDefinite

SYMMETRY_TOL = 1e-10
PIVOT_TOL = 1e-12

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def as_matrix(a, name="matrix"):
    """Return `a` as a finite 2-d float64 C-contiguous array."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptyInput(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_vector(v, name="vector"):
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptyInput(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def cholesky(a):
    """Lower-triangular Cholesky factor ``L`` with ``L @ L.T == a``.

    Parameters
    ----------
    a : array_like, shape (d, d)
        Symmetric (to within 1e-10) positive-definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If a pivot ``a_jj - sum_k L_jk**2`` is at most 1e-12.
    """
    a = as_matrix(a, "a")
    d = a.shape[0]
    if a.shape[1] != d:
        raise DimensionMismatch(f"cholesky needs a square matrix, got {a.shape}")
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
        raise NotPositiveDefinite("matrix is not symmetric")
    L = np.zeros_like(a)
    for j in range(d):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= PIVOT_TOL:
            raise NotPositiveDefinite(f"pivot {pivot:.3g} at column {j}")
        L[j, j] = np.sqrt(pivot)
        L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def toeplitz_correlation(d, rho):
    """``Omega[j, k] = rho ** |j - k|`` for a d x d matrix."""
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(np.float64)


def mix_seed(base_seed, index):
    """Derive a replication seed: ``base_seed XOR (index * 0x9E3779B97F4A7C15)`` mod 2**64."""
    return (int(base_seed) ^ ((int(index) * _GOLDEN) & _MASK64)) & _MASK64


def make_rng(seed):
    """Deterministic generator backed by the Philox counter-based bit generator."""
    return np.random.Generator(np.random.Philox(int(seed) & _MASK64))


def standard_normal_vector(rng, d):
    if d < 1:
        raise ValueError("d must be >= 1")
    return rng.standard_normal(d)


def standard_normal_matrix(rng, rows, cols):
    return rng.standard_normal((rows, cols))


def _nonempty(v):
    arr = np.asarray(v, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("norm of an empty input")
    return arr


def max_abs(v):
    return float(np.max(np.abs(_nonempty(v))))


def l1_norm(v):
    return float(np.sum(np.abs(_nonempty(v))))


def l2_norm(v):
    v = _nonempty(v)
    scale = np.max(np.abs(v))
    if scale == 0.0:
        return 0.0
    # scaled to avoid under/overflow in the squares
    return float(scale * np.sqrt(np.sum((v / scale) ** 2)))


def matrix_max_norm(a):
    """Largest absolute entry of a matrix."""
    return max_abs(a)
