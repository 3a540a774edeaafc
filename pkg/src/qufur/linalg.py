"""Incremental regularized least squares over the queried examples.

The estimator state carries the inverse regularized Gram matrix
``M^-1`` with ``M = lam * I + sum_i x_i x_i^T`` and the label-weighted input
sum ``s = sum_i y_i x_i``. Every round needs quadratic forms in ``M^-1``, so
the inverse is maintained directly via rank-one (Sherman-Morrison) updates;
a full refactorization from the accumulated forward matrix every
``REBUILD_PERIOD`` updates keeps floating-point drift bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Full-refactorization cadence; amortized cost is negligible and worst-case
# Sherman-Morrison drift stays well below test tolerances.
REBUILD_PERIOD = 256


@dataclass
class RlsState:
    """Ridge posterior over the queried set. Plain value: copy and share freely."""

    dim: int
    lam: float
    gram_inv: np.ndarray  # (d, d) inverse of lam*I + sum of x x^T
    gram: np.ndarray      # (d, d) forward accumulation, used for rebuilds
    xty: np.ndarray       # (d,) sum of y * x
    query_count: int = 0
    updates_since_rebuild: int = 0


def _as_vector(state: RlsState, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (state.dim,):
        raise ValueError(f"expected vector of length {state.dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input vector contains NaN or Inf")
    return x


def init_state(dim: int, norm_bound_C: float) -> RlsState:
    """Fresh estimator with ridge parameter lam = 1 / C^2, so M^-1 = C^2 * I."""
    if int(dim) != dim or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim}")
    if not (norm_bound_C > 0) or not np.isfinite(norm_bound_C):
        raise ValueError(f"norm bound C must be positive and finite, got {norm_bound_C}")
    dim = int(dim)
    lam = 1.0 / float(norm_bound_C) ** 2
    return RlsState(
        dim=dim,
        lam=lam,
        gram_inv=np.eye(dim) / lam,
        gram=np.eye(dim) * lam,
        xty=np.zeros(dim),
        query_count=0,
        updates_since_rebuild=0,
    )


def absorb(state: RlsState, x, y: float) -> RlsState:
    """Fold a labeled example into the estimator, returning a new state.

    The inverse is updated in O(d^2); absorbing the zero vector is an exact
    no-op on the Gram matrices.
    """
    x = _as_vector(state, x)
    if not np.isfinite(y):
        raise ValueError("label contains NaN or Inf")
    mx = state.gram_inv @ x
    denom = 1.0 + float(x @ mx)
    gram_inv = state.gram_inv - np.outer(mx, mx) / denom
    gram_inv = 0.5 * (gram_inv + gram_inv.T)  # symmetrize against roundoff
    gram = state.gram + np.outer(x, x)
    updates = state.updates_since_rebuild + 1
    if updates >= REBUILD_PERIOD:
        gram_inv = np.linalg.inv(gram)
        gram_inv = 0.5 * (gram_inv + gram_inv.T)
        updates = 0
    return RlsState(
        dim=state.dim,
        lam=state.lam,
        gram_inv=gram_inv,
        gram=gram,
        xty=state.xty + float(y) * x,
        query_count=state.query_count + 1,
        updates_since_rebuild=updates,
    )


def quad_form(state: RlsState, x) -> float:
    """x^T M^-1 x, clamped at zero against roundoff. At most ||x||^2 / lam."""
    x = _as_vector(state, x)
    return max(0.0, float(x @ state.gram_inv @ x))


def theta_hat(state: RlsState) -> np.ndarray:
    """Regularized least squares coefficients M^-1 s."""
    return state.gram_inv @ state.xty
