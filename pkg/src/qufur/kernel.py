"""Dual-form prediction and uncertainty over the queried set.

For high-dimensional inputs the ridge estimator is carried in its dual form:
the state keeps the queried inputs, their labels, and the inverse of
``lam * I + K`` over the queried set. Prediction and uncertainty reduce to
kernel evaluations against the queried inputs, so the cost scales with the
number of queries instead of the ambient dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalDegeneracyError, ResourceLimitError
from .policy import PolicyConfig, RoundDecision, clip
from .rng import EpisodeRng

REBUILD_PERIOD = 256  # mirrors the primal estimator's drift control

# Dual-state memory is O(Q^2); runs are capped rather than silently degrading.
MAX_QUERIES = 2000


class LinearKernel:
    """k(x, x') = <x, x'>."""

    name = "linear"

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a @ b.T

    def diag(self, a: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", a, a)


class RbfKernel:
    """k(x, x') = exp(-gamma * ||x - x'||^2)."""

    name = "rbf"

    def __init__(self, gamma: float):
        if not gamma > 0:
            raise ValueError(f"rbf gamma must be positive, got {gamma}")
        self.gamma = float(gamma)

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        aa = np.einsum("ij,ij->i", a, a)[:, None]
        bb = np.einsum("ij,ij->i", b, b)[None, :]
        sq = np.maximum(0.0, aa + bb - 2.0 * (a @ b.T))
        return np.exp(-self.gamma * sq)

    def diag(self, a: np.ndarray) -> np.ndarray:
        return np.ones(a.shape[0])


def make_kernel(name: str, gamma: float | None = None):
    if name == "linear":
        return LinearKernel()
    if name == "rbf":
        if gamma is None:
            raise ValueError("rbf kernel requires gamma")
        return RbfKernel(gamma)
    raise ValueError(f"unknown kernel {name!r}")


@dataclass
class KernelState:
    """Queried inputs/labels plus the inverse regularized kernel Gram matrix."""

    kernel: object
    lam: float
    inputs: np.ndarray   # (q, d)
    labels: np.ndarray   # (q,)
    m_inv: np.ndarray    # (q, q) inverse of lam*I + K over queried inputs
    updates_since_rebuild: int = 0


def kernel_init(kernel, norm_bound_C: float, dim: int) -> KernelState:
    if not norm_bound_C > 0:
        raise ValueError(f"norm bound C must be positive, got {norm_bound_C}")
    lam = 1.0 / float(norm_bound_C) ** 2
    return KernelState(
        kernel=kernel,
        lam=lam,
        inputs=np.zeros((0, dim)),
        labels=np.zeros(0),
        m_inv=np.zeros((0, 0)),
    )


def _probe(state: KernelState, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input vector contains NaN or Inf")
    return x


def kernel_predict(state: KernelState, x) -> float:
    """clip(k_t^T (lam*I + K)^-1 Y) over the queried set; 0 with no queries."""
    x = _probe(state, x)
    if state.inputs.shape[0] == 0:
        return 0.0
    k_t = state.kernel.matrix(x[None, :], state.inputs)[0]
    return clip(float(k_t @ state.m_inv @ state.labels))


def kernel_uncertainty(state: KernelState, x, eta: float) -> float:
    """max(1, eta)^2 * min(1, (k(x,x) - k_t^T (lam*I + K)^-1 k_t) / lam).

    The inner quantity is nonnegative in exact arithmetic; values negative
    beyond -1e-9 signal a degenerate state, smaller ones clamp to zero.
    """
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    x = _probe(state, x)
    kxx = float(state.kernel.matrix(x[None, :], x[None, :])[0, 0])
    if state.inputs.shape[0] == 0:
        inner = kxx
    else:
        k_t = state.kernel.matrix(x[None, :], state.inputs)[0]
        inner = kxx - float(k_t @ state.m_inv @ k_t)
    if inner < -1e-9:
        raise NumericalDegeneracyError(f"negative posterior variance {inner}")
    inner = max(0.0, inner)
    eta_tilde = max(1.0, float(eta))
    return eta_tilde**2 * min(1.0, inner / state.lam)


def kernel_absorb(state: KernelState, x, y: float) -> KernelState:
    """Grow the queried set by one example, extending (lam*I + K)^-1 in place.

    Uses the 2x2 block-inverse formula; every REBUILD_PERIOD absorbs the
    inverse is refactorized from the full kernel matrix.
    """
    x = _probe(state, x)
    if not np.isfinite(y):
        raise ValueError("label contains NaN or Inf")
    q = state.inputs.shape[0]
    inputs = np.vstack([state.inputs, x[None, :]]) if q else x[None, :].copy()
    labels = np.append(state.labels, float(y))
    kxx = float(state.kernel.matrix(x[None, :], x[None, :])[0, 0])
    updates = state.updates_since_rebuild + 1
    if updates >= REBUILD_PERIOD:
        full = state.kernel.matrix(inputs, inputs)
        m_inv = np.linalg.inv(state.lam * np.eye(q + 1) + full)
        m_inv = 0.5 * (m_inv + m_inv.T)
        updates = 0
    elif q == 0:
        m_inv = np.array([[1.0 / (state.lam + kxx)]])
    else:
        k_t = state.kernel.matrix(x[None, :], state.inputs)[0]
        ak = state.m_inv @ k_t
        schur = state.lam + kxx - float(k_t @ ak)
        m_inv = np.empty((q + 1, q + 1))
        m_inv[:q, :q] = state.m_inv + np.outer(ak, ak) / schur
        m_inv[:q, q] = -ak / schur
        m_inv[q, :q] = -ak / schur
        m_inv[q, q] = 1.0 / schur
    return KernelState(
        kernel=state.kernel,
        lam=state.lam,
        inputs=inputs,
        labels=labels,
        m_inv=m_inv,
        updates_since_rebuild=updates,
    )


def effective_dimension(eigvals_sorted_desc, lam: float, s: int) -> int:
    """Smallest j with j * lam * ln(s) exceeding the tail eigenvalue mass.

    The tail mass after position j is sum_{i>j} (eig_i - lam); the full length
    always qualifies since its tail is empty.
    """
    if s < 2:
        raise ValueError(f"s must be at least 2, got {s}")
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    eig = np.asarray(eigvals_sorted_desc, dtype=np.float64)
    if eig.ndim != 1 or eig.size == 0:
        raise ValueError("eigenvalue list must be a nonempty vector")
    if np.any(np.diff(eig) > 1e-12):
        raise ValueError("eigenvalues must be sorted non-increasing")
    if np.any(eig < lam - 1e-9):
        raise ValueError("eigenvalues must be at least lam")
    log_s = math.log(s)
    tail = np.concatenate([np.cumsum((eig - lam)[::-1])[::-1][1:], [0.0]])
    for j in range(1, eig.size + 1):
        if j * lam * log_s > tail[j - 1]:
            return j
    return int(eig.size)


class KernelQufurPolicy:
    """Uncertainty-proportional querying with a dual-form estimator."""

    name = "kernel_qufur"

    def __init__(self, cfg: PolicyConfig, dim: int, kernel):
        self.cfg = cfg
        self.dim = dim
        self.kernel = kernel
        self.state = kernel_init(kernel, cfg.norm_bound_C, dim)
        self.rng: EpisodeRng | None = None

    def begin(self, rng: EpisodeRng) -> None:
        self.state = kernel_init(self.kernel, self.cfg.norm_bound_C, self.dim)
        self.rng = rng

    def decide(self, t: int, x) -> RoundDecision:
        pred = kernel_predict(self.state, x)
        delta = kernel_uncertainty(self.state, x, self.cfg.noise_level)
        if self.cfg.budget is not None and self.state.inputs.shape[0] >= self.cfg.budget:
            return RoundDecision(pred, delta, 0.0, False)
        p = min(1.0, self.cfg.alpha * delta)
        return RoundDecision(pred, delta, p, self.rng.uniform() < p)

    def observe(self, t: int, x, y: float) -> None:
        if self.state.inputs.shape[0] >= MAX_QUERIES:
            raise ResourceLimitError(
                f"kernel runs are capped at {MAX_QUERIES} queries; lower alpha or set a budget"
            )
        self.state = kernel_absorb(self.state, x, y)
