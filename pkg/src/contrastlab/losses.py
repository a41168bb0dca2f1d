"""Batch contrastive losses with exact analytical gradients.

Three interchangeable kernels over an (N, N) cosine-similarity matrix
whose diagonal holds the positive pairs:

* ``ntxent_loss``        -- similarities divided by a fixed temperature,
* ``learnable_temp_loss``-- similarities multiplied by exp(t) with t a
                            trainable scalar (gradient in t is returned),
* ``tf_infonce_loss``    -- similarities mapped through the scaled
                            log-odds function 2*atanh(c); no temperature.

Each returns the loss value together with d(loss)/d(similarity), so the
trainer can chain through cosine similarity into raw embeddings with
``backprop_to_embeddings``. All functions are pure and thread-safe; rows
are accumulated in fixed index order so results do not depend on any
parallel schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NonPositiveTemperature,
    NonSquare,
    ShapeMismatch,
    TOverflow,
    ZeroNormRow,
)
from .numerics import DEFAULT_CLAMP_EPS, clamp_for_logit, log_sum_exp, softmax

_T_LIMIT = 700.0  # exp(t) overflows float64 just above this

FIXED_TAU = "fixed_tau"
LEARNABLE_T = "learnable_t"
TEMPERATURE_FREE = "temperature_free"


@dataclass(frozen=True)
class TemperatureParam:
    """Selects a loss kernel and carries its scalar parameter."""

    kind: str
    tau: float | None = None
    t: float | None = None

    def __post_init__(self):
        if self.kind not in (FIXED_TAU, LEARNABLE_T, TEMPERATURE_FREE):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == FIXED_TAU and (self.tau is None or self.tau <= 0):
            raise NonPositiveTemperature(f"tau must be > 0, got {self.tau!r}")

    @classmethod
    def fixed(cls, tau: float) -> "TemperatureParam":
        return cls(FIXED_TAU, tau=float(tau))

    @classmethod
    def learnable(cls, t0: float = 0.0) -> "TemperatureParam":
        return cls(LEARNABLE_T, t=float(t0))

    @classmethod
    def temperature_free(cls) -> "TemperatureParam":
        return cls(TEMPERATURE_FREE)


@dataclass
class LossResult:
    loss: float
    grad_sim: np.ndarray
    grad_t: float | None = None


def _check_square(s) -> np.ndarray:
    a = np.asarray(s, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquare(f"similarity matrix must be square, got {a.shape}")
    return a


def _softmax_ce_rows(z: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum over rows of (-z[i,i] + logsumexp(z[i,:])) and its gradient in z."""
    lse = log_sum_exp(z, axis=1)
    loss = float(np.sum(lse - np.diag(z)))
    grad = softmax(z, axis=1)
    grad[np.diag_indices_from(grad)] -= 1.0
    return loss, grad


def _reduce(loss: float, grad: np.ndarray, grad_t, n: int, reduction: str):
    if reduction == "mean":
        return loss / n, grad / n, None if grad_t is None else grad_t / n
    if reduction == "sum":
        return loss, grad, grad_t
    raise ValueError(f"reduction must be 'sum' or 'mean', got {reduction!r}")


def _symmetrized(fn, s: np.ndarray):
    """Average a one-directional loss over the matrix and its transpose."""
    fwd = fn(s)
    bwd = fn(s.T)
    loss = 0.5 * (fwd[0] + bwd[0])
    grad = 0.5 * (fwd[1] + bwd[1].T)
    grad_t = None
    if len(fwd) > 2 and fwd[2] is not None:
        grad_t = 0.5 * (fwd[2] + bwd[2])
    return loss, grad, grad_t


def ntxent_loss(
    s, tau: float, reduction: str = "sum", symmetric: bool = False
) -> LossResult:
    """Temperature-scaled softmax cross-entropy over similarity rows.

    Row i contributes -s[i,i]/tau + logsumexp(s[i,:]/tau); the gradient
    with respect to s is (softmax(row/tau) - onehot(i)) / tau, so each
    gradient row sums to zero. ``reduction`` chooses the row sum (the
    textbook definition) or the mean (batch-size-independent step sizes);
    ``symmetric`` averages the anchor->view and view->anchor directions.
    """
    a = _check_square(s)
    if tau <= 0:
        raise NonPositiveTemperature(f"tau must be > 0, got {tau!r}")

    def one_way(m):
        loss, g = _softmax_ce_rows(m / tau)
        return loss, g / tau

    loss, grad, _ = _symmetrized(one_way, a) if symmetric else (*one_way(a), None)
    loss, grad, _ = _reduce(loss, grad, None, a.shape[0], reduction)
    return LossResult(loss=loss, grad_sim=grad)


def learnable_temp_loss(
    s, t: float, reduction: str = "sum", symmetric: bool = False
) -> LossResult:
    """Softmax cross-entropy over exp(t)-scaled similarities.

    Equivalent to ntxent_loss with 1/tau replaced by the learnable scale
    exp(t); additionally returns d(loss)/dt so t can be trained jointly.
    """
    a = _check_square(s)
    if abs(t) > _T_LIMIT:
        raise TOverflow(f"|t| must be <= {_T_LIMIT:g}, got {t!r}")
    scale = math.exp(t)

    def one_way(m):
        loss, g = _softmax_ce_rows(m * scale)
        # dz/dt = m * exp(t), summed against the softmax residual
        return loss, g * scale, float(np.sum(g * m) * scale)

    if symmetric:
        loss, grad, grad_t = _symmetrized(one_way, a)
    else:
        loss, grad, grad_t = one_way(a)
    loss, grad, grad_t = _reduce(loss, grad, grad_t, a.shape[0], reduction)
    return LossResult(loss=loss, grad_sim=grad, grad_t=grad_t)


def tf_infonce_loss(
    s,
    eps: float = DEFAULT_CLAMP_EPS,
    reduction: str = "sum",
    symmetric: bool = False,
) -> LossResult:
    """Temperature-free loss: logits are the scaled log-odds of the similarities.

    Each similarity is clamped into [-1+eps, 1-eps] and mapped through
    2*atanh(c) before the softmax cross-entropy. The gradient chains the
    softmax residual with d(2 atanh)/dc = 2/(1-c^2); entries flattened by
    the clamp sit in a locally constant region, so their gradient is zero.
    """
    a = _check_square(s)

    def one_way(m):
        c = clamp_for_logit(m, eps)
        loss, g = _softmax_ce_rows(2.0 * np.arctanh(c))
        g = g * (2.0 / (1.0 - c * c))
        g[m != c] = 0.0
        return loss, g

    loss, grad, _ = _symmetrized(one_way, a) if symmetric else (*one_way(a), None)
    loss, grad, _ = _reduce(loss, grad, None, a.shape[0], reduction)
    return LossResult(loss=loss, grad_sim=grad)


def evaluate_loss(
    s, param: TemperatureParam, reduction: str = "sum", symmetric: bool = False
) -> LossResult:
    """Dispatch to the kernel selected by a TemperatureParam."""
    if param.kind == FIXED_TAU:
        return ntxent_loss(s, param.tau, reduction=reduction, symmetric=symmetric)
    if param.kind == LEARNABLE_T:
        return learnable_temp_loss(s, param.t, reduction=reduction, symmetric=symmetric)
    return tf_infonce_loss(s, reduction=reduction, symmetric=symmetric)


def backprop_to_embeddings(anchors, views, grad_sim) -> tuple[np.ndarray, np.ndarray]:
    """Chain a similarity-space gradient into raw (unnormalized) embeddings.

    Treats sum_ij grad_sim[i,j] * cos(anchor_i, view_j) as the scalar
    objective and returns its exact gradients with respect to both raw
    batches, including the Jacobian of the row normalization:
    d cos/d u = (v_hat - cos * u_hat) / ||u||.
    """
    u = np.asarray(anchors, dtype=np.float64)
    v = np.asarray(views, dtype=np.float64)
    g = np.asarray(grad_sim, dtype=np.float64)
    if u.ndim != 2 or v.ndim != 2 or u.shape[1] != v.shape[1]:
        raise ShapeMismatch(f"anchors {u.shape} vs views {v.shape}")
    if g.shape != (u.shape[0], v.shape[0]):
        raise ShapeMismatch(f"grad_sim {g.shape} does not match ({u.shape[0]}, {v.shape[0]})")

    norm_u = np.linalg.norm(u, axis=1)
    norm_v = np.linalg.norm(v, axis=1)
    if np.any(norm_u < 1e-30):
        raise ZeroNormRow(int(np.argmin(norm_u)), float(norm_u.min()))
    if np.any(norm_v < 1e-30):
        raise ZeroNormRow(int(np.argmin(norm_v)), float(norm_v.min()))

    u_hat = u / norm_u[:, None]
    v_hat = v / norm_v[:, None]
    sim = u_hat @ v_hat.T
    gs = g * sim
    grad_u = (g @ v_hat - gs.sum(axis=1, keepdims=True) * u_hat) / norm_u[:, None]
    grad_v = (g.T @ u_hat - gs.sum(axis=0)[:, None] * v_hat) / norm_v[:, None]
    return grad_u, grad_v
