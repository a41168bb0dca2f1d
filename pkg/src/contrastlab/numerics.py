"""Numerically stable scalar/matrix kernels shared by every loss.

All kernels work in 64-bit floating point and are pure functions: no
global state, safe to call concurrently. Embedding batches are plain
(N, D) float arrays; similarity matrices are (N, N) arrays of cosines.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyInput, OutOfDomain, ShapeMismatch, ZeroNormRow

# Clamp for the log-odds map: keeps |logit| <= log(2/eps - 1) ~= 16.8
# while leaving the ordering of similarities intact.
DEFAULT_CLAMP_EPS = 1e-7

_NORM_FLOOR = 1e-30


def _as_2d(x) -> tuple[np.ndarray, bool]:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        return a[None, :], True
    if a.ndim != 2:
        raise ShapeMismatch(f"expected a vector or matrix, got ndim={a.ndim}")
    return a, False


def l2_normalize(batch) -> np.ndarray:
    """Scale every row to unit Euclidean norm.

    Accepts a single vector or an (N, D) matrix. Raises ZeroNormRow if a
    row norm falls below 1e-30, which signals a degenerate encoder output.
    """
    a, was_1d = _as_2d(batch)
    norms = np.linalg.norm(a, axis=1)
    if np.any(norms < _NORM_FLOOR):
        i = int(np.argmin(norms))
        raise ZeroNormRow(i, float(norms[i]))
    out = a / norms[:, None]
    return out[0] if was_1d else out


def cosine_similarity_matrix(anchors, views) -> np.ndarray:
    """Pairwise cosine similarities between anchor rows and view rows.

    Entry (i, j) is the cosine of the angle between anchor i and view j,
    so the diagonal holds the positive pairs when row i of both batches
    comes from the same instance.
    """
    a, _ = _as_2d(anchors)
    v, _ = _as_2d(views)
    if a.shape != v.shape:
        raise ShapeMismatch(f"anchors {a.shape} vs views {v.shape}")
    return l2_normalize(a) @ l2_normalize(v).T


def log_sum_exp(logits, axis=None):
    """log(sum(exp(x))) computed with max-subtraction, overflow-free.

    With ``axis=None`` the input is a vector and a float is returned;
    with an integer axis the reduction is applied along it.
    """
    x = np.asarray(logits, dtype=np.float64)
    if x.size == 0:
        raise EmptyInput("log_sum_exp of an empty vector")
    if axis is None:
        m = np.max(x)
        return float(m + np.log(np.sum(np.exp(x - m))))
    m = np.max(x, axis=axis, keepdims=True)
    out = m.squeeze(axis) + np.log(np.sum(np.exp(x - m), axis=axis))
    return out


def softmax(logits, axis=None) -> np.ndarray:
    """Softmax via max-subtraction; entries positive, summing to 1."""
    x = np.asarray(logits, dtype=np.float64)
    if x.size == 0:
        raise EmptyInput("softmax of an empty vector")
    ax = -1 if axis is None else axis
    e = np.exp(x - np.max(x, axis=ax, keepdims=True))
    return e / np.sum(e, axis=ax, keepdims=True)


def _check_cosine_domain(c: np.ndarray) -> None:
    if np.any(np.abs(c) > 1.0 + 1e-9):
        bad = float(c.flat[int(np.argmax(np.abs(c)))])
        raise OutOfDomain(f"cosine similarity {bad!r} outside [-1, 1]")


def clamp_for_logit(s, eps: float = DEFAULT_CLAMP_EPS) -> np.ndarray:
    """Clamp similarities into [-1+eps, 1-eps]; interior values pass through bit-for-bit."""
    if not 0.0 < eps <= 1e-2:
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps!r}")
    return np.clip(np.asarray(s, dtype=np.float64), -1.0 + eps, 1.0 - eps)


def logit_map(c, eps: float = DEFAULT_CLAMP_EPS):
    """Map cosine similarity to the whole real line: log((1+c)/(1-c)) = 2 atanh(c).

    Clamps its argument to [-1+eps, 1-eps] first, so the output magnitude
    is capped at log(2/eps - 1). Values outside [-1, 1] by more than 1e-9
    raise OutOfDomain (an upstream normalization bug).
    """
    a = np.asarray(c, dtype=np.float64)
    _check_cosine_domain(a)
    z = 2.0 * np.arctanh(clamp_for_logit(a, eps))
    return float(z) if np.isscalar(c) or a.ndim == 0 else z


def logit_map_derivative(c, eps: float = DEFAULT_CLAMP_EPS):
    """Derivative of logit_map: 2 / (1 - c^2), evaluated on the clamped argument.

    Always >= 2, with equality at c = 0.
    """
    a = np.asarray(c, dtype=np.float64)
    _check_cosine_domain(a)
    g = 2.0 / (1.0 - clamp_for_logit(a, eps) ** 2)
    return float(g) if np.isscalar(c) or a.ndim == 0 else g


def sigmoid(x):
    """Numerically stable logistic function."""
    a = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(out[0])
    return out.reshape(np.asarray(x).shape)
