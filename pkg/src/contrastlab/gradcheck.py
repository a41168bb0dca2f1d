"""Central finite-difference oracle for every analytical gradient.

The oracle is deliberately independent of the gradient code it checks:
it only ever evaluates scalar loss values at perturbed inputs. Relative
error is measured per coordinate as |a - b| / max(|a|, |b|, 1e-8), so
near-zero gradients are effectively compared on an absolute scale.

Random trials draw similarity entries uniformly from [-0.95, 0.95] to
keep the log-odds derivative well conditioned, and temperatures from
[0.5, 1.0] (scales exp(t) with t in [-0.7, 0.7]): sharper scalings push
softmax tail probabilities below what float64 central differences can
resolve, which would measure probe noise rather than gradient
correctness. Sharp-temperature behavior is covered by closed-form tests
instead. Boundary behavior of the clamped log-odds map is checked with
probes that stay inside the flat region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, NonFiniteProbe
from .losses import backprop_to_embeddings, learnable_temp_loss, ntxent_loss, tf_infonce_loss
from .numerics import cosine_similarity_matrix

DEFAULT_STEP = 1e-6
END_TO_END_STEP = 3e-5  # 64-bit rounding noise through deep matmul chains needs a larger step
REL_FLOOR = 1e-8
# absolute-error fallback: |analytic - numeric| <= tolerance * ABS_FLOOR_RATIO
# counts as a match (1e-8 at the standard 1e-5 tolerance)
ABS_FLOOR_RATIO = 1e-3

LOSS_KINDS = ("ntxent", "learnable", "temp-free", "end-to-end")


@dataclass
class GradCheckReport:
    max_rel_error: float
    max_abs_error: float
    worst_coordinate: tuple
    tolerance: float
    trials: int
    passed: bool

    def summary(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        return (
            f"{state}: max rel err {self.max_rel_error:.3e} "
            f"(abs {self.max_abs_error:.3e}) at {self.worst_coordinate} "
            f"over {self.trials} trials, tolerance {self.tolerance:g}"
        )


def central_difference(fn, x, h: float = DEFAULT_STEP) -> np.ndarray:
    """Central finite differences of a scalar function, coordinate by coordinate.

    ``x`` may have any shape; the returned gradient matches it. Raises
    NonFiniteProbe if any probe value is non-finite.
    """
    if h <= 0:
        raise InvalidParams(f"step h must be > 0, got {h!r}")
    x = np.asarray(x, dtype=np.float64).copy()
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        fp = fn(x)
        flat[k] = orig - h
        fm = fn(x)
        flat[k] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteProbe(f"non-finite probe at flat index {k}")
        gflat[k] = (fp - fm) / (2.0 * h)
    return grad


def relative_errors(analytic, numeric) -> np.ndarray:
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), REL_FLOOR)


def _compare(analytic, numeric, worst, coord_prefix, abs_floor):
    abs_err = np.abs(np.asarray(analytic) - np.asarray(numeric))
    # absolute-error fallback: differences below the floor are exact matches
    rel = np.where(abs_err <= abs_floor, 0.0, relative_errors(analytic, numeric))
    k = int(np.argmax(rel))
    if rel.flat[k] > worst[0]:
        worst[0] = float(rel.flat[k])
        worst[1] = float(abs_err.flat[k])
        worst[2] = coord_prefix + (k,)
    return worst


def _random_similarity(rng, n):
    return rng.uniform(-0.95, 0.95, (n, n))


def _check_sim_loss(kind, rng, n, h, worst, trial, abs_floor):
    s = _random_similarity(rng, n)
    if kind == "ntxent":
        tau = float(rng.uniform(0.5, 1.0))
        res = ntxent_loss(s, tau)
        fn = lambda m: ntxent_loss(m, tau).loss
    elif kind == "learnable":
        t = float(rng.uniform(-0.7, 0.7))
        res = learnable_temp_loss(s, t)
        fn = lambda m: learnable_temp_loss(m, t).loss
    else:
        res = tf_infonce_loss(s)
        fn = lambda m: tf_infonce_loss(m).loss
    fd = central_difference(fn, s, h)
    worst = _compare(res.grad_sim, fd, worst, ("trial", trial, "grad_sim"), abs_floor)
    if kind == "learnable":
        fd_t = central_difference(lambda v: learnable_temp_loss(s, float(v[0])).loss,
                                  np.array([t]), h)
        worst = _compare(np.array([res.grad_t]), fd_t, worst, ("trial", trial, "grad_t"), abs_floor)
    return worst


def _mlp_flat_loss(widths, activation, x_a, x_b, loss_fn):
    """Loss of the loss(cosine(mlp(a), mlp(b))) composition as a function of
    the flattened weight vector (plus trailing t for the learnable kind)."""
    from .trainer import EncoderConfig, mlp_forward, unpack_weights, weight_count

    cfg = EncoderConfig(layer_widths=widths, activation=activation, init_seed=0)
    n_weights = weight_count(widths)

    def fn(flat):
        weights = unpack_weights(flat[:n_weights], widths)
        emb_a, _ = mlp_forward(cfg, weights, x_a)
        emb_b, _ = mlp_forward(cfg, weights, x_b)
        return loss_fn(cosine_similarity_matrix(emb_a, emb_b), flat)

    return fn


def _check_end_to_end(rng, n, d, h, worst, trial, abs_floor):
    """Full composition: loss(cosine(normalize(mlp(a)), normalize(mlp(b)))).

    The random harness uses the tanh encoder: it is smooth (no relu kinks
    to probe across) and keeps the embeddings of many rows from bunching
    into one direction. Relu reverse-mode is covered by a deterministic
    check elsewhere.
    """
    from .trainer import EncoderConfig, init_weights, mlp_backward, mlp_forward, pack_weights

    # a wider output layer keeps random cosines of many rows away from +-1
    widths = (d, 6, max(4, n // 2))
    cfg = EncoderConfig(layer_widths=widths, activation="tanh", init_seed=int(rng.integers(1 << 31)))
    kind = ("ntxent", "learnable", "temp-free")[trial % 3]
    tau = float(rng.uniform(0.5, 1.0))
    t = float(rng.uniform(-0.7, 0.7))

    # Redraw compositions that probe badly: a tiny embedding norm, or a
    # similarity close enough to +-1 that the log-odds map is
    # ill-conditioned for central differences.
    for _ in range(50):
        weights = init_weights(cfg)
        x_a = rng.normal(0.0, 1.0, (n, d))
        x_b = rng.normal(0.0, 1.0, (n, d))
        emb_a, cache_a = mlp_forward(cfg, weights, x_a)
        emb_b, cache_b = mlp_forward(cfg, weights, x_b)
        norm_ok = min(np.linalg.norm(emb_a, axis=1).min(),
                      np.linalg.norm(emb_b, axis=1).min()) > 0.05
        sim_ok = norm_ok and np.max(np.abs(cosine_similarity_matrix(emb_a, emb_b))) <= 0.95
        if norm_ok and sim_ok:
            break
        cfg = EncoderConfig(layer_widths=widths, activation="tanh",
                            init_seed=int(rng.integers(1 << 31)))

    # mean reduction: the trainer's path, and it keeps per-coordinate probe
    # differences of the large-N compositions within the absolute floor
    if kind == "ntxent":
        scalar = lambda s, flat: ntxent_loss(s, tau, reduction="mean").loss
        res = ntxent_loss(cosine_similarity_matrix(emb_a, emb_b), tau, reduction="mean")
    elif kind == "learnable":
        scalar = lambda s, flat: learnable_temp_loss(s, float(flat[-1]), reduction="mean").loss
        res = learnable_temp_loss(cosine_similarity_matrix(emb_a, emb_b), t, reduction="mean")
    else:
        scalar = lambda s, flat: tf_infonce_loss(s, reduction="mean").loss
        res = tf_infonce_loss(cosine_similarity_matrix(emb_a, emb_b), reduction="mean")

    grad_a, grad_b = backprop_to_embeddings(emb_a, emb_b, res.grad_sim)
    gw_a = mlp_backward(cache_a, grad_a)
    gw_b = mlp_backward(cache_b, grad_b)
    analytic = pack_weights([ga + gb for ga, gb in zip(gw_a, gw_b)])
    flat0 = pack_weights(weights)
    if kind == "learnable":
        analytic = np.concatenate([analytic, [res.grad_t]])
        flat0 = np.concatenate([flat0, [t]])

    fn = _mlp_flat_loss(widths, "tanh", x_a, x_b, scalar)
    fd = central_difference(fn, flat0, h)
    return _compare(analytic, fd, worst, ("trial", trial, kind, "weights"), abs_floor)


def check_loss_gradients(
    loss_kind: str,
    n: int = 8,
    trials: int = 100,
    tolerance: float = 1e-5,
    seed: int = 0,
    h: float | None = None,
    d: int = 4,
) -> GradCheckReport:
    """Compare analytical gradients against central differences on random inputs.

    ``loss_kind`` is one of 'ntxent', 'learnable', 'temp-free' (random
    similarity matrices) or 'end-to-end' (random tiny MLPs driven through
    the full composition). Reports the worst coordinate over all trials;
    a coordinate counts as matching when its relative error is within
    tolerance or its absolute error sits below the 1e-8 floor. The probe
    step defaults to 1e-6, or 3e-5 for the end-to-end composition whose
    probe noise is dominated by matmul-chain rounding.
    """
    if loss_kind not in LOSS_KINDS:
        raise InvalidParams(f"loss_kind must be one of {LOSS_KINDS}, got {loss_kind!r}")
    if trials < 1:
        raise InvalidParams(f"trials must be >= 1, got {trials}")
    if h is None:
        h = END_TO_END_STEP if loss_kind == "end-to-end" else DEFAULT_STEP
    rng = np.random.default_rng(seed)
    abs_floor = tolerance * ABS_FLOOR_RATIO
    worst = [0.0, 0.0, ()]
    for trial in range(trials):
        if loss_kind == "end-to-end":
            worst = _check_end_to_end(rng, n, d, h, worst, trial, abs_floor)
        else:
            worst = _check_sim_loss(loss_kind, rng, n, h, worst, trial, abs_floor)
    return GradCheckReport(
        max_rel_error=worst[0],
        max_abs_error=worst[1],
        worst_coordinate=tuple(worst[2]),
        tolerance=tolerance,
        trials=trials,
        passed=worst[0] <= tolerance,
    )
