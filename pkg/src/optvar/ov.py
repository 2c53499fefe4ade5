"""Optimization variance: relative logit spread under hypothetical updates.

Take B candidate updates, one per training batch, all previewed against the
same frozen optimizer state. For an input x with candidate logits
l_b = f(x; theta + delta_b), the per-input score is

    mean_b ||l_b - mean_b l_b||^2 / mean_b ||l_b||^2,

a unitless ratio in the spirit of a coefficient of variation: the
denominator removes the logit norm so values stay comparable across
training phases. The reported metric is the mean of the per-input ratios
over a fixed set of training inputs. No test data is involved anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Batch, Model, _forward_cached, _layer_dims, _unpack, forward_logits
from .optim import OptimizerState, describe, preview_update

__all__ = [
    "DegenerateLogitsError",
    "CandidateUpdateSet",
    "OvEstimate",
    "GradVarEstimate",
    "draw_ov_batches",
    "candidate_updates",
    "ov_point",
    "ov_mean",
    "grad_variance",
    "logit_jacobian",
    "ov_first_order",
]

_DEGENERATE_FLOOR = 1e-24


class DegenerateLogitsError(ValueError):
    """Raised when the denominator of the variance ratio is effectively zero."""


@dataclass(frozen=True, eq=False)
class CandidateUpdateSet:
    """B parameter updates previewed from one frozen optimizer state."""

    updates: np.ndarray  # (B, n_params)
    source_batch_size: int
    optimizer_descriptor: str

    def __post_init__(self) -> None:
        u = np.asarray(self.updates, dtype=np.float64)
        object.__setattr__(self, "updates", u)
        if u.ndim != 2 or u.shape[0] < 1:
            raise ValueError("updates must be a (B x n_params) array with B >= 1")

    @property
    def n_candidates(self) -> int:
        return self.updates.shape[0]


@dataclass(frozen=True)
class OvEstimate:
    """Mean per-input variance ratio plus its bookkeeping."""

    value: float
    numerator_mean: float
    denominator_mean: float
    n_batches: int
    n_samples: int
    epoch: int = 0
    n_degenerate: int = 0


@dataclass(frozen=True)
class GradVarEstimate:
    """Spread of the candidate updates themselves, mean ||g - mean g||^2."""

    v_g: float
    mean_update_norm_sq: float
    norm_sq_of_mean_update: float


def draw_ov_batches(
    train_x: np.ndarray, train_t: np.ndarray, m: int, n_batches: int, seed: int
) -> list[Batch]:
    """Disjoint measurement batches: one seeded shuffle, partition the prefix."""
    n = train_x.shape[0]
    if n_batches < 2:
        raise ValueError("n_batches must be >= 2")
    if m < 1:
        raise ValueError("batch size m must be >= 1")
    if n_batches * m > n:
        raise ValueError(
            f"insufficient data: need {n_batches}x{m}={n_batches * m} rows, have {n}"
        )
    perm = np.random.default_rng(seed).permutation(n)
    return [
        Batch(train_x[perm[i * m : (i + 1) * m]], train_t[perm[i * m : (i + 1) * m]])
        for i in range(n_batches)
    ]


def candidate_updates(
    model: Model, opt: OptimizerState, batches: list[Batch]
) -> CandidateUpdateSet:
    """Preview one update per batch against the same frozen state.

    Neither the model nor the optimizer state is modified; every update is
    computed from identical starting conditions.
    """
    from .nn import ce_grad  # local import keeps module import order simple

    if not batches:
        raise ValueError("batches must be non-empty")
    sizes = {b.x.shape[0] for b in batches}
    if len(sizes) != 1:
        raise ValueError(f"all batches must share one size, got {sorted(sizes)}")
    updates = np.stack([preview_update(opt, ce_grad(model, b)) for b in batches])
    return CandidateUpdateSet(updates, sizes.pop(), describe(opt))


def _candidate_logits(model: Model, cand: CandidateUpdateSet, xs: np.ndarray) -> np.ndarray:
    """Logits under each candidate update, shape (B, n, c)."""
    return np.stack(
        [forward_logits(Model(model.spec, model.theta + u), xs) for u in cand.updates]
    )


def _ratio_parts(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # logits: (B, n, c) -> per-sample numerator and denominator means over B
    dev = logits - logits.mean(axis=0, keepdims=True)
    num = (dev**2).sum(axis=2).mean(axis=0)  # (n,)
    den = (logits**2).sum(axis=2).mean(axis=0)  # (n,)
    return num, den


def ov_point(model: Model, cand: CandidateUpdateSet, x) -> float:
    """Variance ratio for a single input x."""
    if cand.n_candidates < 2:
        raise ValueError("need at least 2 candidate updates")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    num, den = _ratio_parts(_candidate_logits(model, cand, x))
    if den[0] <= _DEGENERATE_FLOOR:
        raise DegenerateLogitsError(
            f"candidate logits are all ~0 (denominator {den[0]:g}); ratio undefined"
        )
    return float(num[0] / den[0])


def ov_mean(model: Model, cand: CandidateUpdateSet, sample_xs, epoch: int = 0) -> OvEstimate:
    """Mean of per-input variance ratios over a sample of training inputs.

    Inputs whose denominator is degenerate are excluded and counted. The
    reduction sorts the per-input ratios first, so the result does not
    depend on the order of `sample_xs`.
    """
    if cand.n_candidates < 2:
        raise ValueError("need at least 2 candidate updates")
    xs = np.atleast_2d(np.asarray(sample_xs, dtype=np.float64))
    if xs.shape[0] < 1:
        raise ValueError("sample_xs must be non-empty")
    num, den = _ratio_parts(_candidate_logits(model, cand, xs))
    ok = den > _DEGENERATE_FLOOR
    n_ok = int(ok.sum())
    if n_ok == 0:
        raise DegenerateLogitsError("all sampled inputs have degenerate logits")
    ratios = np.sort(num[ok] / den[ok])
    return OvEstimate(
        value=float(ratios.sum() / n_ok),
        numerator_mean=float(np.sort(num[ok]).sum() / n_ok),
        denominator_mean=float(np.sort(den[ok]).sum() / n_ok),
        n_batches=cand.n_candidates,
        n_samples=n_ok,
        epoch=epoch,
        n_degenerate=int(xs.shape[0] - n_ok),
    )


def grad_variance(cand: CandidateUpdateSet) -> GradVarEstimate:
    """Variance of the updates across batches, with both norm terms reported."""
    u = cand.updates
    if u.shape[0] < 2:
        raise ValueError("need at least 2 candidate updates")
    mean_u = u.mean(axis=0)
    v_g = float(((u - mean_u) ** 2).sum(axis=1).mean())
    mean_norm_sq = float((u**2).sum(axis=1).mean())
    norm_sq_mean = float(mean_u @ mean_u)
    return GradVarEstimate(v_g, mean_norm_sq, norm_sq_mean)


def logit_jacobian(model: Model, x, max_params: int = 20000) -> np.ndarray:
    """Jacobian of the logits w.r.t. theta for one input, shape (n_params, c).

    Column j is the gradient of logit j, computed by backpropagating a
    one-hot seed per class. Costs c backward passes, so a parameter cap
    guards against accidental use on large models.
    """
    spec = model.spec
    if spec.n_params > max_params:
        raise ValueError(f"model has {spec.n_params} parameters, cap is {max_params}")
    x2 = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x2.shape[1] != spec.in_dim:
        raise ValueError(f"x has {x2.shape[1]} entries, model expects {spec.in_dim}")
    _, inputs, pre = _forward_cached(model, x2)
    layers = _unpack(spec, model.theta)
    c = spec.out_dim

    delta = np.eye(c)  # (c, c): one seed row per logit
    blocks: list[tuple[np.ndarray, np.ndarray]] = []
    for i in reversed(range(len(layers))):
        w, _ = layers[i]
        h_in = inputs[i][0]  # (n_in,)
        dw = np.einsum("i,cj->cij", h_in, delta)  # (c, n_in, n_out)
        blocks.append((dw, delta))
        if i > 0:
            delta = (delta @ w.T) * (pre[i - 1][0] > 0)
    blocks.reverse()

    jac = np.empty((spec.n_params, c))
    off = 0
    for (n_in, n_out), (dw, db) in zip(_layer_dims(spec), blocks):
        jac[off : off + n_in * n_out] = dw.reshape(c, -1).T
        off += n_in * n_out
        jac[off : off + n_out] = db.T
        off += n_out
    return jac


def ov_first_order(model: Model, cand: CandidateUpdateSet, x, max_params: int = 20000) -> float:
    """Linearized variance ratio: mean_b ||J^T (delta_b - mean delta)||^2 / ||f||^2.

    Approaches ov_point as the update scale shrinks.
    """
    if cand.n_candidates < 2:
        raise ValueError("need at least 2 candidate updates")
    x2 = np.asarray(x, dtype=np.float64).reshape(1, -1)
    f = forward_logits(model, x2)[0]
    den = float(f @ f)
    if den <= _DEGENERATE_FLOOR:
        raise DegenerateLogitsError("unperturbed logits are ~0; ratio undefined")
    jac = logit_jacobian(model, x2[0], max_params=max_params)
    centered = cand.updates - cand.updates.mean(axis=0)
    proj = centered @ jac  # (B, c)
    return float((proj**2).sum(axis=1).mean() / den)
