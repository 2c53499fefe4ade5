"""Bias/variance split of classification losses over an ensemble of models.

For an ensemble of probability outputs {y_j} and a target t, each loss kind
has a matched "center" prediction ybar such that

    mean_j L(t, y_j) = L(t, ybar) + beta * mean_j L(ybar, y_j)

holds exactly, with beta = 1 for squared error and cross-entropy and a
case-dependent beta in [-1, 1] for the zero-one loss. ybar is the point
minimizing the variance term over the probability simplex: the arithmetic
mean (MSE), the normalized geometric mean (CE), or the majority vote (ZO).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "LossKind",
    "DecompResult",
    "hardmax",
    "eval_loss",
    "expected_output",
    "decompose",
    "ensemble_bias_variance",
    "argmin_check",
]

_LOG_FLOOR = 1e-12  # probabilities are clamped here before any log


class LossKind(str, Enum):
    MSE = "mse"
    CE = "ce"
    ZO = "zo"


@dataclass(frozen=True)
class DecompResult:
    expected_loss: float
    bias: float
    variance: float
    beta: float


def hardmax(v) -> np.ndarray:
    """One-hot vector marking the maximum entry; ties go to the lowest index."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("hardmax needs a non-empty 1-D vector")
    out = np.zeros_like(v)
    out[int(np.argmax(v))] = 1.0
    return out


def _check_pair(t, y) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError(f"t and y must be 1-D with equal length, got {t.shape} and {y.shape}")
    return t, y


def eval_loss(kind: LossKind, t, y) -> float:
    """L(t, y) for one sample.

    MSE is the squared L2 distance, CE the KL-form cross-entropy
    sum_k t_k log(t_k / y_k) with 0 log 0 := 0, ZO the argmax mismatch
    indicator.
    """
    t, y = _check_pair(t, y)
    kind = LossKind(kind)
    if kind is LossKind.MSE:
        d = t - y
        return float(d @ d)
    if kind is LossKind.CE:
        yc = np.clip(y, _LOG_FLOOR, 1.0)
        terms = np.where(t > 0, t * (np.log(np.maximum(t, _LOG_FLOOR)) - np.log(yc)), 0.0)
        return float(terms.sum())
    return float(np.argmax(t) != np.argmax(y))


def _ensemble_array(ens) -> np.ndarray:
    arr = np.asarray(ens, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("ensemble outputs must be a (K x c) array with K >= 1")
    return arr


def expected_output(kind: LossKind, ens) -> np.ndarray:
    """The center prediction minimizing mean_j L(., y_j) over the simplex."""
    ens = _ensemble_array(ens)
    kind = LossKind(kind)
    if kind is LossKind.MSE:
        return ens.mean(axis=0)
    if kind is LossKind.CE:
        g = np.exp(np.log(np.clip(ens, _LOG_FLOOR, 1.0)).mean(axis=0))
        return g / g.sum()
    # ZO: majority vote over hardmaxed predictions, ties to the lowest index
    preds = np.argmax(ens, axis=1)
    counts = np.bincount(preds, minlength=ens.shape[1])
    return hardmax(counts.astype(np.float64))


def _is_one_hot(t: np.ndarray) -> bool:
    return bool(np.all((t == 0.0) | (t == 1.0)) and t.sum() == 1.0)


def decompose(kind: LossKind, t, ens) -> DecompResult:
    """Split mean_j L(t, y_j) into bias + beta * variance for one sample."""
    ens = _ensemble_array(ens)
    t = np.asarray(t, dtype=np.float64)
    if t.shape != (ens.shape[1],):
        raise ValueError(f"t has shape {t.shape}, ensemble outputs have {ens.shape[1]} classes")
    kind = LossKind(kind)
    if kind in (LossKind.CE, LossKind.ZO) and not _is_one_hot(t):
        raise ValueError(f"{kind.value} decomposition requires a one-hot target")

    ybar = expected_output(kind, ens)
    expected = float(np.mean([eval_loss(kind, t, y) for y in ens]))
    bias = eval_loss(kind, t, ybar)
    variance = float(np.mean([eval_loss(kind, ybar, y) for y in ens]))

    if kind is LossKind.ZO:
        preds = np.argmax(ens, axis=1)
        vote = int(np.argmax(ybar))
        true_cls = int(np.argmax(t))
        if vote == true_cls:
            beta = 1.0
        else:
            dissent = int(np.sum(preds != vote))
            hits = int(np.sum(preds == true_cls))
            # when nobody dissents from the vote the variance is 0 and the
            # conditional probability is 0/0; beta := 0 keeps things defined
            beta = 0.0 if dissent == 0 else -hits / dissent
    else:
        beta = 1.0
    return DecompResult(expected, bias, variance, beta)


def ensemble_bias_variance(kind: LossKind, per_sample) -> tuple[float, float]:
    """Test-set bias and variance: means of per-sample decompositions.

    `per_sample` is a sequence of (t, ensemble_outputs) pairs, one per test
    sample. Reduction order is the input order, so results are deterministic.
    """
    per_sample = list(per_sample)
    if not per_sample:
        raise ValueError("per_sample must be non-empty")
    bias_sum = 0.0
    var_sum = 0.0
    for t, ens in per_sample:
        r = decompose(kind, t, ens)
        bias_sum += r.bias
        var_sum += r.variance
    n = len(per_sample)
    return bias_sum / n, var_sum / n


def _variance_at(kind: LossKind, center: np.ndarray, ens: np.ndarray) -> float:
    return float(np.mean([eval_loss(kind, center, y) for y in ens]))


def argmin_check(kind: LossKind, ens, trials: int, seed: int) -> bool:
    """Probe that the center prediction really minimizes the variance term.

    ZO enumerates every one-hot candidate; MSE and CE compare against
    `trials` random points on the probability simplex. Returns True iff no
    candidate beats the center by more than 1e-9.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ens = _ensemble_array(ens)
    kind = LossKind(kind)
    c = ens.shape[1]
    ybar = expected_output(kind, ens)
    best = _variance_at(kind, ybar, ens)

    if kind is LossKind.ZO:
        candidates = np.eye(c)
    else:
        rng = np.random.default_rng(seed)
        candidates = rng.dirichlet(np.ones(c), size=trials)
    for cand in candidates:
        if _variance_at(kind, cand, ens) < best - 1e-9:
            return False
    return True
