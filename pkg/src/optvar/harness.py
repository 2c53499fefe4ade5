"""Training loops with per-epoch diagnostics.

One generator drives everything: it sees only training data, runs the
minibatch epochs, and measures the update-variance metrics at each epoch
end from freshly drawn training batches. Test-set evaluation is layered on
top by `train_with_trace`; the validation-free path (`ov_series`) never
receives test arrays at all, by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from .data import Dataset, NoiseSpec, inject_label_noise, subsample_train_sets
from .decomp import LossKind, ensemble_bias_variance
from .nn import Batch, MlpSpec, Model, ce_loss, ce_loss_and_grad, forward_logits, init_model, softmax
from .optim import AdamState, OptimizerState, SgdState, step
from .ov import GradVarEstimate, OvEstimate, candidate_updates, draw_ov_batches, grad_variance, ov_mean
from .analysis import pearson_r

__all__ = [
    "RunConfig",
    "TraceRow",
    "WidthRow",
    "train_with_trace",
    "ov_series",
    "ensemble_trace",
    "width_sweep",
]

# seed-stream keys, so the different random choices inside a run never collide
_STREAM_SHUFFLE = 1
_STREAM_OV_SAMPLES = 2
_STREAM_OV_BATCHES = 3
_STREAM_SUBSETS = 4
_STREAM_MEMBERS = 5


def _substream(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence((seed, *keys)).generate_state(1)[0])


@dataclass(frozen=True)
class RunConfig:
    """Everything one training run needs, including the OV measurement knobs."""

    arch: tuple[int, ...]
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    momentum: float = 0.0
    epochs: int = 50
    batch_size: int = 128
    label_noise: NoiseSpec | None = None
    ov_batches: int = 10
    ov_batch_size: int | None = None  # None -> batch_size
    ov_samples: int = 1000
    ov_probe_lr: float | None = None  # set -> plain-SGD probe for measurement
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "arch", tuple(int(a) for a in self.arch))
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.ov_batches < 2:
            raise ValueError("ov_batches must be >= 2")


@dataclass(frozen=True)
class TraceRow:
    epoch: int
    train_ce: float
    test_ce: float
    test_mse: float
    test_zo: float
    test_acc: float
    ov: float
    v_g: float
    bias: float | None = None
    variance: float | None = None


@dataclass(frozen=True)
class WidthRow:
    width: int
    final_test_acc: float
    final_ov: float


def _fresh_optimizer(cfg: RunConfig, n_params: int) -> OptimizerState:
    if cfg.optimizer == "sgd":
        return SgdState.fresh(cfg.learning_rate, n_params, cfg.momentum)
    return AdamState.fresh(cfg.learning_rate, n_params)


def _run_epochs(
    train_x: np.ndarray,
    train_t: np.ndarray,
    cfg: RunConfig,
    compute_ov: bool = True,
) -> Iterator[tuple[int, Model, float, OvEstimate | None, GradVarEstimate | None]]:
    """Yield (epoch, model, train_ce, ov_estimate, grad_var) per epoch.

    Touches training data only. Label noise, when configured, is applied
    here so every consumer trains on the same corrupted labels.
    """
    spec = MlpSpec(cfg.arch)
    n, d = train_x.shape
    if d != spec.in_dim or train_t.shape[1] != spec.out_dim:
        raise ValueError(
            f"arch {cfg.arch} does not fit data with d={d}, c={train_t.shape[1]}"
        )
    if cfg.label_noise is not None and cfg.label_noise.fraction > 0:
        train_t = inject_label_noise(train_t, cfg.label_noise)

    model = init_model(spec, cfg.seed)
    opt = _fresh_optimizer(cfg, spec.n_params)

    ov_m = cfg.ov_batch_size if cfg.ov_batch_size is not None else cfg.batch_size
    probe = (
        SgdState.fresh(cfg.ov_probe_lr, spec.n_params)
        if cfg.ov_probe_lr is not None
        else None
    )
    if compute_ov:
        n_samp = min(n, cfg.ov_samples)
        sample_rng = np.random.default_rng(_substream(cfg.seed, _STREAM_OV_SAMPLES))
        sample_xs = train_x[sample_rng.choice(n, size=n_samp, replace=False)]

    shuffle_rng = np.random.default_rng(_substream(cfg.seed, _STREAM_SHUFFLE))
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            batch = Batch(train_x[idx], train_t[idx])
            loss, grad = ce_loss_and_grad(model, batch)
            loss_sum += loss * idx.size
            model, opt = step(opt, model, grad)
        train_ce = loss_sum / n

        est = None
        gv = None
        if compute_ov:
            batches = draw_ov_batches(
                train_x, train_t, ov_m, cfg.ov_batches,
                _substream(cfg.seed, _STREAM_OV_BATCHES, epoch),
            )
            cand = candidate_updates(model, probe if probe is not None else opt, batches)
            est = ov_mean(model, cand, sample_xs, epoch=epoch)
            gv = grad_variance(cand)
        yield epoch, model, train_ce, est, gv


def _test_metrics(model: Model, test_x: np.ndarray, test_t: np.ndarray):
    logits = forward_logits(model, test_x)
    probs = softmax(logits)
    test_ce = ce_loss(model, Batch(test_x, test_t))
    test_mse = float(((test_t - probs) ** 2).sum(axis=1).mean())
    test_zo = float(np.mean(np.argmax(logits, axis=1) != np.argmax(test_t, axis=1)))
    return test_ce, test_mse, test_zo, probs


def train_with_trace(data: Dataset, cfg: RunConfig) -> list[TraceRow]:
    """Single training run; one row of losses and diagnostics per epoch."""
    if not data.has_test:
        raise ValueError("train_with_trace needs a dataset with a test split")
    rows = []
    for epoch, model, train_ce, est, gv in _run_epochs(data.train_x, data.train_t, cfg):
        test_ce, test_mse, test_zo, _ = _test_metrics(model, data.test_x, data.test_t)
        rows.append(
            TraceRow(
                epoch=epoch,
                train_ce=train_ce,
                test_ce=test_ce,
                test_mse=test_mse,
                test_zo=test_zo,
                test_acc=1.0 - test_zo,
                ov=est.value,
                v_g=gv.v_g,
            )
        )
    return rows


def ov_series(train_x: np.ndarray, train_t: np.ndarray, cfg: RunConfig) -> list[OvEstimate]:
    """Per-epoch update-variance estimates from training data alone."""
    return [est for _, _, _, est, _ in _run_epochs(train_x, train_t, cfg)]


def ensemble_trace(
    data: Dataset,
    cfg: RunConfig,
    k: int,
    frac: float,
    kind: LossKind,
    subsets: list[np.ndarray] | None = None,
    member_seeds: list[int] | None = None,
) -> list[TraceRow]:
    """Train K models on subsampled training sets and trace bias/variance.

    Label noise is applied once to the full training set before the subsets
    are drawn. The loss columns hold the mean of the members' test losses,
    which is the ensemble's expected loss; the bias and variance columns
    come from the per-sample decomposition under `kind`. The ov and v_g
    columns report the first member, as a representative single run.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if not data.has_test:
        raise ValueError("ensemble_trace needs a dataset with a test split")
    kind = LossKind(kind)

    train_t = data.train_t
    if cfg.label_noise is not None and cfg.label_noise.fraction > 0:
        train_t = inject_label_noise(train_t, cfg.label_noise)

    n = data.train_x.shape[0]
    if subsets is None:
        subsets = subsample_train_sets(n, k, frac, _substream(cfg.seed, _STREAM_SUBSETS))
    if len(subsets) != k:
        raise ValueError(f"got {len(subsets)} subsets for k={k}")
    if member_seeds is None:
        member_seeds = [_substream(cfg.seed, _STREAM_MEMBERS, j) for j in range(k)]

    # per-member configs: noise is already applied, member 0 carries the OV load
    n_sub = subsets[0].size
    ov_m = cfg.ov_batch_size if cfg.ov_batch_size is not None else cfg.batch_size
    ov_m = min(ov_m, n_sub // cfg.ov_batches)
    if ov_m < 1:
        raise ValueError("subsets too small to draw the configured measurement batches")
    runs = []
    for j in range(k):
        member_cfg = replace(
            cfg, label_noise=None, seed=member_seeds[j], ov_batch_size=ov_m
        )
        runs.append(
            _run_epochs(
                data.train_x[subsets[j]],
                train_t[subsets[j]],
                member_cfg,
                compute_ov=(j == 0),
            )
        )

    rows = []
    test_x, test_t = data.test_x, data.test_t
    for per_member in zip(*runs):
        epoch = per_member[0][0]
        train_ce = float(np.mean([m[2] for m in per_member]))
        est, gv = per_member[0][3], per_member[0][4]

        ce_vals, mse_vals, zo_vals, prob_stack = [], [], [], []
        for _, model, _, _, _ in per_member:
            ce_j, mse_j, zo_j, probs_j = _test_metrics(model, test_x, test_t)
            ce_vals.append(ce_j)
            mse_vals.append(mse_j)
            zo_vals.append(zo_j)
            prob_stack.append(probs_j)
        probs = np.stack(prob_stack)  # (K, n_test, c)
        per_sample = [(test_t[i], probs[:, i, :]) for i in range(test_x.shape[0])]
        bias, variance = ensemble_bias_variance(kind, per_sample)

        test_zo = float(np.mean(zo_vals))
        rows.append(
            TraceRow(
                epoch=epoch,
                train_ce=train_ce,
                test_ce=float(np.mean(ce_vals)),
                test_mse=float(np.mean(mse_vals)),
                test_zo=test_zo,
                test_acc=1.0 - test_zo,
                ov=est.value,
                v_g=gv.v_g,
                bias=bias,
                variance=variance,
            )
        )
    return rows


def width_sweep(
    data: Dataset, base_cfg: RunConfig, widths: list[int]
) -> tuple[list[WidthRow], float]:
    """One run per hidden width, measuring updates with a plain-SGD probe.

    The architecture keeps the depth of `base_cfg.arch` and replaces every
    hidden size by the sweep width. Returns the per-width final test
    accuracy and final variance ratio, plus their Pearson correlation.
    """
    if not widths:
        raise ValueError("widths must be non-empty")
    d = data.train_x.shape[1]
    c = data.class_count
    n_hidden = max(1, len(base_cfg.arch) - 2)
    probe_lr = base_cfg.ov_probe_lr if base_cfg.ov_probe_lr is not None else 1e-3

    rows = []
    for w in widths:
        cfg = replace(base_cfg, arch=(d, *([int(w)] * n_hidden), c), ov_probe_lr=probe_lr)
        trace = train_with_trace(data, cfg)
        rows.append(WidthRow(int(w), trace[-1].test_acc, trace[-1].ov))
    r = pearson_r([row.final_ov for row in rows], [row.final_test_acc for row in rows])
    return rows, r
