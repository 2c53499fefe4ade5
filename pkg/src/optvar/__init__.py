"""optvar: training-set-only generalization diagnostics.

A small, deterministic laboratory for studying how a classifier's test
behavior can be read off its training dynamics: exact bias/variance splits
of MSE, cross-entropy, and zero-one test losses over model ensembles, a
relative update-variance metric computed from training batches alone, and
early stopping that never touches a validation or test set.
"""

from .nn import (
    Batch,
    MlpSpec,
    Model,
    ce_grad,
    ce_loss,
    ce_loss_and_grad,
    finite_diff_grad,
    forward_logits,
    init_model,
    softmax,
)
from .optim import AdamState, OptimizerState, SgdState, describe, preview_update, step
from .decomp import (
    DecompResult,
    LossKind,
    argmin_check,
    decompose,
    ensemble_bias_variance,
    eval_loss,
    expected_output,
    hardmax,
)
from .ov import (
    CandidateUpdateSet,
    DegenerateLogitsError,
    GradVarEstimate,
    OvEstimate,
    candidate_updates,
    draw_ov_batches,
    grad_variance,
    logit_jacobian,
    ov_first_order,
    ov_mean,
    ov_point,
)
from .data import (
    Dataset,
    IdxFormatError,
    NoiseSpec,
    gen_blobs,
    inject_label_noise,
    load_dataset,
    load_dataset_csv,
    load_idx,
    one_hot,
    save_dataset_csv,
    subsample_train_sets,
)
from .analysis import EarlyStopConfig, find_stop_epoch, moving_average, pearson_r
from .harness import (
    RunConfig,
    TraceRow,
    WidthRow,
    ensemble_trace,
    ov_series,
    train_with_trace,
    width_sweep,
)
from .trace_io import TRACE_HEADER, read_trace_csv, write_trace_csv

__version__ = "0.1.0"
