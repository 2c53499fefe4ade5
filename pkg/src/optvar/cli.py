"""Command-line front end: data generation, trace runs, ensemble
decomposition, validation-free early stopping, and width sweeps.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .analysis import EarlyStopConfig, find_stop_epoch
from .data import NoiseSpec, gen_blobs, load_dataset, save_dataset_csv
from .decomp import LossKind
from .harness import RunConfig, ensemble_trace, ov_series, train_with_trace, width_sweep
from .trace_io import write_trace_csv

__all__ = ["run_cli", "main"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset prefix (expects <prefix>_train.csv)")
    p.add_argument("--arch", default="20,32,32,3", help="comma-separated layer sizes d,h1,...,c")
    p.add_argument("--opt", default="adam", choices=["sgd", "adam"], help="training optimizer")
    p.add_argument("--lr", type=float, default=1e-3, help="learning rate")
    p.add_argument("--momentum", type=float, default=0.0, help="SGD momentum")
    p.add_argument("--epochs", type=int, default=50, help="training epochs")
    p.add_argument("--batch-size", type=int, default=128, help="minibatch size")
    p.add_argument("--label-noise", type=float, default=0.0, help="fraction of train labels to shuffle")
    p.add_argument("--ov-batches", type=int, default=10, help="measurement batches per epoch")
    p.add_argument("--ov-batch-size", type=int, default=None, help="measurement batch size (default: --batch-size)")
    p.add_argument("--ov-samples", type=int, default=1000, help="training inputs the variance ratio averages over")
    p.add_argument("--ov-probe-lr", type=float, default=None, help="use a plain-SGD probe with this lr for measurement")
    p.add_argument("--seed", type=int, default=0, help="run seed")


def _config_from(args: argparse.Namespace) -> RunConfig:
    noise = None
    if args.label_noise > 0:
        noise = NoiseSpec(args.label_noise, seed=args.seed + 99991)
    return RunConfig(
        arch=_parse_int_list(args.arch),
        optimizer=args.opt,
        learning_rate=args.lr,
        momentum=args.momentum,
        epochs=args.epochs,
        batch_size=args.batch_size,
        label_noise=noise,
        ov_batches=args.ov_batches,
        ov_batch_size=args.ov_batch_size,
        ov_samples=args.ov_samples,
        ov_probe_lr=args.ov_probe_lr,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="optvar",
        description="Training diagnostics: loss decomposition, update-variance metric, validation-free early stopping.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("gen-data", help="generate a synthetic blobs dataset", formatter_class=fmt)
    p.add_argument("--classes", type=int, default=3, help="number of classes")
    p.add_argument("--dim", type=int, default=20, help="input dimension")
    p.add_argument("--n-train", type=int, default=3000, help="training rows")
    p.add_argument("--n-test", type=int, default=600, help="test rows")
    p.add_argument("--spread", type=float, default=0.35, help="within-class noise std")
    p.add_argument("--seed", type=int, default=0, help="generation seed")
    p.add_argument("--out", required=True, help="output prefix; writes <out>_train.csv and <out>_test.csv")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train one model and write its per-epoch trace", formatter_class=fmt)
    _add_run_flags(p)
    p.add_argument("--out", required=True, help="trace CSV path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("decompose", help="K-model ensemble run tracing bias and variance", formatter_class=fmt)
    _add_run_flags(p)
    p.add_argument("--k", type=int, default=5, help="ensemble size")
    p.add_argument("--frac", type=float, default=0.5, help="training fraction per member")
    p.add_argument("--loss", default="zo", choices=["mse", "ce", "zo"], help="loss to decompose")
    p.add_argument("--out", required=True, help="trace CSV path")
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("earlystop", help="early stopping from training data only", formatter_class=fmt)
    _add_run_flags(p)
    p.add_argument("--window", type=int, default=10, help="moving-average window")
    p.add_argument("--patience", type=int, default=10, help="epochs without improvement before stopping")
    p.add_argument("--out", default=None, help="optional trace CSV path (needs a test split)")
    p.set_defaults(func=_cmd_earlystop)

    p = sub.add_parser("widthsweep", help="sweep hidden widths and correlate accuracy with the variance ratio", formatter_class=fmt)
    _add_run_flags(p)
    p.add_argument("--widths", default="4,8,16,32,64", help="comma-separated hidden widths")
    p.add_argument("--out", required=True, help="summary CSV path")
    p.set_defaults(func=_cmd_widthsweep)

    return parser


def _cmd_gen_data(args: argparse.Namespace) -> int:
    out = args.out[:-4] if args.out.endswith(".csv") else args.out
    data = gen_blobs(args.classes, args.dim, args.n_train, args.n_test, args.spread, args.seed)
    save_dataset_csv(data.train_x, data.train_t, f"{out}_train.csv")
    save_dataset_csv(data.test_x, data.test_t, f"{out}_test.csv")
    print(f"wrote {out}_train.csv ({args.n_train} rows) and {out}_test.csv ({args.n_test} rows)")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    data = load_dataset(args.data)
    if not data.has_test:
        raise RuntimeError("train needs a dataset with a test split")
    trace = train_with_trace(data, _config_from(args))
    write_trace_csv(trace, args.out)
    last = trace[-1]
    print(f"wrote {args.out} ({len(trace)} epochs)")
    print(f"final: test_acc={last.test_acc:.4f} test_ce={last.test_ce:.4f} ov={last.ov:.6g}")
    return 0


def _cmd_decompose(args: argparse.Namespace) -> int:
    data = load_dataset(args.data)
    trace = ensemble_trace(data, _config_from(args), args.k, args.frac, LossKind(args.loss))
    write_trace_csv(trace, args.out)
    last = trace[-1]
    print(f"wrote {args.out} ({len(trace)} epochs, k={args.k}, frac={args.frac}, loss={args.loss})")
    print(f"final: expected_loss={_loss_column(last, args.loss):.4f} bias={last.bias:.4f} variance={last.variance:.4f}")
    return 0


def _loss_column(row, loss: str) -> float:
    return {"mse": row.test_mse, "ce": row.test_ce, "zo": row.test_zo}[loss]


def _cmd_earlystop(args: argparse.Namespace) -> int:
    data = load_dataset(args.data)
    cfg = _config_from(args)
    stop_cfg = EarlyStopConfig(args.window, args.patience, "minimize")
    print(f"early stopping on smoothed ov: window={args.window} patience={args.patience}")

    if data.has_test:
        trace = train_with_trace(data, cfg)
        ov = [r.ov for r in trace]
        best, stop = find_stop_epoch(ov, stop_cfg)
        print(f"best_epoch={trace[best].epoch} stop_epoch={trace[stop].epoch}")
        gt_best, gt_stop = find_stop_epoch(
            [r.test_acc for r in trace], EarlyStopConfig(args.window, args.patience, "maximize")
        )
        print(f"test_error_at_best={trace[best].test_zo:.4f}")
        print(
            f"groundtruth (test accuracy): best_epoch={trace[gt_best].epoch} "
            f"stop_epoch={trace[gt_stop].epoch} test_error_at_best={trace[gt_best].test_zo:.4f}"
        )
        print(f"abs_test_error_gap={abs(trace[best].test_zo - trace[gt_best].test_zo):.4f}")
        if args.out:
            write_trace_csv(trace, args.out)
            print(f"wrote {args.out}")
    else:
        if args.out:
            raise RuntimeError("--out needs a test split; this dataset is train-only")
        series = ov_series(data.train_x, data.train_t, cfg)
        best, stop = find_stop_epoch([e.value for e in series], stop_cfg)
        print(f"best_epoch={series[best].epoch} stop_epoch={series[stop].epoch}")
        print("no test split present; groundtruth comparison skipped")
    return 0


def _cmd_widthsweep(args: argparse.Namespace) -> int:
    data = load_dataset(args.data)
    rows, r = width_sweep(data, _config_from(args), list(_parse_int_list(args.widths)))
    lines = ["width,final_test_acc,final_ov"]
    for row in rows:
        lines.append(f"{row.width},{row.final_test_acc!r},{row.final_ov!r}")
    tmp = f"{args.out}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, args.out)
    for row in rows:
        print(f"width={row.width}: final_test_acc={row.final_test_acc:.4f} final_ov={row.final_ov:.6g}")
    print(f"pearson_r(final_ov, final_test_acc)={r:.4f}")
    print(f"wrote {args.out}")
    return 0


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return 0 if not exc.code else 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
