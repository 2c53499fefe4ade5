"""CSV persistence for per-epoch traces.

The header is fixed and byte-exact; floats use repr, which is the shortest
string that round-trips, so read(write(trace)) reproduces the trace
exactly. Files are written atomically (temp file + rename).
"""

from __future__ import annotations

import os

from .harness import TraceRow

__all__ = ["TRACE_HEADER", "write_trace_csv", "read_trace_csv"]

TRACE_HEADER = "epoch,train_ce,test_ce,test_mse,test_zo,test_acc,ov,v_g,bias,variance"
_N_FIELDS = len(TRACE_HEADER.split(","))


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_trace_csv(trace: list[TraceRow], path: str) -> None:
    lines = [TRACE_HEADER]
    for row in trace:
        lines.append(
            ",".join(
                [
                    str(int(row.epoch)),
                    _fmt(row.train_ce),
                    _fmt(row.test_ce),
                    _fmt(row.test_mse),
                    _fmt(row.test_zo),
                    _fmt(row.test_acc),
                    _fmt(row.ov),
                    _fmt(row.v_g),
                    _fmt(row.bias),
                    _fmt(row.variance),
                ]
            )
        )
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_trace_csv(path: str) -> list[TraceRow]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError(f"{path}: line 1: expected header {TRACE_HEADER!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != _N_FIELDS:
            raise ValueError(f"{path}: line {lineno}: expected {_N_FIELDS} fields, got {len(parts)}")
        try:
            rows.append(
                TraceRow(
                    epoch=int(parts[0]),
                    train_ce=float(parts[1]),
                    test_ce=float(parts[2]),
                    test_mse=float(parts[3]),
                    test_zo=float(parts[4]),
                    test_acc=float(parts[5]),
                    ov=float(parts[6]),
                    v_g=float(parts[7]),
                    bias=float(parts[8]) if parts[8] else None,
                    variance=float(parts[9]) if parts[9] else None,
                )
            )
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: malformed value ({exc})") from None
    return rows
