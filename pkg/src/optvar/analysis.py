"""Series utilities: smoothing, patience-based stopping, correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["EarlyStopConfig", "moving_average", "find_stop_epoch", "pearson_r"]


@dataclass(frozen=True)
class EarlyStopConfig:
    window: int = 10
    patience: int = 10
    mode: str = "minimize"

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.mode not in ("minimize", "maximize"):
            raise ValueError("mode must be 'minimize' or 'maximize'")


def moving_average(series, window: int) -> list[float]:
    """Causal mean over the last `window` values; the window shrinks at the start."""
    values = [float(v) for v in series]
    if not values:
        raise ValueError("series must be non-empty")
    if window < 1:
        raise ValueError("window must be >= 1")
    out = []
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out.append(sum(values[lo : i + 1]) / (i + 1 - lo))
    return out


def find_stop_epoch(series, cfg: EarlyStopConfig) -> tuple[int, int]:
    """Patience stopping on the smoothed series.

    Tracks the running best (strict improvement only, so ties keep the
    earlier index) and stops at the first index where `patience`
    consecutive values brought no new best; otherwise runs to the end.
    Returns (best_index, stop_index) into the input series, 0-based.
    """
    smoothed = moving_average(series, cfg.window)
    sign = 1.0 if cfg.mode == "minimize" else -1.0
    best = sign * smoothed[0]
    best_idx = 0
    since_best = 0
    stop_idx = len(smoothed) - 1
    for i in range(1, len(smoothed)):
        v = sign * smoothed[i]
        if v < best:
            best = v
            best_idx = i
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                stop_idx = i
                break
    return best_idx, stop_idx


def pearson_r(a, b) -> float:
    """Sample Pearson correlation coefficient."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-D with equal length")
    if a.size < 2:
        raise ValueError("need at least 2 points")
    ac = a - a.mean()
    bc = b - b.mean()
    denom = np.sqrt((ac @ ac) * (bc @ bc))
    if denom == 0.0:
        raise ValueError("zero variance input")
    return float((ac @ bc) / denom)
