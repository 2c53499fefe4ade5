"""Datasets: synthetic Gaussian blobs, IDX ingestion, CSV files, label noise."""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "NoiseSpec",
    "IdxFormatError",
    "gen_blobs",
    "load_idx",
    "inject_label_noise",
    "subsample_train_sets",
    "save_dataset_csv",
    "load_dataset_csv",
    "load_dataset",
    "one_hot",
]


class IdxFormatError(ValueError):
    """Malformed IDX file: bad magic, truncation, or inconsistent counts."""


def one_hot(labels: np.ndarray, c: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels must lie in [0, {c})")
    out = np.zeros((labels.size, c))
    out[np.arange(labels.size), labels] = 1.0
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Train and (optional) test split with one-hot labels."""

    train_x: np.ndarray
    train_t: np.ndarray
    test_x: np.ndarray | None
    test_t: np.ndarray | None
    class_count: int

    def __post_init__(self) -> None:
        if self.train_x.shape[0] != self.train_t.shape[0]:
            raise ValueError("train_x and train_t row counts differ")
        if self.train_t.shape[1] != self.class_count:
            raise ValueError("train_t column count does not match class_count")
        if (self.test_x is None) != (self.test_t is None):
            raise ValueError("test_x and test_t must be both present or both absent")
        if self.test_x is not None:
            if self.test_x.shape[1] != self.train_x.shape[1]:
                raise ValueError("train and test feature dimensions differ")
            if self.test_t.shape[1] != self.class_count:
                raise ValueError("test_t column count does not match class_count")

    @property
    def has_test(self) -> bool:
        return self.test_x is not None


@dataclass(frozen=True)
class NoiseSpec:
    """Fraction of training rows whose labels get shuffled, plus the seed."""

    fraction: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")


def gen_blobs(
    c: int, d: int, n_train: int, n_test: int, spread: float, seed: int
) -> Dataset:
    """Balanced Gaussian blobs around c random unit-sphere centers.

    Splits must divide evenly by c so every class gets the same count.
    Fully deterministic for a given seed.
    """
    if c < 2 or d < 1:
        raise ValueError("need c >= 2 classes and d >= 1 dimensions")
    if spread <= 0:
        raise ValueError("spread must be positive")
    if n_train < c or n_test < c or n_train % c or n_test % c:
        raise ValueError("n_train and n_test must be positive multiples of c")

    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((c, d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)

    def split(n: int) -> tuple[np.ndarray, np.ndarray]:
        labels = np.repeat(np.arange(c), n // c)
        x = centers[labels] + spread * rng.standard_normal((n, d))
        perm = rng.permutation(n)
        return x[perm], one_hot(labels[perm], c)

    train_x, train_t = split(n_train)
    test_x, test_t = split(n_test)
    return Dataset(train_x, train_t, test_x, test_t, c)


_IDX_IMAGE_MAGIC = 2051
_IDX_LABEL_MAGIC = 2049


def _read_idx(path: str, magic: int, n_dims: int) -> tuple[tuple[int, ...], np.ndarray]:
    with open(path, "rb") as fh:
        buf = fh.read()
    header_len = 4 * (1 + n_dims)
    if len(buf) < header_len:
        raise IdxFormatError(f"{path}: truncated header ({len(buf)} bytes)")
    fields = struct.unpack(f">{1 + n_dims}i", buf[:header_len])
    if fields[0] != magic:
        raise IdxFormatError(f"{path}: bad magic {fields[0]}, expected {magic}")
    dims = fields[1:]
    expected = header_len + math.prod(dims)
    if len(buf) != expected:
        raise IdxFormatError(f"{path}: expected {expected} bytes, found {len(buf)}")
    return dims, np.frombuffer(buf, dtype=np.uint8, offset=header_len)


def load_idx(images_path: str, labels_path: str) -> tuple[np.ndarray, np.ndarray]:
    """Big-endian IDX image/label pair -> (n x pixels in [0,1], n x 10 one-hot)."""
    (n_img, rows, cols), pixels = _read_idx(images_path, _IDX_IMAGE_MAGIC, 3)
    (n_lbl,), labels = _read_idx(labels_path, _IDX_LABEL_MAGIC, 1)
    if n_img != n_lbl:
        raise IdxFormatError(f"{n_img} images but {n_lbl} labels")
    if labels.size and labels.max() > 9:
        raise IdxFormatError(f"label byte {labels.max()} out of range 0..9")
    x = pixels.reshape(n_img, rows * cols).astype(np.float64) / 255.0
    return x, one_hot(labels, 10)


def inject_label_noise(t: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Shuffle the labels of a seeded random subset of rows.

    ceil(fraction * n) rows are selected without replacement and their
    labels permuted among themselves, so the global label multiset is
    preserved and at most that many rows change.
    """
    t = np.asarray(t, dtype=np.float64)
    n = t.shape[0]
    k = math.ceil(spec.fraction * n)
    if k == 0:
        return t.copy()
    rng = np.random.default_rng(spec.seed)
    idx = rng.choice(n, size=k, replace=False)
    out = t.copy()
    out[idx] = t[idx][rng.permutation(k)]
    return out


def subsample_train_sets(n: int, k: int, frac: float, seed: int) -> list[np.ndarray]:
    """K independent seeded draws of floor(frac * n) row indices, no replacement."""
    if not 0.0 < frac <= 1.0:
        raise ValueError("frac must lie in (0, 1]")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    size = int(frac * n)
    return [rng.choice(n, size=size, replace=False) for _ in range(k)]


def save_dataset_csv(x: np.ndarray, t: np.ndarray, path: str) -> None:
    """Headerless CSV: d feature columns then one integer label column."""
    labels = np.argmax(t, axis=1)
    lines = [
        ",".join(repr(float(v)) for v in row) + f",{int(lbl)}"
        for row, lbl in zip(x, labels)
    ]
    _atomic_write(path, "\n".join(lines) + "\n")


def load_dataset_csv(path: str, class_count: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Read a headerless feature+label CSV back into (x, one-hot t)."""
    xs: list[list[float]] = []
    labels: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise ValueError(f"{path}: line {lineno}: need features and a label")
            try:
                xs.append([float(p) for p in parts[:-1]])
                labels.append(int(parts[-1]))
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    if not xs:
        raise ValueError(f"{path}: empty dataset")
    x = np.asarray(xs, dtype=np.float64)
    lbl = np.asarray(labels, dtype=np.int64)
    c = class_count if class_count is not None else int(lbl.max()) + 1
    return x, one_hot(lbl, c)


def load_dataset(path: str) -> Dataset:
    """Load a dataset from `<path>_train.csv` (+ optional `<path>_test.csv`).

    A path that is itself an existing CSV file is treated as a train-only
    dataset.
    """
    if os.path.isfile(path):
        train_path, test_path = path, None
    else:
        train_path = f"{path}_train.csv"
        test_path = f"{path}_test.csv"
        if not os.path.isfile(train_path):
            raise FileNotFoundError(f"no dataset at {path} (looked for {train_path})")
        if not os.path.isfile(test_path):
            test_path = None

    train_x, train_t = load_dataset_csv(train_path)
    c = train_t.shape[1]
    if test_path is None:
        return Dataset(train_x, train_t, None, None, c)
    test_x, test_t = load_dataset_csv(test_path)
    c = max(c, test_t.shape[1])
    # re-widen one-hots in case one split is missing the top class
    train_t = one_hot(np.argmax(train_t, axis=1), c)
    test_t = one_hot(np.argmax(test_t, axis=1), c)
    return Dataset(train_x, train_t, test_x, test_t, c)


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)
