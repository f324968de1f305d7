"""Dataset containers, file loaders, standardizers, and synthetic generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, DegenerateRowError, DimensionError, DomainError


@dataclass
class Dataset:
    """A feature matrix with -1/+1 labels."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2:
            raise DimensionError("X must be 2-d")
        if self.y.shape != (self.X.shape[0],):
            raise DimensionError("y length must match X rows")
        if self.X.size and not np.all(np.isfinite(self.X)):
            raise DataFormatError("X contains non-finite entries")
        values = set(np.unique(self.y)) if self.y.size else set()
        if not values <= {-1.0, 1.0}:
            bad = sorted(values - {-1.0, 1.0})
            raise DataFormatError(f"labels must be -1/+1, got {bad[0]:g}")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]


@dataclass
class SplitPlan:
    """Train/test index pairs plus the seed that produced them."""

    splits: list = field(default_factory=list)
    seed: int | None = None


def _map_labels(raw, where):
    values = set(raw)
    if values <= {-1.0, 1.0}:
        return np.asarray(raw, dtype=float)
    if values <= {0.0, 1.0}:
        return np.where(np.asarray(raw) == 0.0, -1.0, 1.0)
    bad = sorted(values - {-1.0, 0.0, 1.0})
    raise DataFormatError(f"{where}: unknown label value {bad[0]:g}")


def load_dense_csv(path, label_column=-1, has_header=False):
    """Read a numeric CSV into a :class:`Dataset`.

    ``label_column`` is a position (negative allowed) or, with a header, a
    column name. Labels may be -1/+1 or 0/1; 0 maps to -1. Parse failures
    name the offending row and column.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = None
    if has_header:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataFormatError(f"{path}: no data rows after header")
    width = len(rows[0])
    if isinstance(label_column, str):
        if header is None:
            raise DataFormatError("label column by name requires a header")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise DataFormatError(f"no column named {label_column!r} in header") from None
    else:
        label_idx = label_column % width
    data = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        rownum = i + (2 if has_header else 1)
        if len(row) != width:
            raise DataFormatError(
                f"row {rownum}: expected {width} fields, found {len(row)}")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"row {rownum}, column {j + 1}: cannot parse {cell.strip()!r}"
                ) from None
            if not np.isfinite(data[i, j]):
                raise DataFormatError(
                    f"row {rownum}, column {j + 1}: non-finite value {cell.strip()!r}")
    y = _map_labels(data[:, label_idx], path)
    X = np.delete(data, label_idx, axis=1)
    names = None
    if header is not None:
        names = [h for k, h in enumerate(header) if k != label_idx]
    return Dataset(X=X, y=y, feature_names=names)


def load_sparse_svmlight(path):
    """Read ``label idx:val ...`` lines with 1-based strictly increasing indices."""
    labels = []
    entries = []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise DataFormatError(
                    f"line {lineno}: cannot parse label {tokens[0]!r}") from None
            row = []
            prev = 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise DataFormatError(f"line {lineno}: malformed token {tok!r}")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise DataFormatError(
                        f"line {lineno}: malformed token {tok!r}") from None
                if idx <= prev:
                    raise DataFormatError(
                        f"line {lineno}: index {idx} not greater than {prev} "
                        "(indices must be 1-based and strictly increasing)")
                if not np.isfinite(val):
                    raise DataFormatError(
                        f"line {lineno}: non-finite value in token {tok!r}")
                prev = idx
                row.append((idx, val))
            max_idx = max(max_idx, prev)
            entries.append(row)
    if not entries:
        raise DataFormatError(f"{path}: empty file")
    X = np.zeros((len(entries), max_idx))
    for i, row in enumerate(entries):
        for idx, val in row:
            X[i, idx - 1] = val
    y = _map_labels(labels, path)
    return Dataset(X=X, y=y)


def standardize_columns(train_X, apply_X=None):
    """Center and scale columns by train statistics (population sd).

    Zero-variance columns keep scale 1 so they map to exactly zero. Returns
    ``(train_out, apply_out, (mean, scale))``; ``apply_out`` is None when no
    second matrix is given.
    """
    train_X = np.asarray(train_X, dtype=float)
    mean = train_X.mean(axis=0)
    scale = train_X.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    train_out = (train_X - mean) / scale
    apply_out = None
    if apply_X is not None:
        apply_X = np.asarray(apply_X, dtype=float)
        if apply_X.shape[1] != train_X.shape[1]:
            raise DimensionError("apply_X column count differs from train_X")
        apply_out = (apply_X - mean) / scale
    return train_out, apply_out, (mean, scale)


def _standardize_rows(X, label):
    mean = X.mean(axis=1, keepdims=True)
    sd = X.std(axis=1, keepdims=True)
    flat = np.flatnonzero(sd[:, 0] == 0.0)
    if flat.size:
        raise DegenerateRowError(
            f"{label} row {flat[0]} has zero variance and cannot be row-standardized")
    return (X - mean) / sd


def standardize_rows_then_columns(train_X, apply_X=None):
    """Standardize each sample row, then the columns by train statistics.

    Rows use their own mean and population sd independently, so no train
    statistic leaks into held-out rows; the column stage reuses
    :func:`standardize_columns`. A constant row (including any single-feature
    row) raises :class:`DegenerateRowError` with its index.
    """
    train_X = np.asarray(train_X, dtype=float)
    train_rows = _standardize_rows(train_X, "train")
    apply_rows = None
    if apply_X is not None:
        apply_rows = _standardize_rows(np.asarray(apply_X, dtype=float), "apply")
    return standardize_columns(train_rows, apply_rows)


def _waveform_shapes():
    i = np.arange(1, 22, dtype=float)
    h1 = np.maximum(6.0 - np.abs(i - 7.0), 0.0)
    h2 = np.maximum(6.0 - np.abs(i - 15.0), 0.0)
    h3 = np.maximum(6.0 - np.abs(i - 11.0), 0.0)
    return h1, h2, h3


def gen_waveform(n_per_class, noise_dims=19, seed=None):
    """Two-class waveform data: 21 shape dimensions plus pure-noise columns.

    Class +1 mixes the first and second triangular shapes with a uniform
    weight, class -1 the first and third; every entry gets unit Gaussian
    noise, and the extra columns are unit Gaussian noise only.
    """
    if n_per_class < 1:
        raise DomainError("n_per_class must be at least 1")
    if noise_dims < 0:
        raise DomainError("noise_dims must be nonnegative")
    h1, h2, h3 = _waveform_shapes()
    rng = np.random.default_rng(seed)
    n = 2 * n_per_class
    u = rng.random(n)
    signal = np.empty((n, 21))
    signal[:n_per_class] = np.outer(u[:n_per_class], h1) + np.outer(
        1.0 - u[:n_per_class], h2)
    signal[n_per_class:] = np.outer(u[n_per_class:], h1) + np.outer(
        1.0 - u[n_per_class:], h3)
    signal += rng.standard_normal((n, 21))
    X = np.hstack([signal, rng.standard_normal((n, noise_dims))])
    y = np.concatenate([np.ones(n_per_class), -np.ones(n_per_class)])
    return Dataset(X=X, y=y)


def gen_sparse_informative(n, m, k_informative, effect_size, seed=None):
    """Gaussian features where only a random subset drives the label.

    The label is the sign of ``effect_size * sum(informative dims) + noise``.
    Returns ``(dataset, informative)`` with the ground-truth 0-based indices.
    Redraws up to 100 times if a draw comes out single-class.
    """
    if not 1 <= k_informative <= m:
        raise DomainError("k_informative must lie in [1, m]")
    rng = np.random.default_rng(seed)
    for _ in range(100):
        X = rng.standard_normal((n, m))
        informative = np.sort(rng.choice(m, size=k_informative, replace=False))
        z = effect_size * X[:, informative].sum(axis=1) + rng.standard_normal(n)
        y = np.where(z >= 0.0, 1.0, -1.0)
        if np.unique(y).size == 2:
            return Dataset(X=X, y=y), informative
    raise DomainError(
        "generator drew a single class 100 times; adjust n or effect_size")


def loocv_splits(n):
    """Leave-one-out folds over ``n`` samples."""
    if n < 2:
        raise DomainError("leave-one-out needs at least 2 samples")
    all_idx = np.arange(n)
    splits = [(np.delete(all_idx, i), np.array([i])) for i in range(n)]
    return SplitPlan(splits=splits, seed=None)


def stratified_split(dataset, train_fraction, seed=None):
    """One seeded stratified train/test split preserving class proportions."""
    if not 0.0 < train_fraction < 1.0:
        raise DomainError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train_parts = []
    test_parts = []
    for cls in np.unique(dataset.y):
        idx = np.flatnonzero(dataset.y == cls)
        rng.shuffle(idx)
        k = int(round(train_fraction * idx.size))
        train_parts.append(idx[:k])
        test_parts.append(idx[k:])
    train = np.sort(np.concatenate(train_parts))
    test = np.sort(np.concatenate(test_parts))
    return SplitPlan(splits=[(train, test)], seed=seed)
