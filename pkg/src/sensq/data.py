"""Datasets of [0,1]-bounded feature vectors with binary labels.

Includes a deterministic synthetic generator (desk-scale stand-in for an
image corpus) and an exact CSV round-trip.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetError


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (m, n) in [0,1] with labels in {0, 1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if f.ndim != 2 or y.ndim != 1 or f.shape[0] != y.shape[0]:
            raise DatasetError(
                f"inconsistent dataset shapes: features {f.shape}, labels {y.shape}"
            )
        if f.size and (not np.isfinite(f).all() or f.min() < 0.0 or f.max() > 1.0):
            raise DatasetError("features must be finite and within [0, 1]")
        if y.size and not np.isin(y, (0, 1)).all():
            raise DatasetError("labels must be 0 or 1")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        return int((self.labels == 0).sum()), int((self.labels == 1).sum())

    def subset(self, mask) -> "Dataset":
        return Dataset(self.features[mask], self.labels[mask])


def gen_synthetic(
    n_features: int, per_class: int, margin: float, seed: int
) -> Dataset:
    """Two linearly separable clusters inside the unit box.

    Class 0 is uniform in [0, 0.5 - margin/2]^n, class 1 in
    [0.5 + margin/2, 1]^n, so every coordinate (and the feature mean)
    separates the classes with a gap of `margin`.  Deterministic per seed.
    """
    if n_features < 2:
        raise DatasetError(f"need at least 2 features, got {n_features}")
    if per_class < 1:
        raise DatasetError(f"need at least 1 sample per class, got {per_class}")
    if not 0.0 < margin < 0.5:
        raise DatasetError(f"margin must be in (0, 0.5), got {margin}")
    rng = np.random.default_rng(seed)
    lo_hi = 0.5 - margin / 2.0
    hi_lo = 0.5 + margin / 2.0
    x0 = rng.uniform(0.0, lo_hi, size=(per_class, n_features))
    x1 = rng.uniform(hi_lo, 1.0, size=(per_class, n_features))
    features = np.vstack([x0, x1])
    labels = np.concatenate([np.zeros(per_class, int), np.ones(per_class, int)])
    order = rng.permutation(2 * per_class)
    return Dataset(features[order], labels[order])


def _header(n: int) -> list[str]:
    return [f"f{i}" for i in range(n)] + ["label"]


def save_csv(d: Dataset, path: str | Path) -> None:
    """Write the dataset with full-precision (repr) feature values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_header(d.n_features))
        for row, label in zip(d.features, d.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def load_csv(path: str | Path) -> Dataset:
    """Parse a `f0,...,f{n-1},label` CSV; rejects out-of-range rows by number."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        n = len(header) - 1
        if n < 1 or header != _header(n):
            raise DatasetError(
                f"{path}: header must be f0,...,f{{n-1}},label, got {header}"
            )
        features, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 1:
                raise DatasetError(f"{path}:{lineno}: expected {n + 1} fields")
            try:
                values = [float(v) for v in row[:n]]
                label = float(row[n])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            for i, v in enumerate(values):
                if not np.isfinite(v) or not 0.0 <= v <= 1.0:
                    raise DatasetError(
                        f"{path}:{lineno}: feature f{i}={v} outside [0, 1]"
                    )
            if label not in (0.0, 1.0):
                raise DatasetError(f"{path}:{lineno}: label {row[n]!r} not in {{0,1}}")
            features.append(values)
            labels.append(int(label))
    if not features:
        raise DatasetError(f"{path}: no data rows")
    return Dataset(np.array(features, dtype=np.float64), np.array(labels, int))
