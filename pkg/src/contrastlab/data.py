"""Desk-scale dataset provisioning: seeded synthetic clusters, augmented
views, and ingestion of external feature CSVs.

Labels exist purely for the nearest-neighbor evaluation protocol; no
loss ever sees them. All randomness flows through explicit generator
objects, so everything here is reproducible and safe to use from
multiple threads with distinct generators.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentWidth, InvalidParams, ParseError


@dataclass
class Dataset:
    features: np.ndarray  # (M, D_in) float64
    labels: np.ndarray    # (M,) int64, values in [0, class_count)
    class_count: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise InvalidParams("features must be (M, D) with one label per row")
        if self.class_count < 2:
            raise InvalidParams(f"class_count must be >= 2, got {self.class_count}")
        if len(self.features) < self.class_count:
            raise InvalidParams("need at least one sample per class")
        if not np.all(np.isfinite(self.features)):
            raise InvalidParams("features must be finite")
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise InvalidParams("labels must lie in [0, class_count)")

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class AugmentationConfig:
    """Additive noise, then per-row scale jitter, then coordinate masking.

    The order is fixed for reproducibility. ``seed`` is only used when a
    view generator is not handed an explicit random generator.
    """

    noise_sigma: float = 0.0
    scale_jitter: tuple[float, float] = (1.0, 1.0)
    mask_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.scale_jitter
        if self.noise_sigma < 0:
            raise InvalidParams(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 < lo <= 1 <= hi:
            raise InvalidParams(f"scale_jitter must satisfy 0 < lo <= 1 <= hi, got {(lo, hi)}")
        if not 0 <= self.mask_prob < 1:
            raise InvalidParams(f"mask_prob must lie in [0, 1), got {self.mask_prob}")


def generate_clusters(
    class_count: int,
    per_class: int,
    d_in: int,
    spread: float,
    separation: float,
    seed: int,
) -> Dataset:
    """Isotropic Gaussian clusters with centers on a sphere of radius ``separation``.

    Deterministic for a fixed seed: the same call yields a byte-identical
    dataset.
    """
    if class_count < 2:
        raise InvalidParams(f"class_count must be >= 2, got {class_count}")
    if per_class < 1 or d_in < 2:
        raise InvalidParams("per_class must be >= 1 and d_in >= 2")
    if spread <= 0 or separation <= 0:
        raise InvalidParams("spread and separation must be > 0")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((class_count, d_in))
    centers *= separation / np.linalg.norm(centers, axis=1, keepdims=True)
    features = np.repeat(centers, per_class, axis=0)
    features = features + rng.normal(0.0, spread, features.shape)
    labels = np.repeat(np.arange(class_count), per_class)
    return Dataset(features=features, labels=labels, class_count=class_count)


def make_views(
    batch, cfg: AugmentationConfig, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Two independently augmented copies of each row.

    Row i of both views derives from row i of the input, so index i is a
    positive pair by construction. Deterministic given the generator
    state; draws happen in a fixed order (view a fully before view b;
    noise, jitter, mask within each view).
    """
    x = np.asarray(batch, dtype=np.float64)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.scale_jitter
    views = []
    for _ in range(2):
        v = x + rng.normal(0.0, cfg.noise_sigma, x.shape) if cfg.noise_sigma > 0 else x.copy()
        v = v * rng.uniform(lo, hi, (len(x), 1))
        if cfg.mask_prob > 0:
            v[rng.random(x.shape) < cfg.mask_prob] = 0.0
        views.append(v)
    return views[0], views[1]


def load_features_csv(path) -> Dataset:
    """Parse a feature file: D floats then an integer label per row.

    A single non-numeric header line is skipped. Raises ParseError for
    malformed values or an empty file and InconsistentWidth when a row's
    column count differs from the first data row; both carry the
    offending 1-based line number.
    """
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for line_no, record in enumerate(reader, start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            if width is None and line_no == 1:
                try:
                    [float(cell) for cell in record]
                except ValueError:
                    continue  # header line
            if len(record) < 2:
                raise ParseError(line_no, "need at least one feature and a label")
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise InconsistentWidth(line_no, f"expected {width} columns, got {len(record)}")
            try:
                rows.append([float(cell) for cell in record[:-1]])
            except ValueError as exc:
                raise ParseError(line_no, f"bad feature value ({exc})") from None
            label_text = record[-1].strip()
            try:
                labels.append(int(label_text))
            except ValueError:
                raise ParseError(line_no, f"bad label {label_text!r}") from None
            if labels[-1] < 0:
                raise ParseError(line_no, f"labels must be >= 0, got {labels[-1]}")
    if not rows:
        raise ParseError(0, "no data rows")
    return Dataset(
        features=np.array(rows, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64),
        class_count=int(max(labels)) + 1,
    )
