"""Representation quality via k-nearest-neighbor classification.

Distance is 1 - cosine similarity on row-normalized embeddings, matching
the geometry the losses optimize. All tie-breaks are defined on values
(distance, then summed distance, then class index), never on row order,
so results are invariant under permutations of the training set.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset
from .errors import ClassTooSmall, EmptySplit, InvalidParams, ShapeMismatch


def knn_top1(train_emb, train_labels, test_emb, test_labels, k: int = 15) -> float:
    """Fraction of test rows whose majority label among the k nearest
    training rows (cosine distance) matches their true label.

    Vote ties break toward the candidate class with the smaller summed
    distance, then toward the smaller class index.
    """
    tr = np.asarray(train_emb, dtype=np.float64)
    te = np.asarray(test_emb, dtype=np.float64)
    trl = np.asarray(train_labels, dtype=np.int64)
    tel = np.asarray(test_labels, dtype=np.int64)
    if tr.ndim != 2 or te.ndim != 2 or tr.shape[1] != te.shape[1]:
        raise ShapeMismatch(f"train {tr.shape} vs test {te.shape}")
    if len(tr) != len(trl) or len(te) != len(tel):
        raise ShapeMismatch("labels must match their embeddings row for row")
    if len(tr) == 0 or len(te) == 0:
        raise EmptySplit("both splits must be non-empty")
    if not 1 <= k <= len(tr):
        raise InvalidParams(f"k must lie in [1, {len(tr)}], got {k}")

    n_classes = int(trl.max()) + 1
    dists = 1.0 - te @ tr.T
    correct = 0
    for i in range(len(te)):
        # lexsort keeps neighbor selection value-based when distances tie
        order = np.lexsort((trl, dists[i]))[:k]
        neighbor_labels = trl[order]
        votes = np.bincount(neighbor_labels, minlength=n_classes)
        top = votes.max()
        candidates = np.flatnonzero(votes == top)
        if len(candidates) > 1:
            sums = np.array(
                [dists[i][order[neighbor_labels == c]].sum() for c in candidates]
            )
            candidates = candidates[sums == sums.min()]
        correct += int(candidates.min() == tel[i])
    return correct / len(te)


def split_dataset(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded stratified split preserving class proportions within one sample.

    Each class contributes round(count * test_fraction) test rows, clamped
    so both splits keep at least one row per class.
    """
    if not 0 < test_fraction < 1:
        raise InvalidParams(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in range(dataset.class_count):
        idx = np.flatnonzero(dataset.labels == cls)
        if len(idx) < 2:
            raise ClassTooSmall(f"class {cls} has {len(idx)} sample(s), needs >= 2")
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(len(idx) * test_fraction))
        n_test = min(max(n_test, 1), len(idx) - 1)
        test_idx.extend(idx[:n_test])
        train_idx.extend(idx[n_test:])
    train_idx = np.sort(np.array(train_idx))
    test_idx = np.sort(np.array(test_idx))
    make = lambda rows: Dataset(
        features=dataset.features[rows],
        labels=dataset.labels[rows],
        class_count=dataset.class_count,
    )
    return make(train_idx), make(test_idx)
