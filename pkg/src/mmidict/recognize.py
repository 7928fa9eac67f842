"""Sequence encoding, DTW / histogram k-NN classification, and the purity
and compactness dictionary diagnostics."""

import csv
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import accel
from .data import FeatureDataset, _fmt
from .errors import ValidationError
from .pursuit import Dictionary, omp_encode

N_BINS = 10


@dataclass
class CodeSequence:
    """Per-frame dense sparse-code vectors for one sequence."""

    seq_id: str
    codes: np.ndarray  # (F, k)
    label: int | None = None
    group: str | None = None

    def __post_init__(self):
        self.codes = np.ascontiguousarray(self.codes, dtype=np.float64)
        if self.codes.ndim != 2 or self.codes.shape[0] < 1:
            raise ValidationError(f"sequence {self.seq_id!r}: empty code sequence")

    @property
    def n_frames(self) -> int:
        return self.codes.shape[0]


def encode_sequences(dictionary: Dictionary, dataset: FeatureDataset, sparsity: int) -> list[CodeSequence]:
    """OMP-encode every frame of every sequence against the dictionary."""
    if dataset.dim != dictionary.dim:
        raise ValidationError(
            f"dimension mismatch: dictionary dim {dictionary.dim}, dataset dim {dataset.dim}"
        )
    out = []
    for s in dataset.sequences:
        table = omp_encode(dictionary, s.frames.T, sparsity)
        dense = table.to_dense().T  # (F, k)
        out.append(CodeSequence(seq_id=s.seq_id, codes=dense, label=s.label, group=s.group))
    return out


def dtw_alignment(a: CodeSequence, b: CodeSequence):
    """Optimal-path total cost and path length of the DTW alignment."""
    cost, length = accel.dtw_cost_length(a.codes, b.codes)
    return float(cost), int(length)


def dtw_distance(a: CodeSequence, b: CodeSequence) -> float:
    """DTW distance: optimal-path cost divided by the path length."""
    cost, length = dtw_alignment(a, b)
    return cost / length


def histogram_descriptor(c: CodeSequence) -> np.ndarray:
    """Mean absolute code vector over the frames (order-invariant)."""
    return np.abs(c.codes).mean(axis=0)


def knn_classify(train, query, k_nn: int = 1, metric: str = "dtw") -> int:
    """Majority vote among the k nearest training items.

    ``train`` is a list of (CodeSequence-or-descriptor, label) pairs and
    ``query`` matches the item type.  Distance ties keep the lower training
    index; vote ties pick the smallest label.
    """
    if not train:
        raise ValidationError("training set is empty")
    if k_nn < 1:
        raise ValidationError("k_nn must be >= 1")
    if metric == "dtw":
        dists = [dtw_distance(item, query) for item, _ in train]
    elif metric == "euclidean":
        dists = [float(np.linalg.norm(np.asarray(item) - np.asarray(query))) for item, _ in train]
    else:
        raise ValidationError(f"unknown metric {metric!r}; expected 'dtw' or 'euclidean'")
    order = sorted(range(len(train)), key=lambda i: (dists[i], i))
    votes = Counter(train[i][1] for i in order[: min(k_nn, len(train))])
    top = max(votes.values())
    return min(lbl for lbl, cnt in votes.items() if cnt == top)


def _unit_histogram(values: np.ndarray):
    freq, edges = np.histogram(values, bins=N_BINS, range=(0.0, 1.0))
    total = freq.sum()
    freq = freq / total if total > 0 else freq.astype(np.float64)
    return freq, edges


def purity_histogram(dists: np.ndarray):
    """Normalized 10-bin histogram of max_c P(c | atom) over the atoms."""
    dists = np.asarray(dists, dtype=np.float64)
    if dists.size == 0:
        raise ValidationError("no class distributions")
    return _unit_histogram(dists.max(axis=1))


def compactness_histogram(dictionary: Dictionary):
    """Normalized 10-bin histogram of |d_i . d_j| over all atom pairs i < j."""
    gram = dictionary.atoms.T @ dictionary.atoms
    iu = np.triu_indices(dictionary.n_atoms, k=1)
    sims = np.clip(np.abs(gram[iu]), 0.0, 1.0)
    if sims.size == 0:
        raise ValidationError("need at least two atoms for compactness")
    return _unit_histogram(sims)


def leave_one_group_out(sequences: list[CodeSequence]):
    """Yield (train, test) splits holding out one group at a time."""
    groups = []
    for s in sequences:
        if s.group is None:
            raise ValidationError(f"sequence {s.seq_id!r} has no group for the split")
        if s.group not in groups:
            groups.append(s.group)
    for g in groups:
        train = [s for s in sequences if s.group != g]
        test = [s for s in sequences if s.group == g]
        yield g, train, test


def classify_sequences(train, test, scheme: str = "dtw", k_nn: int = 1, use_abs: bool = False):
    """Predict labels for the test sequences from labeled training sequences.

    Returns (predictions, distances): per test item the predicted label and
    its nearest-neighbor distance.  ``scheme`` is ``dtw`` (alignment in the
    code domain) or ``hist`` (Euclidean over histogram descriptors).
    """
    if scheme not in ("dtw", "hist"):
        raise ValidationError(f"unknown scheme {scheme!r}; expected 'dtw' or 'hist'")
    for s in train:
        if s.label is None:
            raise ValidationError(f"training sequence {s.seq_id!r} is unlabeled")

    def _prep(s: CodeSequence) -> CodeSequence:
        return CodeSequence(s.seq_id, np.abs(s.codes), s.label, s.group) if use_abs else s

    preds: list[int] = []
    nearest: list[float] = []
    if scheme == "dtw":
        items = [(_prep(s), s.label) for s in train]
        for q in test:
            qq = _prep(q)
            preds.append(knn_classify(items, qq, k_nn=k_nn, metric="dtw"))
            nearest.append(min(dtw_distance(item, qq) for item, _ in items))
    else:
        items = [(histogram_descriptor(s), s.label) for s in train]
        for q in test:
            d = histogram_descriptor(q)
            preds.append(knn_classify(items, d, k_nn=k_nn, metric="euclidean"))
            nearest.append(min(float(np.linalg.norm(it - d)) for it, _ in items))
    return preds, nearest


def write_predictions_csv(path, rows) -> None:
    """Rows of (seq, true_label, predicted_label, distance)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["seq", "true_label", "predicted_label", "distance"])
        for seq, true_label, pred, dist in rows:
            w.writerow([seq, "" if true_label is None else str(true_label), str(pred), _fmt(dist)])


def write_histogram_csv(path, freq, edges) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_low", "bin_high", "frequency"])
        for i in range(len(freq)):
            w.writerow([_fmt(edges[i]), _fmt(edges[i + 1]), _fmt(freq[i])])
