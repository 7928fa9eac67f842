"""Class distributions over dictionary atoms and their entropy terms."""

import numpy as np

from .errors import ValidationError

AGG_MODES = ("abs", "signed", "count")


def atom_class_dist(codes, labels, n_classes: int, agg: str = "abs") -> np.ndarray:
    """Per-atom class distribution from labeled sparse codes.

    For atom i, class c accumulates the coefficient mass of all signals
    labeled c (absolute values by default; ``signed`` sums raw coefficients
    and clips negatives at zero, ``count`` tallies nonzero uses).  Rows are
    normalized to sum 1; atoms with no mass fall back to uniform.
    """
    if agg not in AGG_MODES:
        raise ValidationError(f"unknown aggregation mode {agg!r}; expected one of {AGG_MODES}")
    if n_classes < 1:
        raise ValidationError("n_classes must be >= 1")
    if len(labels) != codes.n_signals:
        raise ValidationError("one label per signal required")
    mass = np.zeros((codes.n_atoms, n_classes))
    for j, (support, coeff) in enumerate(zip(codes.supports, codes.coeffs)):
        label = labels[j]
        if label is None:
            raise ValidationError(f"signal {j} is unlabeled")
        if not 1 <= label <= n_classes:
            raise ValidationError(f"signal {j}: label {label} outside [1, {n_classes}]")
        if agg == "abs":
            w = np.abs(coeff)
        elif agg == "signed":
            w = coeff
        else:
            w = (coeff != 0.0).astype(np.float64)
        np.add.at(mass[:, label - 1], support, w)
    if agg == "signed":
        mass = np.maximum(mass, 0.0)
    totals = mass.sum(axis=1, keepdims=True)
    uniform = np.full(n_classes, 1.0 / n_classes)
    with np.errstate(invalid="ignore", divide="ignore"):
        dist = np.where(totals > 0, mass / np.where(totals > 0, totals, 1.0), uniform)
    return dist


def set_class_dist(dists: np.ndarray, subset) -> np.ndarray:
    """Arithmetic mean of the member distributions; uniform for the empty set."""
    dists = np.asarray(dists, dtype=np.float64)
    subset = np.asarray(subset, dtype=np.int64)
    M = dists.shape[1]
    if subset.size == 0:
        return np.full(M, 1.0 / M)
    return dists[subset].mean(axis=0)


def label_cond_entropy(p_target: np.ndarray, p_cond: np.ndarray) -> float:
    """-sum_c P_t(c) P_cond(c) ln P_t(c), with 0 ln 0 taken as 0."""
    p_target = np.asarray(p_target, dtype=np.float64)
    p_cond = np.asarray(p_cond, dtype=np.float64)
    logs = np.where(p_target > 0, np.log(np.where(p_target > 0, p_target, 1.0)), 0.0)
    return float(-(p_target * p_cond * logs).sum())
