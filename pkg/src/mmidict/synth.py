"""Synthetic data generators for tests, benchmarks, and the ``gen`` subcommand."""

import numpy as np

from .data import FeatureDataset, Sequence
from .errors import ValidationError


def random_unit_columns(rng, dim: int, count: int) -> np.ndarray:
    """(dim, count) matrix of independent uniform-direction unit vectors."""
    m = rng.normal(size=(dim, count))
    return m / np.sqrt((m * m).sum(axis=0))


def mutual_coherence(D: np.ndarray) -> float:
    """Largest |inner product| between distinct unit-norm columns."""
    g = np.abs(D.T @ D)
    np.fill_diagonal(g, 0.0)
    return float(g.max())


def sparse_signals(rng, D: np.ndarray, n_signals: int, sparsity: int, coef_range=(0.5, 1.5)):
    """Noiseless signals, each an exact combination of ``sparsity`` atoms.

    Coefficient magnitudes are uniform in ``coef_range`` with random signs,
    keeping every planted atom recoverable.  Returns (Y, supports, coeffs).
    """
    n, K = D.shape
    lo, hi = coef_range
    Y = np.empty((n, n_signals))
    supports = []
    coeffs = []
    for j in range(n_signals):
        sup = np.sort(rng.choice(K, size=sparsity, replace=False))
        c = rng.uniform(lo, hi, size=sparsity) * rng.choice([-1.0, 1.0], size=sparsity)
        Y[:, j] = D[:, sup] @ c
        supports.append(sup)
        coeffs.append(c)
    return Y, supports, coeffs


def random_pd_kernel(rng, size: int, jitter: float = 1e-6) -> np.ndarray:
    """Well-conditioned random PD matrix, exactly symmetric."""
    A = rng.normal(size=(size, size))
    M = A @ A.T / size + jitter * np.eye(size)
    return np.triu(M) + np.triu(M, 1).T


def block_diag_kernel(rng, n_blocks: int, block_size: int, jitter: float = 1e-4) -> np.ndarray:
    """Block-diagonal PD kernel with exact zeros between blocks."""
    K = n_blocks * block_size
    out = np.zeros((K, K))
    for b in range(n_blocks):
        lo = b * block_size
        out[lo : lo + block_size, lo : lo + block_size] = random_pd_kernel(rng, block_size, jitter)
    return out


def planted_cluster_frames(rng, n_clusters: int, per_cluster: int, dim: int, noise_frac: float = 0.05):
    """Frames around well-separated random unit centers.

    Noise sigma is ``noise_frac`` of the minimum inter-center distance.
    Returns (frames (dim, F), cluster assignment (F,)).
    """
    centers = random_unit_columns(rng, dim, n_clusters)
    diff = centers[:, :, None] - centers[:, None, :]
    dist = np.sqrt((diff**2).sum(axis=0))
    np.fill_diagonal(dist, np.inf)
    gap = float(dist.min())
    sigma = noise_frac * gap
    frames = np.empty((dim, n_clusters * per_cluster))
    assign = np.empty(n_clusters * per_cluster, dtype=np.int64)
    j = 0
    for c in range(n_clusters):
        for _ in range(per_cluster):
            frames[:, j] = centers[:, c] + rng.normal(scale=sigma, size=dim)
            assign[j] = c
            j += 1
    return frames, assign


def labeled_sequence_dataset(
    rng,
    n_classes: int = 3,
    n_actors: int = 9,
    dim: int = 20,
    phases: int = 3,
    frames_per_phase=(4, 8),
    noise: float = 0.03,
) -> FeatureDataset:
    """Action-like sequences: each class walks its own attribute trajectory.

    Every class owns ``phases`` attribute vectors; an actor's rendition walks
    the phases in order at its own speed.  Labels are 1..n_classes and the
    ``group`` field carries the actor, supporting leave-one-actor-out splits.
    """
    attrs = random_unit_columns(rng, dim, n_classes * phases)
    seqs = []
    lo, hi = frames_per_phase
    for c in range(n_classes):
        for a in range(n_actors):
            frames = []
            for p in range(phases):
                length = int(rng.integers(lo, hi + 1))
                base = attrs[:, c * phases + p]
                for _ in range(length):
                    coef = rng.uniform(0.8, 1.2)
                    frames.append(coef * base + rng.normal(scale=noise, size=dim))
            seqs.append(
                Sequence(
                    seq_id=f"c{c + 1}a{a}",
                    frames=np.array(frames),
                    label=c + 1,
                    group=f"actor{a}",
                )
            )
    return FeatureDataset(seqs)


def labeled_signal_mixture(
    rng,
    n_classes: int = 4,
    dim: int = 16,
    per_class: int = 150,
    shared_atoms: int = 4,
    class_atoms: int = 3,
    noise: float = 0.02,
) -> FeatureDataset:
    """Separable labeled mixture with class-specific and shared attributes.

    Each signal combines one shared attribute (common to all classes) with
    two of its class's own attributes, so learned dictionaries contain both
    pure and class-mixed atoms.  Signals are 1-frame sequences.
    """
    shared = random_unit_columns(rng, dim, shared_atoms)
    per = [random_unit_columns(rng, dim, class_atoms) for _ in range(n_classes)]
    seqs = []
    sid = 0
    for c in range(n_classes):
        for _ in range(per_class):
            x = rng.uniform(0.6, 1.0) * shared[:, rng.integers(shared_atoms)]
            picks = rng.choice(class_atoms, size=min(2, class_atoms), replace=False)
            for p in picks:
                x = x + rng.uniform(0.6, 1.4) * per[c][:, p]
            x = x + rng.normal(scale=noise, size=dim)
            seqs.append(Sequence(seq_id=f"s{sid}", frames=x[None, :], label=c + 1))
            sid += 1
    return FeatureDataset(seqs)


def cluster_frames_dataset(rng, n_clusters: int, per_cluster: int, dim: int, noise_frac: float = 0.05) -> FeatureDataset:
    """Planted-cluster frames wrapped as one unlabeled sequence (for summarize)."""
    frames, _ = planted_cluster_frames(rng, n_clusters, per_cluster, dim, noise_frac)
    return FeatureDataset([Sequence(seq_id="clusters", frames=frames.T)])


def generate(kind: str, seed, **kw) -> FeatureDataset:
    """Entry point used by the ``gen`` subcommand."""
    rng = np.random.default_rng(seed)
    if kind == "sequences":
        return labeled_sequence_dataset(rng, **kw)
    if kind == "mixture":
        return labeled_signal_mixture(rng, **kw)
    if kind == "clusters":
        return cluster_frames_dataset(rng, **kw)
    raise ValidationError(f"unknown generator kind {kind!r}")
