"""Near-optimal frame summarization: the sequence is treated as a dictionary,
frames as atoms under a linear kernel, and MMI-1 picks the summary."""

import csv
from dataclasses import dataclass

import numpy as np

from .data import _fmt, l2_normalize_columns
from .errors import ValidationError
from .gp import kernel_linear
from .select import select_mmi1


@dataclass
class Summary:
    """Selected frame indices (ascending) with the per-step objective terms.

    ``ranks[i]`` is the greedy selection step of ``frames_chosen[i]``;
    the diversity/coverage terms are aligned the same way.
    """

    sequence_id: str
    frames_chosen: list[int]
    ranks: list[int]
    diversity_terms: list[float]
    coverage_terms: list[float]

    def __post_init__(self):
        if len(set(self.frames_chosen)) != len(self.frames_chosen):
            raise ValidationError("summary frames must be distinct")
        if sorted(self.frames_chosen) != list(self.frames_chosen):
            raise ValidationError("summary frames must be sorted ascending")


def summarize_sequence(frames: np.ndarray, k: int, sequence_id: str = "") -> Summary:
    """Pick k frames maximizing diversity and coverage simultaneously.

    Frames (columns of the (n, F) matrix) are L2-normalized, their Gram
    matrix becomes the kernel, and greedy MMI-1 selects the summary; chosen
    indices are reported sorted by frame position.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ValidationError("frames must be a 2-D column matrix")
    F = frames.shape[1]
    if not 1 <= k <= F - 1:
        raise ValidationError(f"k must be in [1, {F - 1}] for {F} frames")
    normed, _ = l2_normalize_columns(frames)
    kern = kernel_linear(normed)
    trace = select_mmi1(kern, k, sparse=True)
    order = np.argsort(trace.chosen, kind="stable")
    return Summary(
        sequence_id=sequence_id,
        frames_chosen=[trace.chosen[i] for i in order],
        ranks=[int(i) for i in order],
        diversity_terms=[trace.diversity_terms[i] for i in order],
        coverage_terms=[trace.coverage_terms[i] for i in order],
    )


def coverage_diversity_report(summary: Summary, frames: np.ndarray):
    """Human-inspection scores: mean pairwise distance among the selected
    frames, and mean distance of every frame to its nearest selected frame
    (lower coverage is better).  Not used by the selection itself."""
    frames = np.asarray(frames, dtype=np.float64)
    sel = np.asarray(summary.frames_chosen, dtype=np.int64)
    if sel.size == 0 or sel.min() < 0 or sel.max() >= frames.shape[1]:
        raise ValidationError("summary indices out of range")
    S = frames[:, sel]
    if sel.size > 1:
        diff = S[:, :, None] - S[:, None, :]
        dmat = np.sqrt((diff**2).sum(axis=0))
        iu = np.triu_indices(sel.size, k=1)
        diversity = float(dmat[iu].mean())
    else:
        diversity = 0.0
    diff_all = frames[:, :, None] - S[:, None, :]
    nearest = np.sqrt((diff_all**2).sum(axis=0)).min(axis=1)
    coverage = float(nearest.mean())
    return diversity, coverage


def write_summary_csv(path, summaries: list[Summary]) -> None:
    """Rows ``seq,rank,frame,diversity_term,coverage_term`` sorted by frame."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["seq", "rank", "frame", "diversity_term", "coverage_term"])
        for s in summaries:
            for rank, frame, div, cov in zip(
                s.ranks, s.frames_chosen, s.diversity_terms, s.coverage_terms
            ):
                w.writerow([s.sequence_id, str(rank), str(frame), _fmt(div), _fmt(cov)])
