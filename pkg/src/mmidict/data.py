"""Labeled feature-sequence dataset, column normalization, and the feature CSV format.

The feature table is the ingestion contract for every CLI subcommand:
a UTF-8 CSV with header ``seq,frame,label,f0,...,f{n-1}`` where ``frame``
is a non-negative integer strictly increasing within each ``seq``,
``label`` is an integer >= 1 or empty, and features are decimal or
scientific-notation floats.  An optional ``group`` column (used for
leave-one-group-out splits) is accepted anywhere in the header.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass
class Sequence:
    """One ordered feature sequence with an optional class label."""

    seq_id: str
    frames: np.ndarray  # (F, n) float64, frame order preserved as ingested
    label: int | None = None
    group: str | None = None
    frame_ids: np.ndarray | None = None  # (F,) int64, defaults to 0..F-1

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ValidationError(f"sequence {self.seq_id!r}: frames must be a non-empty 2-D array")
        if not np.all(np.isfinite(self.frames)):
            raise ValidationError(f"sequence {self.seq_id!r}: non-finite feature value")
        if self.frame_ids is None:
            self.frame_ids = np.arange(self.frames.shape[0], dtype=np.int64)
        else:
            self.frame_ids = np.asarray(self.frame_ids, dtype=np.int64)
            if self.frame_ids.shape != (self.frames.shape[0],):
                raise ValidationError(f"sequence {self.seq_id!r}: frame_ids length mismatch")
            if np.any(np.diff(self.frame_ids) <= 0):
                raise ValidationError(f"sequence {self.seq_id!r}: frame ids not strictly increasing")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


@dataclass
class FeatureDataset:
    """Ordered collection of sequences sharing one feature dimension.

    ``n_classes`` is the largest label M; every class in [1, M] must occur.
    An entirely unlabeled dataset has ``n_classes == 0``.
    """

    sequences: list[Sequence]
    dim: int = field(init=False)
    n_classes: int = field(init=False)

    def __post_init__(self):
        if not self.sequences:
            raise ValidationError("no signals")
        dims = {s.frames.shape[1] for s in self.sequences}
        if len(dims) != 1:
            raise ValidationError(f"inconsistent feature dimensions: {sorted(dims)}")
        self.dim = dims.pop()
        if self.dim < 1:
            raise ValidationError("feature dimension must be >= 1")
        ids = [s.seq_id for s in self.sequences]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate sequence ids")
        labels = [s.label for s in self.sequences if s.label is not None]
        if labels:
            if min(labels) < 1:
                raise ValidationError("labels must be integers >= 1")
            self.n_classes = max(labels)
            missing = set(range(1, self.n_classes + 1)) - set(labels)
            if missing:
                raise ValidationError(f"classes missing from labeled data: {sorted(missing)}")
        else:
            self.n_classes = 0

    @property
    def n_signals(self) -> int:
        return sum(s.n_frames for s in self.sequences)

    def labeled(self) -> bool:
        return all(s.label is not None for s in self.sequences)


def flatten(dataset: FeatureDataset):
    """Stack all frames into a signal matrix.

    Returns (Y, labels, frame_index): Y is (n, N) with column j holding the
    j-th frame in sequence-major, frame-ascending order; labels[j] is that
    frame's sequence label (None when unlabeled); frame_index[j] is the
    (sequence id, frame id) pair allowing exact inverse mapping.
    """
    cols = []
    labels: list[int | None] = []
    frame_index: list[tuple[str, int]] = []
    for s in dataset.sequences:
        cols.append(s.frames.T)
        labels.extend([s.label] * s.n_frames)
        frame_index.extend((s.seq_id, int(f)) for f in s.frame_ids)
    Y = np.ascontiguousarray(np.hstack(cols))
    return Y, labels, frame_index


def unflatten(Y, labels, frame_index, groups=None) -> FeatureDataset:
    """Inverse of :func:`flatten` (column order must be unchanged)."""
    seqs: list[Sequence] = []
    order: dict[str, int] = {}
    by_seq: dict[str, list[int]] = {}
    for j, (sid, _) in enumerate(frame_index):
        if sid not in order:
            order[sid] = len(order)
            by_seq[sid] = []
        by_seq[sid].append(j)
    for sid in order:
        js = by_seq[sid]
        seqs.append(
            Sequence(
                seq_id=sid,
                frames=Y[:, js].T.copy(),
                label=labels[js[0]],
                group=None if groups is None else groups[js[0]],
                frame_ids=np.array([frame_index[j][1] for j in js], dtype=np.int64),
            )
        )
    return FeatureDataset(seqs)


def l2_normalize_columns(m: np.ndarray):
    """Scale every nonzero column to unit Euclidean norm.

    Zero columns are left unchanged; returns (normalized, zero_flags).
    """
    m = np.asarray(m, dtype=np.float64)
    norms = np.sqrt((m * m).sum(axis=0))
    zero = norms == 0.0
    safe = np.where(zero, 1.0, norms)
    return m / safe, zero


# ---------------------------------------------------------------------------
# Feature CSV
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    # repr round-trips float64 exactly and is stable across runs
    return repr(float(x))


def _parse_header(header: list[str]):
    cols = {name: i for i, name in enumerate(header)}
    if len(cols) != len(header):
        raise ValidationError("line 1: duplicate column names in header")
    for req in ("seq", "frame"):
        if req not in cols:
            raise ValidationError(f"line 1: missing required column {req!r}")
    feat_idx = []
    k = 0
    while f"f{k}" in cols:
        feat_idx.append(cols[f"f{k}"])
        k += 1
    if not feat_idx:
        raise ValidationError("line 1: no feature columns f0..f{n-1} found")
    known = {"seq", "frame", "label", "group"} | {f"f{i}" for i in range(k)}
    unknown = [c for c in header if c not in known]
    if unknown:
        raise ValidationError(f"line 1: unknown columns {unknown}")
    return cols["seq"], cols["frame"], cols.get("label"), cols.get("group"), feat_idx


def read_feature_csv(path) -> FeatureDataset:
    """Parse a feature table; raises ValidationError with the offending line number."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("line 1: empty file") from None
        i_seq, i_frame, i_label, i_group, feat_idx = _parse_header(header)
        width = len(header)

        order: list[str] = []
        frames: dict[str, list[np.ndarray]] = {}
        frame_ids: dict[str, list[int]] = {}
        labels: dict[str, int | None] = {}
        groups: dict[str, str | None] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ValidationError(f"line {lineno}: expected {width} fields, got {len(row)}")
            sid = row[i_seq]
            try:
                fid = int(row[i_frame])
            except ValueError:
                raise ValidationError(f"line {lineno}: frame {row[i_frame]!r} is not an integer") from None
            if fid < 0:
                raise ValidationError(f"line {lineno}: frame must be non-negative")
            label: int | None = None
            if i_label is not None and row[i_label] != "":
                try:
                    label = int(row[i_label])
                except ValueError:
                    raise ValidationError(f"line {lineno}: label {row[i_label]!r} is not an integer") from None
                if label < 1:
                    raise ValidationError(f"line {lineno}: label must be >= 1")
            group = row[i_group] if i_group is not None and row[i_group] != "" else None
            try:
                feats = np.array([float(row[i]) for i in feat_idx], dtype=np.float64)
            except ValueError:
                raise ValidationError(f"line {lineno}: malformed feature value") from None

            if sid not in frames:
                order.append(sid)
                frames[sid] = []
                frame_ids[sid] = []
                labels[sid] = label
                groups[sid] = group
            else:
                if frame_ids[sid][-1] >= fid:
                    raise ValidationError(f"line {lineno}: frame not strictly increasing for seq {sid!r}")
                if labels[sid] != label:
                    raise ValidationError(f"line {lineno}: inconsistent label within seq {sid!r}")
                if groups[sid] != group:
                    raise ValidationError(f"line {lineno}: inconsistent group within seq {sid!r}")
            frames[sid].append(feats)
            frame_ids[sid].append(fid)

    if not order:
        raise ValidationError("no signals")
    seqs = [
        Sequence(
            seq_id=sid,
            frames=np.vstack(frames[sid]),
            label=labels[sid],
            group=groups[sid],
            frame_ids=np.array(frame_ids[sid], dtype=np.int64),
        )
        for sid in order
    ]
    return FeatureDataset(seqs)


def write_feature_csv(path, dataset: FeatureDataset) -> None:
    has_group = any(s.group is not None for s in dataset.sequences)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        head = ["seq", "frame", "label"]
        if has_group:
            head.append("group")
        head += [f"f{i}" for i in range(dataset.dim)]
        w.writerow(head)
        for s in dataset.sequences:
            for f, fid in enumerate(s.frame_ids):
                row = [s.seq_id, str(int(fid)), "" if s.label is None else str(s.label)]
                if has_group:
                    row.append("" if s.group is None else s.group)
                row += [_fmt(v) for v in s.frames[f]]
                w.writerow(row)
