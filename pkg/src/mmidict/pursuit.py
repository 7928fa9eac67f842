"""Sparse coding over a fixed dictionary (OMP) and K-SVD dictionary learning."""

import csv
from dataclasses import dataclass

import numpy as np

from . import accel
from .data import _fmt, l2_normalize_columns
from .errors import ValidationError

ATOM_NORM_TOL = 1e-9
RESIDUAL_TOL = 1e-10


@dataclass
class Dictionary:
    """Matrix of unit-norm atoms with optional per-atom class metadata.

    ``atoms`` is (n, K) with unit-L2 columns; ``class_dist`` is (K, M) rows
    summing to 1; ``atom_prior`` is (K,) summing to 1.
    """

    atoms: np.ndarray
    class_dist: np.ndarray | None = None
    atom_prior: np.ndarray | None = None

    def __post_init__(self):
        self.atoms = np.ascontiguousarray(self.atoms, dtype=np.float64)
        if self.atoms.ndim != 2 or self.atoms.shape[1] < 1:
            raise ValidationError("dictionary must be a non-empty 2-D array of column atoms")
        norms = np.sqrt((self.atoms**2).sum(axis=0))
        if np.any(np.abs(norms - 1.0) > ATOM_NORM_TOL):
            raise ValidationError("dictionary atoms must have unit L2 norm")
        if self.class_dist is not None:
            self.class_dist = np.asarray(self.class_dist, dtype=np.float64)
            if self.class_dist.shape[0] != self.n_atoms or self.class_dist.ndim != 2:
                raise ValidationError("class_dist must have one row per atom")
            if np.any(self.class_dist < 0) or np.any(np.abs(self.class_dist.sum(axis=1) - 1.0) > 1e-9):
                raise ValidationError("class_dist rows must be distributions")
        if self.atom_prior is not None:
            self.atom_prior = np.asarray(self.atom_prior, dtype=np.float64)
            if self.atom_prior.shape != (self.n_atoms,):
                raise ValidationError("atom_prior must have one entry per atom")
            if np.any(self.atom_prior < 0) or abs(self.atom_prior.sum() - 1.0) > 1e-9:
                raise ValidationError("atom_prior must be a distribution")

    @property
    def dim(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]


@dataclass
class SparseCodeTable:
    """Per-signal sparse decompositions: at most ``sparsity`` atoms each."""

    n_atoms: int
    n_signals: int
    sparsity: int
    supports: list[np.ndarray]  # int64 atom indices, unique within a signal
    coeffs: list[np.ndarray]

    def __post_init__(self):
        if len(self.supports) != self.n_signals or len(self.coeffs) != self.n_signals:
            raise ValidationError("support/coefficient lists must match n_signals")
        for j, (s, c) in enumerate(zip(self.supports, self.coeffs)):
            if len(s) != len(c):
                raise ValidationError(f"signal {j}: support and coefficients differ in length")
            if len(s) > self.sparsity:
                raise ValidationError(f"signal {j}: support exceeds sparsity bound")
            if len(s) and (s.min() < 0 or s.max() >= self.n_atoms):
                raise ValidationError(f"signal {j}: atom index out of range")
            if len(np.unique(s)) != len(s):
                raise ValidationError(f"signal {j}: duplicate atom in support")

    def to_dense(self) -> np.ndarray:
        """Full (K, N) coefficient matrix; row i is atom i's observation vector."""
        X = np.zeros((self.n_atoms, self.n_signals))
        for j, (s, c) in enumerate(zip(self.supports, self.coeffs)):
            X[s, j] = c
        return X

    def atom_abs_mass(self) -> np.ndarray:
        """Total absolute coefficient mass per atom over all signals."""
        mass = np.zeros(self.n_atoms)
        for s, c in zip(self.supports, self.coeffs):
            np.add.at(mass, s, np.abs(c))
        return mass


def _codes_from_padded(idx, val, cnt, K, N, T) -> SparseCodeTable:
    supports = [np.ascontiguousarray(idx[j, : cnt[j]]) for j in range(N)]
    coeffs = [np.ascontiguousarray(val[j, : cnt[j]]) for j in range(N)]
    return SparseCodeTable(n_atoms=K, n_signals=N, sparsity=T, supports=supports, coeffs=coeffs)


def omp_encode(dictionary: Dictionary, Y: np.ndarray, sparsity: int) -> SparseCodeTable:
    """Orthogonal matching pursuit of every column of Y, at most ``sparsity`` atoms.

    Per signal: greedily select the atom with maximal absolute correlation to
    the residual (lowest index on ties), re-solve least squares on the chosen
    support, and stop after ``sparsity`` atoms or once the residual norm falls
    below 1e-10.  The support coefficients equal the least-squares solution,
    so the final residual is orthogonal to the selected atoms.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ValidationError("signal matrix must be 2-D")
    if Y.shape[0] != dictionary.dim:
        raise ValidationError(
            f"dimension mismatch: dictionary dim {dictionary.dim}, signals dim {Y.shape[0]}"
        )
    K = dictionary.n_atoms
    if not 1 <= sparsity <= min(K, dictionary.dim):
        raise ValidationError(f"sparsity must be in [1, min(K={K}, n={dictionary.dim})]")
    idx, val, cnt = accel.omp_batch(dictionary.atoms, Y, sparsity, RESIDUAL_TOL)
    return _codes_from_padded(idx, val, cnt, K, Y.shape[1], sparsity)


def reconstruction_rmse(dictionary: Dictionary, codes: SparseCodeTable, Y: np.ndarray) -> float:
    """Frobenius reconstruction error ||Y - D X||_F / sqrt(n N)."""
    Y = np.asarray(Y, dtype=np.float64)
    n, N = Y.shape
    if n != dictionary.dim or N != codes.n_signals or codes.n_atoms != dictionary.n_atoms:
        raise ValidationError("dictionary, codes and signals have inconsistent shapes")
    R = Y - dictionary.atoms @ codes.to_dense()
    return float(np.linalg.norm(R) / np.sqrt(n * N))


def _ksvd_update(D, X, Y):
    """One sweep of per-atom rank-1 updates; D, X modified in place."""
    K = D.shape[1]
    for k in range(K):
        using = np.flatnonzero(X[k, :] != 0.0)
        if using.size == 0:
            continue
        # residual of the using signals with atom k removed
        E = Y[:, using] - D @ X[:, using] + np.outer(D[:, k], X[k, using])
        U, s, Vt = np.linalg.svd(E, full_matrices=False)
        atom = U[:, 0]
        row = s[0] * Vt[0, :]
        # sign convention: largest-magnitude atom entry positive (reproducibility)
        pivot = np.argmax(np.abs(atom))
        if atom[pivot] < 0:
            atom = -atom
            row = -row
        D[:, k] = atom
        X[k, using] = row


def _replace_unused(D, X, Y, used_mask):
    """Point dead atoms at the currently worst-reconstructed signals."""
    dead = np.flatnonzero(~used_mask)
    if dead.size == 0:
        return
    err = ((Y - D @ X) ** 2).sum(axis=0)
    order = np.argsort(-err, kind="stable")
    for rank, k in enumerate(dead):
        col = Y[:, order[rank % len(order)]]
        norm = np.linalg.norm(col)
        if norm > 0:
            D[:, k] = col / norm


def ksvd_train(
    Y: np.ndarray,
    n_atoms: int,
    sparsity: int,
    iters: int = 20,
    seed=0,
    rmse_tol: float = 1e-6,
):
    """Learn an over-complete dictionary by alternating OMP and K-SVD atom updates.

    Initial atoms are ``n_atoms`` distinct signal columns drawn uniformly at
    random (seeded) and normalized.  Each iteration encodes all signals, then
    updates every atom with the dominant singular pair of its restricted
    residual; unused atoms are replaced by the worst-reconstructed signal.
    Returns (Dictionary, SparseCodeTable, error_history) where error_history
    holds the post-update RMSE of each iteration performed (early stop once
    the improvement drops below ``rmse_tol``).
    """
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ValidationError("signal matrix must be 2-D")
    n, N = Y.shape
    if n_atoms > N:
        raise ValidationError("over-complete beyond sample count")
    if iters < 1:
        raise ValidationError("iters must be >= 1")
    if not 1 <= sparsity <= min(n_atoms, n):
        raise ValidationError(f"sparsity must be in [1, min(K={n_atoms}, n={n})]")

    rng = np.random.default_rng(seed)
    picks = rng.choice(N, size=n_atoms, replace=False)
    D, zero = l2_normalize_columns(Y[:, picks])
    if np.any(zero):
        # zero signals make useless atoms; fall back to random unit vectors
        repl = rng.normal(size=(n, int(zero.sum())))
        D[:, zero] = repl / np.linalg.norm(repl, axis=0)
    D = np.ascontiguousarray(D)

    history: list[float] = []
    prev_X = None
    for _ in range(iters):
        idx, val, cnt = accel.omp_batch(D, Y, sparsity, RESIDUAL_TOL)
        X = np.zeros((n_atoms, N))
        for j in range(N):
            X[idx[j, : cnt[j]], j] = val[j, : cnt[j]]
        if prev_X is not None:
            # greedy re-coding can be worse than last iteration's SVD-polished
            # codes (still valid for the current D); keep the better per signal
            # so the error history is non-increasing
            new_err = ((Y - D @ X) ** 2).sum(axis=0)
            old_err = ((Y - D @ prev_X) ** 2).sum(axis=0)
            worse = new_err > old_err
            X[:, worse] = prev_X[:, worse]
        _ksvd_update(D, X, Y)
        _replace_unused(D, X, Y, used_mask=(X != 0.0).any(axis=1))
        rmse = float(np.linalg.norm(Y - D @ X) / np.sqrt(n * N))
        history.append(rmse)
        prev_X = X
        if len(history) > 1 and history[-2] - history[-1] < rmse_tol:
            break

    # renormalize defensively (SVD keeps atoms unit-norm up to rounding)
    D, _ = l2_normalize_columns(D)
    dictionary = Dictionary(atoms=np.ascontiguousarray(D))
    # final encode so the returned codes match the returned dictionary
    table = omp_encode(dictionary, Y, sparsity)
    return dictionary, table, history


# ---------------------------------------------------------------------------
# Dictionary and sparse-code CSV formats
# ---------------------------------------------------------------------------


def write_dictionary_csv(path, dictionary: Dictionary) -> None:
    """Header ``atom,f0,...,f{n-1}``; the class sidecar goes to <name>.classdist.csv."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["atom"] + [f"f{i}" for i in range(dictionary.dim)])
        for k in range(dictionary.n_atoms):
            w.writerow([str(k)] + [_fmt(v) for v in dictionary.atoms[:, k]])
    if dictionary.class_dist is not None:
        write_classdist_csv(classdist_path(path), dictionary.class_dist)


def classdist_path(dict_path) -> str:
    p = str(dict_path)
    base = p[: -len(".csv")] if p.endswith(".csv") else p
    return base + ".classdist.csv"


def write_classdist_csv(path, class_dist: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["atom"] + [f"p{c}" for c in range(1, class_dist.shape[1] + 1)])
        for k in range(class_dist.shape[0]):
            w.writerow([str(k)] + [_fmt(v) for v in class_dist[k]])


def read_classdist_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "atom":
            raise ValidationError("line 1: expected header atom,p1,...,pM")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if int(row[0]) != len(rows):
                    raise ValidationError(f"line {lineno}: atoms must appear in order")
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise ValidationError(f"line {lineno}: malformed class distribution row") from None
    return np.asarray(rows, dtype=np.float64)


def read_dictionary_csv(path, with_sidecar: bool = True) -> Dictionary:
    import os

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "atom":
            raise ValidationError("line 1: expected header atom,f0,...,f{n-1}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if int(row[0]) != len(rows):
                    raise ValidationError(f"line {lineno}: atoms must appear in order")
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise ValidationError(f"line {lineno}: malformed atom row") from None
    if not rows:
        raise ValidationError("dictionary file has no atoms")
    atoms = np.asarray(rows, dtype=np.float64).T
    class_dist = None
    sidecar = classdist_path(path)
    if with_sidecar and os.path.exists(sidecar):
        class_dist = read_classdist_csv(sidecar)
    return Dictionary(atoms=atoms, class_dist=class_dist)


def write_codes_csv(path, codes: SparseCodeTable, frame_index) -> None:
    """Triplet rows ``seq,frame,atom,value`` in signal order."""
    if len(frame_index) != codes.n_signals:
        raise ValidationError("frame index length must match signal count")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["seq", "frame", "atom", "value"])
        for j, (sid, fid) in enumerate(frame_index):
            for a, v in zip(codes.supports[j], codes.coeffs[j]):
                w.writerow([sid, str(int(fid)), str(int(a)), _fmt(v)])


def read_codes_csv(path, frame_index, n_atoms: int, sparsity: int | None = None) -> SparseCodeTable:
    """Rebuild a code table using the signal ordering of ``frame_index``.

    ``sparsity`` defaults to the largest support size found in the file.
    """
    pos = {key: j for j, key in enumerate(frame_index)}
    supports = [[] for _ in frame_index]
    coeffs = [[] for _ in frame_index]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["seq", "frame", "atom", "value"]:
            raise ValidationError("line 1: expected header seq,frame,atom,value")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValidationError(f"line {lineno}: expected 4 fields")
            try:
                key = (row[0], int(row[1]))
                atom = int(row[2])
                value = float(row[3])
            except ValueError:
                raise ValidationError(f"line {lineno}: malformed code row") from None
            if key not in pos:
                raise ValidationError(f"line {lineno}: unknown signal {key!r}")
            supports[pos[key]].append(atom)
            coeffs[pos[key]].append(value)
    if sparsity is None:
        sparsity = max(1, max((len(s) for s in supports), default=1))
    return SparseCodeTable(
        n_atoms=n_atoms,
        n_signals=len(frame_index),
        sparsity=sparsity,
        supports=[np.asarray(s, dtype=np.int64) for s in supports],
        coeffs=[np.asarray(c, dtype=np.float64) for c in coeffs],
    )
