"""Gaussian-process view of dictionary atoms.

Each atom's sparse-coefficient row is treated as its observation vector; the
covariance of two rows gives the kernel entry for the atom pair.  Conditional
variances are Schur complements computed through Cholesky factorizations, and
near-zero kernel entries are indexed away so conditioning sets can be
restricted to each atom's compact support.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .data import _fmt
from .errors import NumericalError, ValidationError

DEFAULT_JITTER = 1e-8
DEFAULT_TAU = 1e-6
VARIANCE_FLOOR = 1e-12
LOG_2PIE = float(np.log(2.0 * np.pi * np.e))


@dataclass
class KernelMatrix:
    """Symmetric PSD covariance over atoms with a compact-support index.

    ``values`` already includes the diagonal jitter.  ``neighbors[i]`` lists
    the columns j with |K(i,j)| >= tau; the diagonal is always kept.
    """

    values: np.ndarray
    tau: float = 0.0
    jitter: float = 0.0
    neighbors: list[np.ndarray] = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        K = self.size
        if self.values.ndim != 2 or self.values.shape != (K, K):
            raise ValidationError("kernel must be a square matrix")
        if not np.array_equal(self.values, self.values.T):
            raise ValidationError("kernel must be exactly symmetric")
        if np.any(np.diag(self.values) < 0):
            raise ValidationError("kernel diagonal entries must be non-negative")
        if self.tau < 0 or self.jitter < 0:
            raise ValidationError("tau and jitter must be non-negative")
        keep = np.abs(self.values) >= self.tau
        np.fill_diagonal(keep, True)
        self.neighbors = [np.flatnonzero(keep[i]) for i in range(K)]

    @property
    def size(self) -> int:
        return self.values.shape[0]


def _symmetrize(a: np.ndarray) -> np.ndarray:
    """Mirror the upper triangle so K(i,j) == K(j,i) holds exactly."""
    upper = np.triu(a)
    return upper + np.triu(a, 1).T


def kernel_from_codes(codes, tau: float = DEFAULT_TAU, jitter: float = DEFAULT_JITTER) -> KernelMatrix:
    """Population covariance (mean-removed, 1/N) between atom coefficient rows."""
    N = codes.n_signals
    if N < 2:
        raise ValidationError("covariance undefined")
    X = codes.to_dense()
    Xc = X - X.mean(axis=1, keepdims=True)
    cov = (Xc @ Xc.T) / N
    cov = _symmetrize(cov)
    diag = np.diag(cov).copy()
    np.fill_diagonal(cov, np.maximum(diag, 0.0) + jitter)
    return KernelMatrix(values=cov, tau=tau, jitter=jitter)


def kernel_linear(frames: np.ndarray, tau: float = 0.0, jitter: float = DEFAULT_JITTER) -> KernelMatrix:
    """Gram matrix of the frame columns (the summarization kernel)."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] < 1:
        raise ValidationError("frames must be a non-empty 2-D column matrix")
    gram = _symmetrize(frames.T @ frames)
    np.fill_diagonal(gram, np.maximum(np.diag(gram), 0.0) + jitter)
    return KernelMatrix(values=gram, tau=tau, jitter=jitter)


def sparse_support_neighbors(kern: KernelMatrix, target: int) -> np.ndarray:
    """Atoms j with |K(target, j)| >= tau (the target itself included)."""
    return kern.neighbors[target]


def _cholesky(block: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(block)
    except np.linalg.LinAlgError:
        raise NumericalError("conditioning block not PD") from None


def conditional_variance(kern: KernelMatrix, target: int, cond) -> float:
    """Schur complement K(t,t) - K(t,C) K(C,C)^-1 K(C,t), floored at 1e-12."""
    cond = np.asarray(cond, dtype=np.int64)
    values = kern.values
    if cond.size == 0:
        return max(float(values[target, target]), VARIANCE_FLOOR)
    if np.any(cond == target):
        raise ValidationError("target must not be in the conditioning set")
    L = _cholesky(values[np.ix_(cond, cond)])
    w = solve_triangular(L, values[cond, target], lower=True, check_finite=False)
    v = float(values[target, target] - w @ w)
    return max(v, VARIANCE_FLOOR)


def conditional_entropy(kern: KernelMatrix, target: int, cond) -> float:
    """Gaussian conditional entropy 0.5 ln(2 pi e V), natural log."""
    return entropy_of_variance(conditional_variance(kern, target, cond))


def entropy_of_variance(variance: float) -> float:
    return 0.5 * (LOG_2PIE + np.log(variance))


# ---------------------------------------------------------------------------
# Batched conditional variances for the greedy selectors.
#
# Both helpers reproduce conditional_variance exactly (same Schur complement,
# factored once per distinct conditioning block instead of once per query).
# ---------------------------------------------------------------------------


def variances_shared_cond(kern: KernelMatrix, cond, targets) -> np.ndarray:
    """V(t | cond) for every target, one factorization of the shared block."""
    targets = np.asarray(targets, dtype=np.int64)
    cond = np.asarray(cond, dtype=np.int64)
    values = kern.values
    diag = values[targets, targets]
    if cond.size == 0:
        return np.maximum(diag, VARIANCE_FLOOR)
    L = _cholesky(values[np.ix_(cond, cond)])
    W = solve_triangular(L, values[np.ix_(cond, targets)], lower=True, check_finite=False)
    return np.maximum(diag - (W * W).sum(axis=0), VARIANCE_FLOOR)


def variances_grouped_cond(kern: KernelMatrix, targets, conds) -> np.ndarray:
    """V(targets[i] | conds[i]) with one factorization per distinct conditioning set."""
    targets = np.asarray(targets, dtype=np.int64)
    out = np.empty(len(targets))
    groups: dict[bytes, list[int]] = {}
    cond_arrays: dict[bytes, np.ndarray] = {}
    for pos, cond in enumerate(conds):
        cond = np.asarray(cond, dtype=np.int64)
        key = cond.tobytes()
        groups.setdefault(key, []).append(pos)
        cond_arrays[key] = cond
    for key, positions in groups.items():
        out[np.asarray(positions)] = variances_shared_cond(
            kern, cond_arrays[key], targets[np.asarray(positions)]
        )
    return out


def variances_exclude_self(kern: KernelMatrix, targets, closures) -> np.ndarray:
    """V(t | closure - {t}) where each closure is a sorted index set containing t.

    All targets sharing a closure S are answered from one Cholesky of K(S,S)
    via the inverse diagonal: V = 1 / [K(S,S)^-1]_(t,t).
    """
    targets = np.asarray(targets, dtype=np.int64)
    out = np.empty(len(targets))
    groups: dict[bytes, list[int]] = {}
    closure_arrays: dict[bytes, np.ndarray] = {}
    for pos, closure in enumerate(closures):
        closure = np.asarray(closure, dtype=np.int64)
        key = closure.tobytes()
        groups.setdefault(key, []).append(pos)
        closure_arrays[key] = closure
    values = kern.values
    for key, positions in groups.items():
        S = closure_arrays[key]
        if S.size == 1:
            for pos in positions:
                out[pos] = max(float(values[S[0], S[0]]), VARIANCE_FLOOR)
            continue
        L = _cholesky(values[np.ix_(S, S)])
        Linv = solve_triangular(L, np.eye(S.size), lower=True, check_finite=False)
        prec_diag = (Linv * Linv).sum(axis=0)
        where = {int(a): i for i, a in enumerate(S)}
        for pos in positions:
            out[pos] = max(1.0 / prec_diag[where[int(targets[pos])]], VARIANCE_FLOOR)
    return out


def write_kernel_csv(path, kern: KernelMatrix) -> None:
    """Debug dump of the indexed entries: rows ``i,j,value`` with |value| >= tau."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "value"])
        for i in range(kern.size):
            for j in kern.neighbors[i]:
                w.writerow([str(i), str(int(j)), _fmt(kern.values[i, j])])
