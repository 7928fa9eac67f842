"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import from the ``MMIDICT_ACCEL`` environment
variable (``numba`` or ``numpy``; default ``numba`` when importable) and can
be overridden at runtime with :func:`set_backend`.  Both paths execute the
same floating-point operations in the same order, so results agree to the
last bit on supported platforms.
"""

import os

import numpy as np

# the default TBB probe warns on older TBB builds; OpenMP is always present here
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

try:
    import numba
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

_ENV_FLAG = "MMIDICT_ACCEL"
_VALID = ("numba", "numpy")


def _initial_backend() -> str:
    want = os.environ.get(_ENV_FLAG, "").strip().lower()
    if want not in _VALID:
        want = "numba" if HAS_NUMBA else "numpy"
    if want == "numba" and not HAS_NUMBA:
        want = "numpy"
    return want


_backend = _initial_backend()


def current_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Select ``numba`` or ``numpy`` for subsequent kernel calls."""
    global _backend
    name = name.strip().lower()
    if name not in _VALID:
        raise ValueError(f"unknown backend {name!r}; expected one of {_VALID}")
    if name == "numba" and not HAS_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    _backend = name


def using_numba() -> bool:
    return _backend == "numba"


def set_threads(n: int) -> None:
    """Cap worker threads used by the numba path (no-op for numpy)."""
    if HAS_NUMBA and n >= 1:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


# ---------------------------------------------------------------------------
# Orthogonal matching pursuit, one signal.
#
# Greedy loop: pick the atom with the largest |correlation| to the residual
# (first index wins ties), re-solve least squares on the selected support via
# normal equations, stop at T atoms or once the residual norm drops below tol.
# ---------------------------------------------------------------------------


def _omp_single(D, y, T, tol, out_idx, out_val):
    n = D.shape[0]
    K = D.shape[1]
    r = y.copy()
    sel = np.empty(T, np.int64)
    m = 0
    for _ in range(T):
        if np.sqrt(np.dot(r, r)) < tol:
            break
        corr = D.T @ r
        for s in range(m):
            corr[sel[s]] = 0.0
        best = 0
        best_abs = -1.0
        for i in range(K):
            a = abs(corr[i])
            if a > best_abs:
                best_abs = a
                best = i
        if best_abs <= 0.0:
            break
        sel[m] = best
        m += 1
        A = np.empty((n, m))
        for c in range(m):
            A[:, c] = D[:, sel[c]]
        G = A.T @ A
        b = A.T @ y
        coef = np.linalg.solve(G, b)
        r = y - A @ coef
        for c in range(m):
            out_idx[c] = sel[c]
            out_val[c] = coef[c]
    return m


def _omp_batch_py(D, Y, T, tol):
    N = Y.shape[1]
    idx = np.full((N, T), -1, np.int64)
    val = np.zeros((N, T))
    cnt = np.zeros(N, np.int64)
    for j in range(N):
        cnt[j] = _omp_single(D, Y[:, j].copy(), T, tol, idx[j], val[j])
    return idx, val, cnt


# ---------------------------------------------------------------------------
# Dynamic time warping.
#
# Accumulated-cost recurrence over (match, insert, delete) with Euclidean
# local cost.  Ties between predecessors are broken toward the shorter path,
# which keeps the reported (cost, length) pair symmetric in the two inputs.
# ---------------------------------------------------------------------------


def _dtw_cost_length(a, b):
    na = a.shape[0]
    nb = b.shape[0]
    dim = a.shape[1]
    acc = np.empty((na, nb))
    plen = np.empty((na, nb), np.int64)
    for i in range(na):
        for j in range(nb):
            s = 0.0
            for t in range(dim):
                d = a[i, t] - b[j, t]
                s += d * d
            loc = np.sqrt(s)
            if i == 0 and j == 0:
                acc[i, j] = loc
                plen[i, j] = 1
            elif i == 0:
                acc[i, j] = acc[i, j - 1] + loc
                plen[i, j] = plen[i, j - 1] + 1
            elif j == 0:
                acc[i, j] = acc[i - 1, j] + loc
                plen[i, j] = plen[i - 1, j] + 1
            else:
                bc = acc[i - 1, j - 1]
                bl = plen[i - 1, j - 1]
                if acc[i - 1, j] < bc or (acc[i - 1, j] == bc and plen[i - 1, j] < bl):
                    bc = acc[i - 1, j]
                    bl = plen[i - 1, j]
                if acc[i, j - 1] < bc or (acc[i, j - 1] == bc and plen[i, j - 1] < bl):
                    bc = acc[i, j - 1]
                    bl = plen[i, j - 1]
                acc[i, j] = bc + loc
                plen[i, j] = bl + 1
    return acc[na - 1, nb - 1], plen[na - 1, nb - 1]


if HAS_NUMBA:
    _omp_single_jit = njit(cache=True)(_omp_single)
    _dtw_cost_length_jit = njit(cache=True)(_dtw_cost_length)

    @njit(cache=True, parallel=True)
    def _omp_batch_jit(D, Y, T, tol):
        N = Y.shape[1]
        idx = np.full((N, T), -1, np.int64)
        val = np.zeros((N, T))
        cnt = np.zeros(N, np.int64)
        for j in prange(N):
            cnt[j] = _omp_single_jit(D, Y[:, j].copy(), T, tol, idx[j], val[j])
        return idx, val, cnt


def omp_batch(D, Y, T, tol=1e-10):
    """Encode every column of Y over dictionary D, at most T atoms each.

    Returns (idx, val, cnt): per-signal selected atom indices (-1 padded),
    their least-squares coefficients, and the support size.
    """
    D = np.ascontiguousarray(D, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if using_numba():
        return _omp_batch_jit(D, Y, T, tol)
    return _omp_batch_py(D, Y, T, tol)


def dtw_cost_length(a, b):
    """Optimal DTW alignment of two (frames, dim) arrays.

    Returns (total path cost, path length in steps).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if using_numba():
        return _dtw_cost_length_jit(a, b)
    return _dtw_cost_length(a, b)
