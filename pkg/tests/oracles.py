"""Independent oracles used by the tests: brute-force enumeration, dense
matrix inversion, and exhaustive path search.  Nothing here shares code with
the implementation paths it checks."""

import itertools

import numpy as np

LOG_2PIE = float(np.log(2.0 * np.pi * np.e))


def schur_variance_via_inv(K: np.ndarray, target: int, cond) -> float:
    """Conditional variance through explicit dense inversion."""
    cond = list(cond)
    if not cond:
        return float(K[target, target])
    Kcc = K[np.ix_(cond, cond)]
    v = K[cond, target]
    return float(K[target, target] - v @ np.linalg.inv(Kcc) @ v)


def gaussian_set_mi(K: np.ndarray, subset) -> float:
    """I(S; complement) for a Gaussian with covariance K, via log-determinants."""
    subset = sorted(subset)
    rest = sorted(set(range(K.shape[0])) - set(subset))
    if not subset or not rest:
        return 0.0
    _, ld_s = np.linalg.slogdet(K[np.ix_(subset, subset)])
    _, ld_r = np.linalg.slogdet(K[np.ix_(rest, rest)])
    _, ld = np.linalg.slogdet(K)
    return 0.5 * (ld_s + ld_r - ld)


def best_subset_mi(K: np.ndarray, k: int):
    """Exhaustive max of I(S; complement) over all size-k subsets."""
    best_val = -np.inf
    best_set = None
    for subset in itertools.combinations(range(K.shape[0]), k):
        val = gaussian_set_mi(K, subset)
        if val > best_val:
            best_val = val
            best_set = subset
    return best_val, best_set


def dtw_paths_exhaustive(a: np.ndarray, b: np.ndarray):
    """Min (total cost, path length) over every monotone alignment path.

    Ties on cost prefer the shorter path, matching the documented tie-break.
    """
    na, nb = a.shape[0], b.shape[0]
    local = np.empty((na, nb))
    for i in range(na):
        for j in range(nb):
            local[i, j] = np.linalg.norm(a[i] - b[j])
    best = [np.inf, np.inf]

    def walk(i, j, cost, steps):
        cost = cost + local[i, j]
        steps += 1
        if i == na - 1 and j == nb - 1:
            if (cost, steps) < tuple(best):
                best[0], best[1] = cost, steps
            return
        if i + 1 < na and j + 1 < nb:
            walk(i + 1, j + 1, cost, steps)
        if i + 1 < na:
            walk(i + 1, j, cost, steps)
        if j + 1 < nb:
            walk(i, j + 1, cost, steps)

    walk(0, 0, 0.0, 0)
    return best[0], int(best[1])


def greedy_free_summary_objective(frames_normed: np.ndarray, subset, jitter=1e-8) -> float:
    """Eq-style set objective on the linear kernel, computed via log-dets only."""
    gram = frames_normed.T @ frames_normed + jitter * np.eye(frames_normed.shape[1])
    return gaussian_set_mi(gram, subset)
