"""Dictionary compression: greedy entropy/mutual-information selection,
agglomerative class-distribution merging, and the k-means baseline."""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .data import _fmt, l2_normalize_columns
from .errors import ValidationError
from .gp import (
    KernelMatrix,
    entropy_of_variance,
    variances_exclude_self,
    variances_grouped_cond,
    variances_shared_cond,
)
from .labeldist import set_class_dist
from .pursuit import Dictionary


@dataclass
class SelectionTrace:
    """Ordered atom choices of one greedy run with per-step scores and timing."""

    method: str
    chosen: list[int]
    objectives: list[float]
    lam: float | None = None
    seconds: list[float] = field(default_factory=list)
    diversity_terms: list[float] = field(default_factory=list)
    coverage_terms: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.chosen)) != len(self.chosen):
            raise ValidationError("trace atoms must be distinct")


@dataclass
class MergeRecord:
    step: int
    kept: int
    removed: int
    mi_loss: float
    seconds: float


def _check_k(k: int, n_atoms: int, upper: int) -> None:
    if not 1 <= k <= upper:
        raise ValidationError(f"k must be in [1, {upper}] for {n_atoms} atoms")


def select_me(kern: KernelMatrix, k: int) -> SelectionTrace:
    """Greedy maximum-entropy selection: argmax H(d | chosen) per step."""
    K = kern.size
    _check_k(k, K, K)
    chosen: list[int] = []
    objectives: list[float] = []
    seconds: list[float] = []
    remaining = np.arange(K, dtype=np.int64)
    selected = np.empty(0, dtype=np.int64)
    for _ in range(k):
        t0 = time.perf_counter()
        variances = variances_shared_cond(kern, selected, remaining)
        best = int(np.argmax(entropy_of_variance(variances)))
        chosen.append(int(remaining[best]))
        objectives.append(float(entropy_of_variance(variances[best])))
        selected = np.sort(np.append(selected, remaining[best]))
        remaining = np.delete(remaining, best)
        seconds.append(time.perf_counter() - t0)
    return SelectionTrace(method="me", chosen=chosen, objectives=objectives, seconds=seconds)


def _mmi_appearance_terms(kern: KernelMatrix, selected, remaining, sparse: bool):
    """Per-candidate H(d|D*) and H(d|Dbar*) entropies for one greedy step.

    ``selected`` and ``remaining`` must be sorted.  With ``sparse`` the
    conditioning sets are restricted to each candidate's compact support.
    """
    cands = remaining
    if sparse:
        in_selected = np.zeros(kern.size, dtype=bool)
        in_selected[selected] = True
        in_remaining = np.zeros(kern.size, dtype=bool)
        in_remaining[remaining] = True
        conds_num = []
        closures_den = []
        for t in cands:
            nbrs = kern.neighbors[t]  # sorted, so the masked views stay sorted
            conds_num.append(nbrs[in_selected[nbrs]])
            closures_den.append(nbrs[in_remaining[nbrs]])
    else:
        conds_num = [selected] * len(cands)
        closures_den = [remaining] * len(cands)
    v_num = variances_grouped_cond(kern, cands, conds_num)
    v_den = variances_exclude_self(kern, cands, closures_den)
    return entropy_of_variance(v_num), entropy_of_variance(v_den)


def select_mmi1(kern: KernelMatrix, k: int, sparse: bool = True) -> SelectionTrace:
    """Greedy argmax of H(d|D*) - H(d|Dbar*) over the remaining atoms.

    Equivalent to maximizing the conditional-variance ratio; ties go to the
    lowest atom index.  Requires k <= K-1 so the remaining set never empties.
    """
    K = kern.size
    if k == K:
        raise ValidationError("remaining set empty")
    _check_k(k, K, K - 1)
    chosen: list[int] = []
    objectives: list[float] = []
    seconds: list[float] = []
    diversity: list[float] = []
    coverage: list[float] = []
    remaining = np.arange(K, dtype=np.int64)
    selected = np.empty(0, dtype=np.int64)
    for _ in range(k):
        t0 = time.perf_counter()
        h_num, h_den = _mmi_appearance_terms(kern, selected, remaining, sparse)
        gains = h_num - h_den
        best = int(np.argmax(gains))
        chosen.append(int(remaining[best]))
        objectives.append(float(gains[best]))
        diversity.append(float(h_num[best]))
        coverage.append(float(-h_den[best]))
        selected = np.sort(np.append(selected, remaining[best]))
        remaining = np.delete(remaining, best)
        seconds.append(time.perf_counter() - t0)
    return SelectionTrace(
        method="mmi1",
        chosen=chosen,
        objectives=objectives,
        seconds=seconds,
        diversity_terms=diversity,
        coverage_terms=coverage,
    )


def _label_gains(tlogs, dists, selected, remaining):
    """H(L_d | L_D*) - H(L_d | L_Dbar*) for every remaining candidate."""
    p_sel = set_class_dist(dists, selected)
    term_sel = -(tlogs[remaining] @ p_sel)
    n_rem = len(remaining)
    sum_rem = dists[remaining].sum(axis=0)
    # mean distribution of the remaining pool with the candidate removed
    p_bar = (sum_rem[None, :] - dists[remaining]) / (n_rem - 1)
    term_bar = -(tlogs[remaining] * p_bar).sum(axis=1)
    return term_sel - term_bar


def estimate_lambda(kern: KernelMatrix, dists: np.ndarray, sparse: bool = True) -> float:
    """Ratio of the maximal first-step label gain to the maximal first-step
    appearance gain (both with nothing selected yet)."""
    K = kern.size
    dists = np.asarray(dists, dtype=np.float64)
    if dists.shape[0] != K:
        raise ValidationError("one class distribution per atom required")
    if K < 2:
        raise ValidationError("degenerate kernel")
    remaining = np.arange(K, dtype=np.int64)
    selected = np.empty(0, dtype=np.int64)
    h_num, h_den = _mmi_appearance_terms(kern, selected, remaining, sparse)
    max_app = float(np.max(h_num - h_den))
    if max_app <= 0.0:
        raise ValidationError("degenerate kernel")
    tlogs = np.where(dists > 0, dists * np.log(np.where(dists > 0, dists, 1.0)), 0.0)
    max_label = float(np.max(_label_gains(tlogs, dists, selected, remaining)))
    return max(0.0, max_label / max_app)


def select_mmi2(
    kern: KernelMatrix,
    dists: np.ndarray,
    k: int,
    lam: float | None = None,
    sparse: bool = True,
) -> SelectionTrace:
    """Greedy MMI selection with the class-distribution term weighted by lam.

    ``lam=None`` estimates the weight from the first-step gains; lam=0 scores
    candidates identically to select_mmi1.
    """
    K = kern.size
    if k == K:
        raise ValidationError("remaining set empty")
    _check_k(k, K, K - 1)
    dists = np.asarray(dists, dtype=np.float64)
    if dists.shape[0] != K:
        raise ValidationError("one class distribution per atom required")
    if lam is None:
        lam = estimate_lambda(kern, dists, sparse=sparse)
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    tlogs = np.where(dists > 0, dists * np.log(np.where(dists > 0, dists, 1.0)), 0.0)

    chosen: list[int] = []
    objectives: list[float] = []
    seconds: list[float] = []
    remaining = np.arange(K, dtype=np.int64)
    selected = np.empty(0, dtype=np.int64)
    for _ in range(k):
        t0 = time.perf_counter()
        h_num, h_den = _mmi_appearance_terms(kern, selected, remaining, sparse)
        gains = (h_num - h_den) + lam * _label_gains(tlogs, dists, selected, remaining)
        best = int(np.argmax(gains))
        chosen.append(int(remaining[best]))
        objectives.append(float(gains[best]))
        selected = np.sort(np.append(selected, remaining[best]))
        remaining = np.delete(remaining, best)
        seconds.append(time.perf_counter() - t0)
    return SelectionTrace(
        method="mmi2", chosen=chosen, objectives=objectives, lam=float(lam), seconds=seconds
    )


# ---------------------------------------------------------------------------
# MMI-3: agglomerative merging by minimal mutual-information loss
# ---------------------------------------------------------------------------


def merge_mi_loss(prior_a: float, dist_a, prior_b: float, dist_b) -> float:
    """Information lost by merging one atom pair (the MMI-3 criterion)."""
    priors = np.array([prior_a, prior_b], dtype=np.float64)
    dists = np.vstack([np.asarray(dist_a, dtype=np.float64), np.asarray(dist_b, dtype=np.float64)])
    return float(_pairwise_mi_loss(priors, dists)[0, 1])


def _pairwise_mi_loss(priors, dists):
    """Matrix of merge losses: s_i + s_j - s_merge, +inf on and below the diagonal."""
    m = len(priors)
    W = priors[:, None] * dists  # weighted distributions
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(W > 0, W * np.log(np.where(W > 0, dists, 1.0)), 0.0).sum(axis=1)
    mix = W[:, None, :] + W[None, :, :]  # (m, m, M) merged weighted dists
    pstar = priors[:, None] + priors[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        mix_log = np.where(mix > 0, mix * np.log(np.where(mix > 0, mix, 1.0)), 0.0).sum(axis=2)
        pstar_log = np.where(pstar > 0, pstar * np.log(np.where(pstar > 0, pstar, 1.0)), 0.0)
    s_merge = mix_log - pstar_log
    loss = s[:, None] + s[None, :] - s_merge
    loss[np.tril_indices(m)] = np.inf
    return loss


def select_mmi3(dictionary: Dictionary, dists: np.ndarray, priors: np.ndarray, k: int):
    """Repeatedly merge the atom pair losing the least label information.

    The merged atom vector is the prior-weighted average of the pair,
    re-normalized; the merged distribution and prior follow the mixture rule.
    Returns the size-k Dictionary (with class_dist and atom_prior attached)
    and the merge log.  Pair ties break to the lexicographically smallest.
    """
    K = dictionary.n_atoms
    if not 2 <= k < K:
        raise ValidationError(f"k must be in [2, {K - 1}]")
    dists = np.asarray(dists, dtype=np.float64).copy()
    priors = np.asarray(priors, dtype=np.float64).copy()
    if dists.shape[0] != K or priors.shape != (K,):
        raise ValidationError("need one class distribution and one prior per atom")
    if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-9:
        raise ValidationError("priors must form a distribution")

    atoms = dictionary.atoms.copy()
    log: list[MergeRecord] = []
    step = 0
    while atoms.shape[1] > k:
        t0 = time.perf_counter()
        loss = _pairwise_mi_loss(priors, dists)
        flat = int(np.argmin(loss))  # row-major argmin = lexicographically smallest pair
        i, j = divmod(flat, loss.shape[1])
        p_star = priors[i] + priors[j]
        if p_star > 0:
            merged_dist = (priors[i] * dists[i] + priors[j] * dists[j]) / p_star
            merged_vec = (priors[i] * atoms[:, i] + priors[j] * atoms[:, j]) / p_star
        else:
            merged_dist = 0.5 * (dists[i] + dists[j])
            merged_vec = 0.5 * (atoms[:, i] + atoms[:, j])
        norm = np.linalg.norm(merged_vec)
        if norm < 1e-12:
            merged_vec = atoms[:, i].copy()  # antipodal pair: keep the first direction
            norm = 1.0
        atoms[:, i] = merged_vec / norm
        dists[i] = merged_dist
        priors[i] = p_star
        atoms = np.delete(atoms, j, axis=1)
        dists = np.delete(dists, j, axis=0)
        priors = np.delete(priors, j)
        log.append(
            MergeRecord(
                step=step,
                kept=int(i),
                removed=int(j),
                mi_loss=float(loss[i, j] if np.isfinite(loss[i, j]) else 0.0),
                seconds=time.perf_counter() - t0,
            )
        )
        step += 1
    atoms, _ = l2_normalize_columns(atoms)
    # guard against drift in the mixture weights
    total = priors.sum()
    priors = priors / total if total > 0 else np.full(len(priors), 1.0 / len(priors))
    row_sums = dists.sum(axis=1, keepdims=True)
    dists = np.where(row_sums > 0, dists / np.where(row_sums > 0, row_sums, 1.0), 1.0 / dists.shape[1])
    out = Dictionary(atoms=atoms, class_dist=dists, atom_prior=priors)
    return out, log


# ---------------------------------------------------------------------------
# k-means baseline over atom vectors
# ---------------------------------------------------------------------------


def _kmeans_pp_seed(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    chosen = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    centers[0] = points[first]
    chosen[first] = True
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a center: take lowest unchosen index
            idx = int(np.flatnonzero(~chosen)[0])
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[i] = points[idx]
        chosen[idx] = True
        d2 = np.minimum(d2, ((points - centers[i]) ** 2).sum(axis=1))
    return centers


def select_kmeans(dictionary: Dictionary, k: int, seed=0, max_iter: int = 100) -> Dictionary:
    """Standard k-means (k-means++ seeding) over atoms; centroids re-normalized."""
    K = dictionary.n_atoms
    _check_k(k, K, K)
    points = dictionary.atoms.T.copy()
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_seed(points, k, rng)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = assign == c
            if members.any():
                new_centers[c] = points[members].mean(axis=0)
            else:
                worst = int(np.argmax(d2[np.arange(len(points)), assign]))
                new_centers[c] = points[worst]
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum()))
        centers = new_centers
        if shift < 1e-8:
            break
    normed, zero = l2_normalize_columns(centers.T)
    if np.any(zero):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        worst = int(np.argmax(d2[np.arange(len(points)), assign]))
        for c in np.flatnonzero(zero):
            normed[:, c] = points[worst] / np.linalg.norm(points[worst])
    return Dictionary(atoms=normed)


def atom_prior_from_codes(codes, mode: str = "mass") -> np.ndarray:
    """Empirical atom prior: usage mass over the training codes, or uniform."""
    if mode == "uniform":
        return np.full(codes.n_atoms, 1.0 / codes.n_atoms)
    if mode != "mass":
        raise ValidationError(f"unknown prior mode {mode!r}; expected 'mass' or 'uniform'")
    mass = codes.atom_abs_mass()
    total = mass.sum()
    if total <= 0:
        return np.full(codes.n_atoms, 1.0 / codes.n_atoms)
    return mass / total


def subset_dictionary(dictionary: Dictionary, chosen) -> Dictionary:
    """New dictionary keeping the chosen atoms (metadata sliced along)."""
    chosen = np.asarray(chosen, dtype=np.int64)
    dist = dictionary.class_dist[chosen] if dictionary.class_dist is not None else None
    prior = None
    if dictionary.atom_prior is not None:
        prior = dictionary.atom_prior[chosen]
        total = prior.sum()
        prior = prior / total if total > 0 else np.full(len(chosen), 1.0 / len(chosen))
    return Dictionary(atoms=dictionary.atoms[:, chosen], class_dist=dist, atom_prior=prior)


def write_trace_csv(path, rows) -> None:
    """Rows of (step, atom, objective, seconds); accepts a SelectionTrace or merge log."""
    if isinstance(rows, SelectionTrace):
        rows = [
            (i, a, o, s)
            for i, (a, o, s) in enumerate(zip(rows.chosen, rows.objectives, rows.seconds))
        ]
    elif rows and isinstance(rows[0], MergeRecord):
        rows = [(r.step, r.kept, r.mi_loss, r.seconds) for r in rows]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "atom", "objective", "seconds"])
        for step, atom, objective, secs in rows:
            w.writerow([str(int(step)), str(int(atom)), _fmt(objective), _fmt(secs)])
