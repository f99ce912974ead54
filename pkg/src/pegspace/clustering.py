"""K-means with an online refinement phase, silhouettes and MANOVA."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .stats import special_sf


@dataclass(frozen=True)
class KMeansResult:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    objective: float
    replicate_of_best: int
    # objective after every Lloyd iteration and every online move, per replicate
    history: tuple = field(default=(), repr=False)


def _sq_dists(x, centroids):
    return ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def objective(data, assignments, centroids) -> float:
    """Total squared distance of points to their assigned centroids."""
    x = np.asarray(data, dtype=float)
    d = x - np.asarray(centroids)[np.asarray(assignments)]
    return float((d * d).sum())


def _plusplus(x, k, rng):
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        i = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(x[i])
        d2 = np.minimum(d2, ((x - x[i]) ** 2).sum(axis=1))
    return np.array(centers)


def _means(x, labels, k):
    counts = np.bincount(labels, minlength=k)
    sums = np.stack([np.bincount(labels, weights=x[:, f], minlength=k) for f in range(x.shape[1])], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sums / counts[:, None], counts


def _repair_empty(x, labels, centroids, k):
    """Give every empty cluster the farthest point of the currently largest cluster."""
    while True:
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return labels
        big = int(np.argmax(counts))
        members = np.flatnonzero(labels == big)
        d = ((x[members] - centroids[big]) ** 2).sum(axis=1)
        labels = labels.copy()
        labels[members[int(np.argmax(d))]] = empty[0]
        centroids, _ = _means(x, labels, k)


def _lloyd(x, centroids, max_iter, history):
    k = centroids.shape[0]
    labels = None
    for _ in range(max_iter):
        new = np.argmin(_sq_dists(x, centroids), axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = _repair_empty(x, new, centroids, k)
        centroids, _ = _means(x, labels, k)
        history.append(objective(x, labels, centroids))
    return labels, centroids


@numba.njit(cache=True)
def _objective_kernel(x, labels, centroids):
    total = 0.0
    for i in range(x.shape[0]):
        c = labels[i]
        for f in range(x.shape[1]):
            d = x[i, f] - centroids[c, f]
            total += d * d
    return total


@numba.njit(cache=True)
def _online_kernel(x, labels, centroids, counts, history, max_sweeps):
    """Single-point moves; returns the number of objective values written."""
    n, p = x.shape
    k = centroids.shape[0]
    scale = 1.0
    for i in range(n):
        for f in range(p):
            scale += x[i, f] * x[i, f]
    d2 = np.empty(k)
    h = 0
    for _ in range(max_sweeps):
        moved = False
        for i in range(n):
            a = labels[i]
            if counts[a] <= 1:
                continue
            for c in range(k):
                acc = 0.0
                for f in range(p):
                    d = centroids[c, f] - x[i, f]
                    acc += d * d
                d2[c] = acc
            remove = counts[a] / (counts[a] - 1.0) * d2[a]
            best = -1
            best_delta = -1e-12 * scale
            for c in range(k):
                if c == a:
                    continue
                delta = counts[c] / (counts[c] + 1.0) * d2[c] - remove
                if delta < best_delta:
                    best_delta = delta
                    best = c
            if best >= 0:
                for f in range(p):
                    centroids[a, f] = (centroids[a, f] * counts[a] - x[i, f]) / (counts[a] - 1.0)
                    centroids[best, f] = (centroids[best, f] * counts[best] + x[i, f]) / (counts[best] + 1.0)
                counts[a] -= 1.0
                counts[best] += 1.0
                labels[i] = best
                moved = True
                if h == history.shape[0]:
                    grown = np.empty(2 * h + 16)
                    grown[:h] = history[:h]
                    history = grown
                history[h] = _objective_kernel(x, labels, centroids)
                h += 1
        if not moved:
            break
        # refresh to exact means to stop drift from the incremental updates
        centroids[:, :] = 0.0
        for i in range(n):
            for f in range(p):
                centroids[labels[i], f] += x[i, f]
        for c in range(k):
            for f in range(p):
                centroids[c, f] /= counts[c]
    return history[:h]


def _online(x, labels, centroids, history, max_sweeps=1000):
    """Move single points between clusters while a move strictly lowers the objective."""
    k = centroids.shape[0]
    labels = labels.astype(np.int64)
    centroids = np.ascontiguousarray(centroids, dtype=float).copy()
    counts = np.bincount(labels, minlength=k).astype(float)
    moves = _online_kernel(np.ascontiguousarray(x), labels, centroids, counts, np.empty(64), max_sweeps)
    history.extend(moves.tolist())
    return labels, centroids


def kmeans(data, k: int, replicates: int = 5, online: bool = True, rng=None,
           max_iter: int = 300) -> KMeansResult:
    """Best of ``replicates`` k-means++ / Lloyd / online-phase runs."""
    x = check_array(data, dtype=float)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    rng = np.random.default_rng(rng)
    best = None
    histories = []
    for r in range(replicates):
        hist = []
        labels, centroids = _lloyd(x, _plusplus(x, k, rng), max_iter, hist)
        if online:
            labels, centroids = _online(x, labels.copy(), centroids, hist)
        centroids, _ = _means(x, labels, k)
        obj = objective(x, labels, centroids)
        histories.append(np.array(hist))
        if best is None or obj < best[0]:
            best = (obj, r, labels, centroids)
    obj, r, labels, centroids = best
    return KMeansResult(k, labels, centroids, obj, r, tuple(histories))


@numba.njit(cache=True)
def _cluster_distance_sums(x, labels, k):
    """Row i, column c: sum of Euclidean distances from point i to members of cluster c."""
    n, p = x.shape
    sums = np.zeros((n, k))
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for f in range(p):
                d = x[i, f] - x[j, f]
                acc += d * d
            d = np.sqrt(acc)
            sums[i, labels[j]] += d
            sums[j, labels[i]] += d
    return sums


def silhouette(data, assignments):
    """Per-point silhouette values and their mean.

    Distances are Euclidean; points alone in their cluster score 0.
    """
    x = check_array(data, dtype=float)
    labels = np.asarray(assignments)
    if labels.shape != (x.shape[0],):
        raise ValueError("one assignment per point required")
    uniq, lab = np.unique(labels, return_inverse=True)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least two clusters")
    k = uniq.size
    counts = np.bincount(lab, minlength=k).astype(float)
    sums = _cluster_distance_sums(np.ascontiguousarray(x), lab.astype(np.int64), k)
    own = counts[lab]
    rows = np.arange(x.shape[0])
    with np.errstate(invalid="ignore", divide="ignore"):
        a = sums[rows, lab] / (own - 1.0)
        other = sums / counts
    other[rows, lab] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[own == 1] = 0.0
    return s, float(s.mean())


@dataclass(frozen=True)
class OptimalK:
    k: int
    sc: float
    sc_by_k: dict
    results: dict = field(repr=False, default_factory=dict)


def optimal_k(data, k_range=range(2, 11), rng=None, replicates: int = 5) -> OptimalK:
    """Number of clusters maximising the mean silhouette (ties go to the smaller k)."""
    x = check_array(data, dtype=float)
    ks = sorted(int(k) for k in k_range)
    if not ks or ks[0] < 2 or ks[-1] > x.shape[0] - 1:
        raise ValueError(f"k range must lie within [2, {x.shape[0] - 1}]")
    seeds = np.random.SeedSequence(np.random.default_rng(rng).integers(2**63)).spawn(len(ks))
    sc_by_k, results = {}, {}
    for k, seed in zip(ks, seeds):
        res = kmeans(x, k, replicates=replicates, rng=np.random.default_rng(seed))
        _, mean = silhouette(x, res.assignments)
        sc_by_k[k] = mean
        results[k] = res
    best = max(ks, key=lambda k: (sc_by_k[k], -k))
    return OptimalK(best, sc_by_k[best], sc_by_k, results)


class KMeans(ClusterMixin, BaseEstimator):
    """Estimator wrapper around :func:`kmeans`.

    Parameters
    ----------
    n_clusters : int
    n_init : int
        Number of replicates; the lowest objective wins.
    online : bool
        Run the single-point refinement phase after Lloyd iterations.
    max_iter : int
    random_state : int, Generator or None
    """

    def __init__(self, n_clusters=4, n_init=5, online=True, max_iter=300, random_state=None):
        self.n_clusters = n_clusters
        self.n_init = n_init
        self.online = online
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        res = kmeans(X, self.n_clusters, replicates=self.n_init, online=self.online,
                     rng=self.random_state, max_iter=self.max_iter)
        self.result_ = res
        self.labels_ = res.assignments
        self.cluster_centers_ = res.centroids
        self.inertia_ = res.objective
        self.n_features_in_ = res.centroids.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=float)
        return np.argmin(_sq_dists(X, self.cluster_centers_), axis=1)


@dataclass(frozen=True)
class ManovaReport:
    wilks: np.ndarray
    chi2: np.ndarray
    df: np.ndarray
    p_values: np.ndarray
    dimension: int
    eigenvalues: np.ndarray
    regularized: bool = False


def scatter_matrices(data, labels):
    """Within-group and between-group sums of squares and cross-products."""
    x = np.asarray(data, dtype=float)
    labels = np.asarray(labels)
    grand = x.mean(axis=0)
    p = x.shape[1]
    W = np.zeros((p, p))
    B = np.zeros((p, p))
    for g in np.unique(labels):
        xg = x[labels == g]
        mg = xg.mean(axis=0)
        dc = xg - mg
        W += dc.T @ dc
        dm = (mg - grand)[:, None]
        B += xg.shape[0] * (dm @ dm.T)
    return W, B


def manova(data, labels, alpha: float = 0.05) -> ManovaReport:
    """One-way MANOVA dimension tests with Bartlett's chi-square approximation.

    For each d, the statistic tests whether the group means lie in a
    d-dimensional subspace. ``dimension`` is the smallest d not rejected at
    ``alpha``.
    """
    x = check_array(data, dtype=float)
    labels = np.asarray(labels)
    n, p = x.shape
    groups, sizes = np.unique(labels, return_counts=True)
    g = groups.size
    if g < 2:
        raise ValueError("MANOVA needs at least two groups")
    if sizes.min() < 2:
        raise ValueError("every group needs at least two members")
    if not n > p + g:
        raise ValueError("need more observations than variables plus groups")
    W, B = scatter_matrices(x, labels)
    regularized = False
    try:
        linalg.cholesky(W)
        if np.linalg.cond(W) > 1e12:
            raise linalg.LinAlgError
    except linalg.LinAlgError:
        W = W + 1e-10 * np.trace(W) * np.eye(p)
        regularized = True
    lam = linalg.eigh(B, W, eigvals_only=True)[::-1]
    lam = np.maximum(lam, 0.0)
    s = min(p, g - 1)
    factor = n - 1 - (p + g) / 2.0
    wilks, chi2, df, pv = [], [], [], []
    for d in range(s):
        log_l = -np.sum(np.log1p(lam[d:s]))
        stat = max(0.0, -factor * log_l)
        dof = (p - d) * (g - d - 1)
        wilks.append(math.exp(log_l))
        chi2.append(stat)
        df.append(dof)
        pv.append(special_sf("chi2", stat, dof))
    pv = np.array(pv)
    above = np.flatnonzero(pv > alpha)
    dim = int(above[0]) if above.size else s
    return ManovaReport(np.array(wilks), np.array(chi2), np.array(df, dtype=int), pv, dim,
                        lam[:s], regularized)
