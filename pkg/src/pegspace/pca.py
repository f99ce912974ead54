"""Mean-centred principal component analysis of impedance parameter sets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .eda import GLOBAL_BOUNDS
from .stats import linfit, paired_t_test


def jacobi_eigh(matrix, tol: float = 1e-15, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues in descending
    order and eigenvectors as columns.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0))):
        raise ValueError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale or off == 0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/columns p and q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def orient_components(vectors) -> np.ndarray:
    """Flip columns so that each one's largest-magnitude entry is positive."""
    vectors = np.array(vectors, dtype=float)
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


@dataclass(frozen=True)
class PcaModel:
    feature_mean: np.ndarray
    # per-feature [lo, hi] used to scale inputs to [0, 1]; None for raw data
    normalization: np.ndarray | None
    components: np.ndarray
    eigenvalues: np.ndarray
    vaf: np.ndarray

    @property
    def normalize(self) -> bool:
        return self.normalization is not None

    def preprocess(self, data) -> np.ndarray:
        x = np.asarray(data, dtype=float)
        if self.normalization is not None:
            lo, hi = self.normalization[:, 0], self.normalization[:, 1]
            x = (x - lo) / (hi - lo)
        return x - self.feature_mean


def fit_pca(data, normalize: bool = True, bounds=None) -> PcaModel:
    """Fit PCA on the rows of ``data``.

    With ``normalize`` the columns are first min-max scaled using ``bounds``
    (the global parameter bounds by default). Data are then centred and the
    sample covariance is diagonalised. A data set with no variance yields an
    all-zero VAF.
    """
    x = check_array(data, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("PCA needs at least two rows")
    norm = None
    if normalize:
        norm = np.array(GLOBAL_BOUNDS if bounds is None else bounds, dtype=float)
        if norm.shape != (x.shape[1], 2):
            raise ValueError("bounds must have one [lo, hi] row per column")
        x = (x - norm[:, 0]) / (norm[:, 1] - norm[:, 0])
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    w, v = jacobi_eigh(cov)
    w = np.maximum(w, 0.0)
    total = w.sum()
    vaf = 100.0 * w / total if total > 0 else np.zeros_like(w)
    return PcaModel(mean, norm, orient_components(v), w, vaf)


def project(model: PcaModel, data, n_components: int) -> np.ndarray:
    """Scores of ``data`` on the leading ``n_components`` components."""
    n_features = model.components.shape[0]
    if not 1 <= n_components <= n_features:
        raise ValueError(f"n_components must be in [1, {n_features}]")
    return model.preprocess(data) @ model.components[:, :n_components]


def reconstruct(model: PcaModel, scores) -> np.ndarray:
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    k = scores.shape[1]
    x = scores @ model.components[:, :k].T + model.feature_mean
    if model.normalization is not None:
        lo, hi = model.normalization[:, 0], model.normalization[:, 1]
        x = x * (hi - lo) + lo
    return x


def vaf_slope(model: PcaModel) -> float:
    """Slope of the line fitted to the VAF of the first three components."""
    return linfit([1.0, 2.0, 3.0], model.vaf[:3]).slope


class SlopeTest(NamedTuple):
    t: float
    p: float
    mean_success_slope: float
    mean_random_slope: float


def _slope_with_retry(draw, normalize, attempts=10):
    for _ in range(attempts):
        model = fit_pca(draw(), normalize=normalize)
        if model.eigenvalues.sum() > 0:
            return vaf_slope(model)
    raise RuntimeError("could not draw a non-degenerate sample")


def subset_slope_test(full_data, success_data, M: int = 100, rng=None,
                      normalize: bool = True, method: str = "paired_t") -> SlopeTest:
    """Compare VAF slopes of successful sets against random subsets of all trials.

    With ``method="paired_t"`` each of ``M`` pairs fits PCA to a bootstrap
    resample of ``success_data`` and to a random subset of ``full_data`` of
    the same size; a one-sided paired t-test asks whether the successful
    slopes are more negative. Because the successful set is fixed, this test
    rejects far more often than its nominal level when the successful set is
    itself a random subset.

    ``method="rank"`` instead places the slope of ``success_data`` among the
    ``M`` random-subset slopes and reports the one-sided rank p-value
    ``(1 + #{random <= success}) / (M + 1)``; ``t`` is NaN.
    """
    full = check_array(full_data, dtype=float)
    succ = check_array(success_data, dtype=float)
    if M < 2:
        raise ValueError("M must be >= 2")
    if method not in ("paired_t", "rank"):
        raise ValueError(f"unknown method {method!r}")
    n, big_n = succ.shape[0], full.shape[0]
    if not 2 <= n <= big_n:
        raise ValueError("need 2 <= len(success_data) <= len(full_data)")
    rng = np.random.default_rng(rng)
    r_slopes = np.empty(M)
    if method == "rank":
        s_slope = _slope_with_retry(lambda: succ, normalize, attempts=1)
        for m in range(M):
            r_slopes[m] = _slope_with_retry(lambda: full[rng.choice(big_n, n, replace=False)], normalize)
        p = (1.0 + np.count_nonzero(r_slopes <= s_slope)) / (M + 1.0)
        return SlopeTest(float("nan"), float(p), float(s_slope), float(r_slopes.mean()))
    s_slopes = np.empty(M)
    for m in range(M):
        s_slopes[m] = _slope_with_retry(lambda: succ[rng.integers(0, n, n)], normalize)
        r_slopes[m] = _slope_with_retry(lambda: full[rng.choice(big_n, n, replace=False)], normalize)
    t, p = paired_t_test(s_slopes, r_slopes, one_sided=True)
    return SlopeTest(t, p, float(s_slopes.mean()), float(r_slopes.mean()))


class PCA(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_pca`.

    Parameters
    ----------
    n_components : int or None
        Number of scores returned by ``transform``; all components if None.
    normalize : bool
        Min-max scale features with ``bounds`` before centring.
    bounds : array of shape (n_features, 2) or None
        Scaling bounds; the global impedance bounds if None.
    """

    def __init__(self, n_components=None, normalize=True, bounds=None):
        self.n_components = n_components
        self.normalize = normalize
        self.bounds = bounds

    def fit(self, X, y=None):
        self.model_ = fit_pca(X, normalize=self.normalize, bounds=self.bounds)
        self.components_ = self.model_.components.T
        self.explained_variance_ = self.model_.eigenvalues
        self.explained_variance_ratio_ = self.model_.vaf / 100.0
        self.mean_ = self.model_.feature_mean
        self.n_features_in_ = self.components_.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        k = self.n_features_in_ if self.n_components is None else self.n_components
        return project(self.model_, X, k)

    def inverse_transform(self, scores):
        check_is_fitted(self, "model_")
        return reconstruct(self.model_, scores)
