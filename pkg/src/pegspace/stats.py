"""Binned success rates, least-squares fits and t-tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .eda import GLOBAL_BOUNDS, PARAM_NAMES


@dataclass(frozen=True)
class LinFit:
    slope: float
    intercept: float
    r_squared: float
    p_value: float
    n: int
    slope_stderr: float = math.nan


@dataclass(frozen=True)
class Histogram:
    """Success rate per equally spaced bin of one parameter.

    ``rates`` is NaN where ``empty`` is set.
    """

    param: str
    edges: np.ndarray
    rates: np.ndarray
    counts: np.ndarray
    successes: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def empty(self) -> np.ndarray:
        return self.counts == 0


def special_cdf(kind: str, x, df):
    """CDF of Student's t (``"t"``) or chi-square (``"chi2"``) with ``df`` degrees of freedom."""
    if not np.all(np.asarray(df, dtype=float) >= 1):
        raise ValueError("degrees of freedom must be >= 1")
    x = np.asarray(x, dtype=float)
    if kind == "t":
        out = special.stdtr(df, x)
    elif kind == "chi2":
        out = np.where(x > 0, special.chdtr(df, np.maximum(x, 0.0)), 0.0)
    else:
        raise ValueError(f"unknown distribution {kind!r}")
    return float(out) if np.ndim(out) == 0 else out


def special_sf(kind: str, x, df):
    """Upper tail ``1 - special_cdf(kind, x, df)`` without cancellation."""
    if not np.all(np.asarray(df, dtype=float) >= 1):
        raise ValueError("degrees of freedom must be >= 1")
    x = np.asarray(x, dtype=float)
    if kind == "t":
        out = special.stdtr(df, -x)
    elif kind == "chi2":
        out = np.where(x > 0, special.chdtrc(df, np.maximum(x, 0.0)), 1.0)
    else:
        raise ValueError(f"unknown distribution {kind!r}")
    return float(out) if np.ndim(out) == 0 else out


def _xy(data, param):
    if isinstance(data, tuple):
        X, y = data
    else:
        X, y = data.X, data.y
    return np.asarray(X, dtype=float), np.asarray(y, dtype=bool)


def bin_success_rate(data, param: str, n_bins: int = 10, bounds=None) -> Histogram:
    """Histogram of success rate (percent) over ``param``.

    ``data`` is a dataset or an ``(X, y)`` pair. Bins split the parameter's
    global range evenly; values on the upper bound fall in the last bin.
    """
    if param not in PARAM_NAMES:
        raise ValueError(f"unknown parameter {param!r}")
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    X, y = _xy(data, param)
    j = PARAM_NAMES.index(param)
    lo, hi = (GLOBAL_BOUNDS[j] if bounds is None else bounds)
    edges = np.linspace(lo, hi, n_bins + 1)
    which = np.clip(np.searchsorted(edges, X[:, j], side="right") - 1, 0, n_bins - 1) \
        if len(X) else np.zeros(0, dtype=int)
    counts = np.bincount(which, minlength=n_bins)
    succ = np.bincount(which, weights=y.astype(float), minlength=n_bins).astype(int)
    with np.errstate(invalid="ignore", divide="ignore"):
        rates = np.where(counts > 0, 100.0 * succ / counts, np.nan)
    return Histogram(param, edges, rates, counts, succ)


def linfit(x, y) -> LinFit:
    """Ordinary least squares ``y = slope*x + intercept`` with a two-sided slope test."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have equal lengths")
    n = x.size
    if n < 3:
        raise ValueError("need at least three points")
    xc = x - x.mean()
    sxx = xc @ xc
    if not sxx > 0:
        raise ValueError("x has zero variance")
    slope = float(xc @ (y - y.mean()) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    sse = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 0.0 if sst == 0 else min(1.0, max(0.0, 1.0 - sse / sst))
    dof = n - 2
    se = math.sqrt(sse / dof / sxx)
    if se == 0:
        p = 1.0 if slope == 0 else 0.0
    else:
        p = float(2.0 * special_cdf("t", -abs(slope / se), dof))
    return LinFit(slope, intercept, r2, min(1.0, p), n, se)


def histogram_fit(hist: Histogram) -> LinFit:
    """Line through the non-empty bins of ``hist`` (rate against bin centre)."""
    keep = ~hist.empty
    return linfit(hist.centers[keep], hist.rates[keep])


def paired_t_test(a, b, one_sided: bool = False):
    """Paired t-test on ``a - b`` with ``n - 1`` degrees of freedom.

    The one-sided alternative is ``mean(a - b) < 0``. Returns ``(t, p)``.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("samples must have equal lengths")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0:
        t = 0.0 if mean == 0 else math.copysign(math.inf, mean)
    else:
        t = float(mean / (sd / math.sqrt(n)))
    if one_sided:
        p = float(special_cdf("t", t, n - 1))
    else:
        p = float(min(1.0, 2.0 * special_cdf("t", -abs(t), n - 1)))
    return t, p
