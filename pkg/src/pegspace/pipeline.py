"""Analysis stages shared by the command-line interface."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import ManovaReport, manova, optimal_k
from .eda import GLOBAL_BOUNDS, PARAM_NAMES
from .pca import fit_pca, project, subset_slope_test
from .predictor import SampleResult, TrainConfig, TrainResult, sample_successes, train
from .sim import SHAPES
from .stats import LinFit, bin_success_rate, histogram_fit
from .sweep import Dataset, success_rate

# stream identifiers mixed into the master seed
_STREAM = {"slope": 1, "cluster": 2, "train": 3, "sample": 4, "vaf": 5}


def stream_rng(master_seed: int, stream: str, tag: str = "") -> np.random.Generator:
    key = SHAPES.index(tag) if tag in SHAPES else sum(tag.encode()) + 100
    return np.random.default_rng([int(master_seed), _STREAM[stream], key])


@dataclass
class ClusterTable:
    pegs: list
    index: np.ndarray
    labels: np.ndarray
    scores: np.ndarray
    k: int
    sc: float
    sc_by_k: dict


@dataclass
class AnalysisReport:
    master_seed: int
    options: dict
    success: dict = field(default_factory=dict)
    histograms: dict = field(default_factory=dict)
    linfits: dict = field(default_factory=dict)
    scores: dict = field(default_factory=dict)
    vaf: dict = field(default_factory=dict)
    clusters: ClusterTable | None = None
    manova: ManovaReport | None = None
    predicted: dict = field(default_factory=dict)


DEFAULT_OPTIONS = {
    "normalize": True,
    "n_bins": 10,
    "k_min": 2,
    "k_max": 10,
    "slope_pairs": 100,
    "slope_method": "paired_t",
    "cluster_normalize": False,
}

_NAN_FIT = LinFit(math.nan, math.nan, math.nan, math.nan, 0)


def _scaled(X, normalize):
    if not normalize:
        return X
    return (X - GLOBAL_BOUNDS[:, 0]) / (GLOBAL_BOUNDS[:, 1] - GLOBAL_BOUNDS[:, 0])


def analyze(datasets: dict, master_seed: int = 0, options: dict | None = None, log=None) -> AnalysisReport:
    """Success rates, binned fits, PCA, slope tests, clustering and MANOVA."""
    opts = dict(DEFAULT_OPTIONS, **(options or {}))
    report = AnalysisReport(int(master_seed), opts)
    log = log or (lambda msg: None)
    for peg, data in datasets.items():
        X, y = data.X, data.y
        report.success[peg] = (int(y.sum()), len(y), success_rate(y))
        hists = [bin_success_rate((X, y), name, opts["n_bins"]) for name in PARAM_NAMES]
        report.histograms[peg] = hists
        fits = {}
        for h in hists:
            try:
                fits[h.param] = histogram_fit(h)
            except ValueError:
                fits[h.param] = _NAN_FIT
        report.linfits[peg] = fits
        n_succ = int(y.sum())
        if n_succ >= 3:
            model = fit_pca(X[y], normalize=opts["normalize"])
            index = np.array([r.trial_index for r in data.records])
            report.scores[peg] = (index, project(model, X, 3), y)
            log(f"{peg}: slope test on {n_succ} successes")
            test = subset_slope_test(X, X[y], M=opts["slope_pairs"], rng=stream_rng(master_seed, "slope", peg),
                                     normalize=opts["normalize"], method=opts["slope_method"])
            rng = stream_rng(master_seed, "vaf", peg)
            random_model = fit_pca(X[rng.choice(len(X), n_succ, replace=False)], normalize=opts["normalize"])
            report.vaf[peg] = {
                "success_vaf": model.vaf, "random_vaf": random_model.vaf,
                "success_slope": test.mean_success_slope, "random_slope": test.mean_random_slope,
                "t": test.t, "p": test.p,
            }
    pegs, index, rows = [], [], []
    for peg, data in datasets.items():
        for r in data.records:
            if r.success:
                pegs.append(peg)
                index.append(r.trial_index)
                rows.append(r.params.as_array())
    if rows:
        S = np.array(rows)
        ks = range(opts["k_min"], min(opts["k_max"], len(S) - 1) + 1)
        if len(ks) > 0:
            log(f"clustering {len(S)} successful sets")
            Z = _scaled(S, opts["cluster_normalize"])
            best = optimal_k(Z, ks, rng=stream_rng(master_seed, "cluster"))
            labels = best.results[best.k].assignments
            scores = project(fit_pca(S, normalize=opts["normalize"]), S, 3)
            report.clusters = ClusterTable(pegs, np.array(index), labels, scores, best.k, best.sc, best.sc_by_k)
            sizes = np.bincount(labels)
            if sizes.min() >= 2 and len(S) > S.shape[1] + best.k:
                report.manova = manova(Z, labels)
    return report


def train_models(datasets: dict, master_seed: int = 0, config: TrainConfig = TrainConfig(),
                 log=None) -> dict:
    """One model per peg plus one on all pegs combined (tag ``all``)."""
    log = log or (lambda msg: None)
    out = {}
    tagged = dict(datasets)
    if len(datasets) > 1:
        tagged["all"] = Dataset([r for d in datasets.values() for r in d.records])
    for tag, data in tagged.items():
        seed = int(stream_rng(master_seed, "train", tag).integers(2**31))
        cfg = TrainConfig(**{**config.__dict__, "seed": seed})
        log(f"training {tag} on {len(data)} trials")
        try:
            out[tag] = (train(data, cfg), cfg)
        except ValueError as exc:
            log(f"skipping {tag}: {exc}")
    return out


def sample_model(model, tag: str, n: int, master_seed: int = 0, threshold: float = 0.5,
                 max_attempts: int | None = None) -> SampleResult:
    return sample_successes(model, n, stream_rng(master_seed, "sample", tag),
                            max_attempts=max_attempts, threshold=threshold)


def predicted_histograms(samples: np.ndarray, n_bins: int = 10) -> list:
    y = np.ones(len(samples), dtype=bool)
    return [bin_success_rate((samples, y), name, n_bins) for name in PARAM_NAMES]


__all__ = ["AnalysisReport", "ClusterTable", "DEFAULT_OPTIONS", "analyze", "train_models",
           "sample_model", "predicted_histograms", "stream_rng", "TrainResult"]
