"""Feed-forward success predictor for impedance parameter sets.

The network maps the eight min-max normalised impedance values through two
ReLU layers to a sigmoid success probability. It is trained full-batch with
Adam on the binary cross-entropy.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .eda import GLOBAL_BOUNDS

BCE_EPS = 1e-12


@dataclass(frozen=True)
class MlpModel:
    """Weights ``W[l]`` have shape (fan_out, fan_in); ``feature_norm`` rows are [lo, hi]."""

    weights: tuple
    biases: tuple
    feature_norm: np.ndarray = field(default_factory=lambda: GLOBAL_BOUNDS.copy())

    def __post_init__(self):
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise ValueError("model needs three weight matrices and three bias vectors")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError("weight/bias shapes disagree")
        for w_in, w_out in zip(self.weights[:-1], self.weights[1:]):
            if w_out.shape[1] != w_in.shape[0]:
                raise ValueError("consecutive layer sizes disagree")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output layer must have one unit")
        if self.feature_norm.shape != (self.weights[0].shape[1], 2):
            raise ValueError("feature_norm must have one [lo, hi] row per input")
        if not all(np.all(np.isfinite(a)) for a in self.parameters()):
            raise ValueError("model parameters must be finite")

    @property
    def dims(self) -> tuple:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def parameters(self) -> list:
        """Flat list ``[W1, b1, W2, b2, W3, b3]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    @classmethod
    def from_parameters(cls, arrays, feature_norm) -> "MlpModel":
        arrays = [np.array(a, dtype=float) for a in arrays]
        return cls(tuple(arrays[0::2]), tuple(arrays[1::2]), np.array(feature_norm, dtype=float))


def init_model(rng=None, dims=(8, 64, 64, 1), feature_norm=None) -> MlpModel:
    """Glorot-uniform weights and zero biases."""
    rng = np.random.default_rng(rng)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    norm = GLOBAL_BOUNDS.copy() if feature_norm is None else np.array(feature_norm, dtype=float)
    return MlpModel(tuple(weights), tuple(biases), norm)


def zero_model(dims=(8, 64, 64, 1)) -> MlpModel:
    return MlpModel(tuple(np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])),
                    tuple(np.zeros(o) for o in dims[1:]))


def normalize_features(model: MlpModel, X) -> np.ndarray:
    lo, hi = model.feature_norm[:, 0], model.feature_norm[:, 1]
    return (np.asarray(X, dtype=float) - lo) / (hi - lo)


def _sigmoid(z):
    # split by sign to avoid overflow in exp
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activations(model: MlpModel, Xn):
    (W1, W2, W3), (b1, b2, b3) = model.weights, model.biases
    z1 = Xn @ W1.T + b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ W2.T + b2
    h2 = np.maximum(z2, 0.0)
    z3 = h2 @ W3.T + b3
    return z1, h1, z2, h2, _sigmoid(z3[:, 0])


def predict_proba(model: MlpModel, X) -> np.ndarray:
    """Success probability for each row of ``X`` (raw impedance values)."""
    Xn = normalize_features(model, np.atleast_2d(X))
    return _activations(model, Xn)[-1]


class Prediction(NamedTuple):
    probability: float
    # input lies outside the feature ranges the model was normalised with
    extrapolated: bool


def forward(model: MlpModel, params) -> Prediction:
    """Probability of success for one parameter set (ImpedanceParams or 8 values)."""
    x = params.as_array() if hasattr(params, "as_array") else np.asarray(params, dtype=float)
    x = x.ravel()
    if x.shape != (model.dims[0],):
        raise ValueError(f"expected {model.dims[0]} input values")
    lo, hi = model.feature_norm[:, 0], model.feature_norm[:, 1]
    extrapolated = bool(np.any((x < lo) | (x > hi)))
    return Prediction(float(predict_proba(model, x)[0]), extrapolated)


def bce(predictions, labels) -> float:
    """Total binary cross-entropy; predictions are clipped to [1e-12, 1 - 1e-12]."""
    p = np.asarray(predictions, dtype=float).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    if p.shape != y.shape:
        raise ValueError("predictions and labels must have equal lengths")
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def loss(model: MlpModel, X, y) -> float:
    return bce(predict_proba(model, X), y)


def gradients(model: MlpModel, X, y) -> list:
    """Analytic gradient of the total BCE, in the order of :meth:`MlpModel.parameters`."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    Xn = normalize_features(model, X)
    z1, h1, z2, h2, p = _activations(model, Xn)
    (W1, W2, W3) = model.weights
    d3 = (p - y)[:, None]
    gW3 = d3.T @ h2
    gb3 = d3.sum(axis=0)
    d2 = (d3 @ W3) * (z2 > 0)
    gW2 = d2.T @ h1
    gb2 = d2.sum(axis=0)
    d1 = (d2 @ W2) * (z1 > 0)
    gW1 = d1.T @ Xn
    gb1 = d1.sum(axis=0)
    return [gW1, gb1, gW2, gb2, gW3, gb3]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2**13
    learning_rate: float = 1e-4
    split: float = 0.70
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    threshold: float = 0.5

    def __post_init__(self):
        if not 0 < self.split < 1:
            raise ValueError("split must lie in (0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class AdamState:
    m: tuple
    v: tuple
    t: int = 0

    @classmethod
    def zeros_like(cls, model: MlpModel) -> "AdamState":
        zeros = tuple(np.zeros_like(a) for a in model.parameters())
        return cls(zeros, zeros, 0)


def adam_step(model: MlpModel, grads, state: AdamState, config: TrainConfig = TrainConfig()):
    """One bias-corrected Adam update; returns ``(model, state)``."""
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    new_params, new_m, new_v = [], [], []
    for theta, g, m, v in zip(model.parameters(), grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        new_params.append(theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps))
        new_m.append(m)
        new_v.append(v)
    new_model = MlpModel.from_parameters(new_params, model.feature_norm)
    return new_model, AdamState(tuple(new_m), tuple(new_v), t)


class Confusion(NamedTuple):
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / max(1, self.tp + self.tn + self.fp + self.fn)


def evaluate(model, X, y, threshold: float = 0.5):
    """Accuracy and confusion counts at ``threshold`` (probability >= threshold is positive).

    ``model`` may be an :class:`MlpModel` or any callable returning probabilities.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=bool).ravel()
    if X.shape[0] == 0:
        raise ValueError("empty evaluation set")
    prob = predict_proba(model, X) if isinstance(model, MlpModel) else np.asarray(model(X), dtype=float)
    pred = prob >= threshold
    conf = Confusion(int(np.sum(pred & y)), int(np.sum(~pred & ~y)),
                     int(np.sum(pred & ~y)), int(np.sum(~pred & y)))
    return conf.accuracy, conf


def fit_full_batch(X, y, config: TrainConfig = TrainConfig(), model: MlpModel | None = None,
                   dims=(8, 64, 64, 1), rng=None):
    """Train on all of ``(X, y)``; returns ``(model, loss_curve)``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if model is None:
        model = init_model(np.random.default_rng(config.seed if rng is None else rng), dims)
    curve = np.empty(config.epochs)
    Xn = normalize_features(model, X)
    params = [a.copy() for a in model.parameters()]
    m = [np.zeros_like(a) for a in params]
    v = [np.zeros_like(a) for a in params]
    b1, b2, lr, eps = config.beta1, config.beta2, config.learning_rate, config.eps
    # same update as adam_step, kept in place to avoid rebuilding the model each epoch
    for epoch in range(config.epochs):
        W1, b1_, W2, b2_, W3, b3_ = params
        z1 = Xn @ W1.T + b1_
        h1 = np.maximum(z1, 0.0)
        z2 = h1 @ W2.T + b2_
        h2 = np.maximum(z2, 0.0)
        p = _sigmoid((h2 @ W3.T + b3_)[:, 0])
        curve[epoch] = bce(p, y)
        d3 = (p - y)[:, None]
        d2 = (d3 @ W3) * (z2 > 0)
        d1 = (d2 @ W2) * (z1 > 0)
        grads = [d1.T @ Xn, d1.sum(axis=0), d2.T @ h1, d2.sum(axis=0), d3.T @ h2, d3.sum(axis=0)]
        t = epoch + 1
        c1 = 1.0 - b1**t
        c2 = 1.0 - b2**t
        for theta, g, mi, vi in zip(params, grads, m, v):
            mi *= b1
            mi += (1.0 - b1) * g
            vi *= b2
            vi += (1.0 - b2) * g * g
            theta -= lr * (mi / c1) / (np.sqrt(vi / c2) + eps)
    return MlpModel.from_parameters(params, model.feature_norm), curve


class TrainResult(NamedTuple):
    model: MlpModel
    train_curve: np.ndarray
    validation_accuracy: float
    confusion: Confusion
    train_index: np.ndarray
    validation_index: np.ndarray


def _xy(data, y=None):
    if y is not None:
        return np.asarray(data, dtype=float), np.asarray(y, dtype=bool)
    if isinstance(data, tuple):
        return np.asarray(data[0], dtype=float), np.asarray(data[1], dtype=bool)
    return data.X, data.y


def train(data, config: TrainConfig = TrainConfig(), y=None) -> TrainResult:
    """Seeded shuffle-split, full-batch training and validation accuracy.

    ``data`` is a dataset, an ``(X, y)`` pair, or ``X`` with ``y`` given.
    """
    X, y = _xy(data, y)
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    if np.all(y) or not np.any(y):
        raise ValueError("training data must contain both successes and failures")
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(X.shape[0])
    n_train = int(round(config.split * X.shape[0]))
    if n_train == 0 or n_train == X.shape[0]:
        raise ValueError("split leaves an empty training or validation set")
    tr, va = perm[:n_train], perm[n_train:]
    model, curve = fit_full_batch(X[tr], y[tr], config, rng=rng)
    acc, conf = evaluate(model, X[va], y[va], config.threshold)
    return TrainResult(model, curve, acc, conf, tr, va)


class SamplingExhausted(RuntimeError):
    """Raised when ``max_attempts`` draws did not yield ``n_target`` accepted sets."""

    def __init__(self, samples, attempts):
        super().__init__(f"only {len(samples)} sets accepted after {attempts} draws")
        self.samples = samples
        self.attempts = attempts


class SampleResult(NamedTuple):
    samples: np.ndarray
    acceptance_rate: float
    attempts: int


def sample_successes(model, n_target: int = 100_000, rng=None, max_attempts: int | None = None,
                     threshold: float = 0.5, bounds=None, chunk: int = 8192) -> SampleResult:
    """Rejection-sample parameter sets the model predicts to succeed.

    Candidates are drawn uniformly within ``bounds`` (the global impedance
    bounds by default). ``acceptance_rate`` is accepted over drawn, counted up
    to the draw that completed the target.
    """
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    if max_attempts is None:
        max_attempts = 1000 * n_target
    if max_attempts < n_target:
        raise ValueError("max_attempts must be >= n_target")
    bounds = GLOBAL_BOUNDS if bounds is None else np.asarray(bounds, dtype=float)
    rng = np.random.default_rng(rng)
    prob = (lambda X: predict_proba(model, X)) if isinstance(model, MlpModel) else model
    kept, n_kept, attempts = [], 0, 0
    while attempts < max_attempts:
        size = min(chunk, max_attempts - attempts)
        X = rng.uniform(bounds[:, 0], bounds[:, 1], size=(size, bounds.shape[0]))
        ok = np.flatnonzero(np.asarray(prob(X)) >= threshold)
        need = n_target - n_kept
        if ok.size >= need:
            kept.append(X[ok[:need]])
            attempts += int(ok[need - 1]) + 1
            samples = np.vstack(kept)
            return SampleResult(samples, n_target / attempts, attempts)
        kept.append(X[ok])
        n_kept += ok.size
        attempts += size
    samples = np.vstack(kept) if kept else np.zeros((0, bounds.shape[0]))
    raise SamplingExhausted(samples, attempts)


class PegModel(NamedTuple):
    peg: str
    result: TrainResult
    acceptance_rate: float


def train_per_peg(datasets: dict, config: TrainConfig = TrainConfig(), n_target: int = 10_000,
                  rng=None) -> dict:
    """Train one model per peg and measure its predicted success rate."""
    seeds = np.random.SeedSequence(np.random.default_rng(rng).integers(2**63)).spawn(len(datasets))
    out = {}
    for (peg, data), seed in zip(datasets.items(), seeds):
        res = train(data, config)
        try:
            rate = sample_successes(res.model, n_target, np.random.default_rng(seed),
                                    threshold=config.threshold).acceptance_rate
        except SamplingExhausted:
            rate = 0.0
        out[peg] = PegModel(peg, res, rate)
    return out


class ImpedanceClassifier(ClassifierMixin, BaseEstimator):
    """Estimator interface to the success predictor.

    ``fit`` trains on all supplied rows; use :func:`train` for the
    shuffle-split protocol with a held-out validation set.

    Parameters
    ----------
    hidden : tuple of two ints
    epochs : int
    learning_rate : float
    threshold : float
        Probability at or above which ``predict`` returns True.
    feature_norm : array of shape (n_features, 2) or None
        Min-max ranges for input scaling; global impedance bounds if None.
    random_state : int or None
    """

    def __init__(self, hidden=(64, 64), epochs=2**13, learning_rate=1e-4, threshold=0.5,
                 feature_norm=None, random_state=0):
        self.hidden = hidden
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.threshold = threshold
        self.feature_norm = feature_norm
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.array([False, True])
        y = np.asarray(y).astype(bool)
        config = TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate,
                             seed=0 if self.random_state is None else self.random_state,
                             threshold=self.threshold)
        dims = (X.shape[1],) + tuple(self.hidden) + (1,)
        init = init_model(config.seed, dims, self.feature_norm if self.feature_norm is not None
                          else GLOBAL_BOUNDS if X.shape[1] == 8 else np.c_[X.min(0), X.max(0)])
        self.model_, self.loss_curve_ = fit_full_batch(X, y, config, model=init)
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        p = predict_proba(self.model_, check_array(X))
        return np.c_[1.0 - p, p]

    def predict(self, X):
        return self.predict_proba(X)[:, 1] >= self.threshold


__all__ = [
    "MlpModel", "TrainConfig", "AdamState", "Confusion", "TrainResult", "Prediction",
    "SampleResult", "SamplingExhausted", "PegModel", "ImpedanceClassifier", "init_model",
    "zero_model", "forward", "predict_proba", "bce", "loss", "gradients", "adam_step",
    "evaluate", "fit_full_batch", "train", "sample_successes", "train_per_peg",
]
