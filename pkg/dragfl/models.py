"""
Toy predictors
--------------
Multinomial logistic regression and a one-hidden-layer tanh perceptron over
flat parameter vectors, with mean cross-entropy loss, its analytic gradient
and a central finite-difference oracle for checking that gradient.

Parameter layout (row-major blocks, concatenated):
- logistic: W (input_dim x K), b (K)
- mlp:      W1 (input_dim x H), b1 (H), W2 (H x K), b2 (K)
"""

from dataclasses import dataclass
from typing import Literal, Sequence, Union

import numpy as np

from . import vecmath
from .errors import ConfigError, DimensionError, EmptyInputError
from .vecmath import ParamVector

ModelKind = Literal["logistic", "mlp"]


@dataclass(frozen=True)
class Example:
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Batch:
    """Column-wise examples: ``features`` is (n, dim), ``labels`` is (n,)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise DimensionError("batch needs 2-D features and 1-D labels")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DimensionError(
                f"{self.features.shape[0]} feature rows vs {self.labels.shape[0]} labels"
            )

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @classmethod
    def from_examples(cls, examples: Sequence[Example]) -> "Batch":
        if len(examples) == 0:
            raise EmptyInputError("empty batch")
        features = np.stack([np.asarray(e.features, dtype=np.float64) for e in examples])
        labels = np.array([int(e.label) for e in examples], dtype=np.int64)
        return cls(features, labels)


BatchLike = Union[Batch, Sequence[Example]]


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    input_dim: int
    num_classes: int
    hidden_units: int = 0

    def __post_init__(self):
        if self.kind not in ("logistic", "mlp"):
            raise ConfigError("model.kind", f"unknown model kind {self.kind!r}")
        if self.input_dim < 1:
            raise ConfigError("model.input_dim", f"must be positive, got {self.input_dim}")
        if self.num_classes < 1:
            raise ConfigError("model.num_classes", f"must be positive, got {self.num_classes}")
        if self.kind == "mlp" and self.hidden_units < 1:
            raise ConfigError("model.hidden_units", f"mlp needs hidden_units >= 1, got {self.hidden_units}")

    @property
    def param_dim(self) -> int:
        d, k, h = self.input_dim, self.num_classes, self.hidden_units
        if self.kind == "logistic":
            return d * k + k
        return d * h + h + h * k + k

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "input_dim": self.input_dim, "num_classes": self.num_classes}
        if self.kind == "mlp":
            out["hidden_units"] = self.hidden_units
        return out


def _as_batch(batch: BatchLike) -> Batch:
    if isinstance(batch, Batch):
        out = batch
    elif hasattr(batch, "features") and hasattr(batch, "labels"):
        # Dataset and RootDataset expose the same columns
        out = Batch(np.asarray(batch.features), np.asarray(batch.labels))
    else:
        out = Batch.from_examples(list(batch))
    if len(out) == 0:
        raise EmptyInputError("empty batch")
    return out


def _unpack(spec: ModelSpec, theta: ParamVector):
    if theta.shape != (spec.param_dim,):
        raise DimensionError(f"{spec.kind} model expects {spec.param_dim} parameters, got {theta.shape[0]}")
    d, k, h = spec.input_dim, spec.num_classes, spec.hidden_units
    if spec.kind == "logistic":
        return theta[: d * k].reshape(d, k), theta[d * k:]
    o = 0
    w1 = theta[o:o + d * h].reshape(d, h)
    o += d * h
    b1 = theta[o:o + h]
    o += h
    w2 = theta[o:o + h * k].reshape(h, k)
    o += h * k
    b2 = theta[o:]
    return w1, b1, w2, b2


def _check_features(spec: ModelSpec, batch: Batch) -> None:
    if batch.features.shape[1] != spec.input_dim:
        raise DimensionError(f"model expects {spec.input_dim} features, batch has {batch.features.shape[1]}")


def _forward(spec: ModelSpec, theta: ParamVector, x: np.ndarray):
    """Return (logits, hidden activations or None)."""
    if spec.kind == "logistic":
        w, b = _unpack(spec, theta)
        return x @ w + b, None
    w1, b1, w2, b2 = _unpack(spec, theta)
    hidden = np.tanh(x @ w1 + b1)
    return hidden @ w2 + b2, hidden


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def init_params(spec: ModelSpec, seed: int) -> ParamVector:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer, biases included."""
    rng = np.random.default_rng(seed)
    if spec.kind == "logistic":
        bound = 1.0 / np.sqrt(spec.input_dim)
        return rng.uniform(-bound, bound, spec.param_dim)
    d, k, h = spec.input_dim, spec.num_classes, spec.hidden_units
    b_in, b_hid = 1.0 / np.sqrt(d), 1.0 / np.sqrt(h)
    return np.concatenate([
        rng.uniform(-b_in, b_in, d * h + h),
        rng.uniform(-b_hid, b_hid, h * k + k),
    ])


def loss(spec: ModelSpec, theta: ParamVector, batch: BatchLike) -> float:
    """Mean cross-entropy of the softmax predictions over ``batch``."""
    b = _as_batch(batch)
    _check_features(spec, b)
    logits, _ = _forward(spec, theta, b.features)
    logp = _log_softmax(logits)
    return float(-logp[np.arange(len(b)), b.labels].mean())


def grad(spec: ModelSpec, theta: ParamVector, batch: BatchLike) -> ParamVector:
    """Mean cross-entropy gradient over ``batch``, laid out like ``theta``."""
    b = _as_batch(batch)
    _check_features(spec, b)
    n = len(b)
    x = b.features
    logits, hidden = _forward(spec, theta, x)
    delta = np.exp(_log_softmax(logits))
    delta[np.arange(n), b.labels] -= 1.0
    delta /= n

    if spec.kind == "logistic":
        return vecmath.as_vector(np.concatenate([(x.T @ delta).ravel(), delta.sum(axis=0)]))

    _, _, w2, _ = _unpack(spec, theta)
    d_hidden = (delta @ w2.T) * (1.0 - hidden ** 2)
    return vecmath.as_vector(np.concatenate([
        (x.T @ d_hidden).ravel(),
        d_hidden.sum(axis=0),
        (hidden.T @ delta).ravel(),
        delta.sum(axis=0),
    ]))


def predict(spec: ModelSpec, theta: ParamVector, batch: BatchLike) -> np.ndarray:
    """Argmax class per example; ``np.argmax`` keeps the lowest index on ties."""
    b = _as_batch(batch)
    _check_features(spec, b)
    logits, _ = _forward(spec, theta, b.features)
    return np.argmax(logits, axis=1)


def accuracy(spec: ModelSpec, theta: ParamVector, dataset: BatchLike) -> float:
    b = _as_batch(dataset)
    return float(np.mean(predict(spec, theta, b) == b.labels))


def fd_gradient_check(spec: ModelSpec, theta: ParamVector, batch: BatchLike, h: float = 1e-5) -> float:
    """Largest per-coordinate relative gap between ``grad`` and central differences.

    The gap is ``|a - n| / max(1, |a|, |n|)`` so coordinates whose gradient is
    near zero are compared absolutely.
    """
    if h <= 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    b = _as_batch(batch)
    analytic = grad(spec, theta, b)
    numeric = np.empty_like(analytic)
    probe = theta.copy()
    for i in range(theta.shape[0]):
        probe[i] = theta[i] + h
        f_plus = loss(spec, probe, b)
        probe[i] = theta[i] - h
        f_minus = loss(spec, probe, b)
        probe[i] = theta[i]
        numeric[i] = (f_plus - f_minus) / (2.0 * h)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))
