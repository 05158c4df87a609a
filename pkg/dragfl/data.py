"""
Synthetic data and heterogeneous partitioning
---------------------------------------------
- Gaussian-mixture classification data as a desk-scale stand-in for image
  benchmarks, plus a loader for a plain CSV example format.
- Label-skew partitioning: an example with label l goes to client l mod M
  with probability q, to each other client with probability (1-q)/(M-1).
- Root-dataset extraction for the server and i.i.d. mini-batch draws.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import ConfigError, DimensionError, EmptyInputError
from .models import Batch, Example

logger = logging.getLogger(__name__)

# tolerance on the q >= 1/M bound, so q = 1/M written as a decimal passes
_Q_SLACK = 1e-9


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise DimensionError("dataset needs 2-D features and 1-D labels")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DimensionError("feature rows and labels differ in count")
        if self.labels.shape[0] == 0:
            raise EmptyInputError("dataset is empty")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ConfigError("data.num_classes", f"labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __getitem__(self, i: int) -> Example:
        return Example(self.features[i], int(self.labels[i]))

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def examples(self) -> list[Example]:
        return [self[i] for i in range(len(self))]

    def subset(self, indices: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)

    def as_batch(self) -> Batch:
        return Batch(self.features, self.labels)


@dataclass(frozen=True)
class Partition:
    """``shards[m]`` holds the sorted example indices owned by client m."""

    shards: tuple[np.ndarray, ...]

    @property
    def num_clients(self) -> int:
        return len(self.shards)

    def sizes(self) -> list[int]:
        return [int(s.shape[0]) for s in self.shards]


@dataclass(frozen=True)
class RootDataset:
    dataset: Dataset
    indices: np.ndarray

    @property
    def size(self) -> int:
        return len(self.dataset)

    # same columns as Dataset, so models and draw_batch accept it directly
    @property
    def features(self) -> np.ndarray:
        return self.dataset.features

    @property
    def labels(self) -> np.ndarray:
        return self.dataset.labels

    def __len__(self) -> int:
        return len(self.dataset)


def gen_gaussian_mixture(K: int, per_class: int, dim: int, separation: float, seed: int,
                         noise_seed: Optional[int] = None) -> Dataset:
    """K isotropic unit-variance blobs whose closest pair of centers is ``separation`` apart.

    Centers are standard-normal draws rescaled so the minimum pairwise
    distance equals ``separation``; examples are ordered class by class.
    With ``noise_seed`` the centers still come from ``seed`` but the samples
    around them are drawn from a separate stream, which is how a held-out
    test set of the same mixture is made.
    """
    if K < 2:
        raise ConfigError("data.num_classes", f"need at least 2 classes, got {K}")
    if per_class < 1:
        raise ConfigError("data.per_class", f"must be >= 1, got {per_class}")
    if dim < 1:
        raise ConfigError("data.dim", f"must be >= 1, got {dim}")
    if separation <= 0:
        raise ConfigError("data.separation", f"must be > 0, got {separation}")

    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((K, dim))
    gaps = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    closest = gaps[np.triu_indices(K, k=1)].min()
    centers *= separation / closest

    labels = np.repeat(np.arange(K, dtype=np.int64), per_class)
    noise_rng = rng if noise_seed is None else np.random.default_rng(noise_seed)
    features = centers[labels] + noise_rng.standard_normal((K * per_class, dim))
    return Dataset(features, labels, K)


def load_csv_dataset(path: Union[str, Path], num_classes: Optional[int] = None) -> Dataset:
    """Read ``f0,...,f{d-1},label`` rows (header required, UTF-8)."""
    df = pd.read_csv(path, encoding="utf-8")
    cols = list(df.columns)
    if not cols or cols[-1] != "label":
        raise ConfigError("data.train_csv", f"{path}: last column must be 'label', got {cols[-1:]}")
    expected = [f"f{i}" for i in range(len(cols) - 1)]
    if cols[:-1] != expected or not expected:
        raise ConfigError("data.train_csv", f"{path}: feature columns must be f0..f{len(cols) - 2}")
    if not pd.api.types.is_integer_dtype(df["label"]):
        raise ConfigError("data.train_csv", f"{path}: labels must be base-10 integers")

    labels = df["label"].to_numpy(dtype=np.int64)
    features = df[expected].to_numpy(dtype=np.float64)
    k = num_classes if num_classes is not None else int(labels.max()) + 1
    return Dataset(features, labels, k)


def partition_label_skew(ds: Dataset, M: int, q: float, seed: int) -> Partition:
    if M < 1:
        raise ConfigError("M", f"must be >= 1, got {M}")
    if not (1.0 / M - _Q_SLACK <= q <= 1.0):
        raise ConfigError("q", f"must lie in [1/M, 1] = [{1.0 / M:.6g}, 1], got {q}")

    n = len(ds)
    if M == 1:
        return Partition((np.arange(n, dtype=np.int64),))

    rng = np.random.default_rng(seed)
    home = ds.labels % M
    stay = rng.random(n) < q
    # uniform over the M-1 clients other than home
    other = rng.integers(0, M - 1, size=n)
    other = other + (other >= home)
    owner = np.where(stay, home, other)

    shards = [np.flatnonzero(owner == m) for m in range(M)]
    _repair_empty(shards, home)
    return Partition(tuple(np.sort(s) for s in shards))


def _repair_empty(shards: list[np.ndarray], home: np.ndarray) -> None:
    for m, shard in enumerate(shards):
        if shard.size:
            continue
        donor, idx = None, None
        # prefer an example whose home client is m, taken from a shard that can spare it
        for j, other in enumerate(shards):
            if other.size < 2:
                continue
            match = other[home[other] == m]
            if match.size:
                donor, idx = j, int(match[0])
                break
        if donor is None:
            donor = int(np.argmax([s.size for s in shards]))
            if shards[donor].size < 2:
                raise EmptyInputError(f"not enough examples to give client {m} a shard")
            idx = int(shards[donor][0])
        shards[donor] = shards[donor][shards[donor] != idx]
        shards[m] = np.array([idx], dtype=np.int64)
        logger.debug("client %d had an empty shard; moved example %d from client %d", m, idx, donor)


def sample_root(ds: Dataset, n_root: int, seed: int) -> RootDataset:
    if not 1 <= n_root <= len(ds):
        raise ConfigError("n_root", f"must lie in [1, {len(ds)}], got {n_root}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(ds), size=n_root, replace=False)
    return RootDataset(ds.subset(idx), idx)


def draw_batch(shard: Union[Dataset, RootDataset, Sequence[Example]], B: int, rng: np.random.Generator) -> Batch:
    """B examples drawn uniformly with replacement; advances ``rng``."""
    if B < 1:
        raise ConfigError("B", f"batch size must be >= 1, got {B}")
    if isinstance(shard, (Dataset, RootDataset)):
        n = len(shard)
        idx = rng.integers(0, n, size=B)
        return Batch(shard.features[idx], shard.labels[idx])
    if len(shard) == 0:
        raise EmptyInputError("cannot draw a batch from an empty shard")
    idx = rng.integers(0, len(shard), size=B)
    return Batch.from_examples([shard[i] for i in idx])
