"""
Round orchestration
-------------------
One round: the server broadcasts theta to S sampled clients, each runs U
local SGD steps on its own shard and returns its model delta, attackers
scale theirs, and the server folds the deltas into theta with the chosen
aggregator (``fedavg``, ``drag`` or ``drag_byzantine``).

Every random stream is derived from ``(seed, stream, round, client)`` so the
outcome does not depend on participation order or on how many worker threads
run the clients. Client results are reduced in ascending client-id order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np

from . import attacks, data, drag_core, models, vecmath
from .attacks import AttackConfig
from .data import Dataset, RootDataset
from .drag_core import DragConfig, ReferenceState
from .errors import ConfigError, EmptyInputError, ReferenceStateError
from .models import ModelSpec
from .vecmath import EPS, ParamVector

logger = logging.getLogger(__name__)

Aggregator = Literal["fedavg", "drag", "drag_byzantine"]
AGGREGATORS = ("fedavg", "drag", "drag_byzantine")

# stream tags for SeedSequence entropy
_TRAIN_DATA, _TEST_DATA, _PARTITION, _ROOT_SAMPLE, _INIT = 0, 1, 2, 3, 4
_PARTICIPANTS, _CLIENT, _ROOT_SGD, _ATTACKERS, _SCALARS = 10, 11, 12, 13, 14

# closed-form check tolerance when verify_closed_form is on
_CLOSED_FORM_RTOL = 1e-8


@dataclass(frozen=True)
class DataConfig:
    num_classes: int = 10
    per_class: int = 200
    dim: int = 20
    separation: float = 4.0
    test_per_class: int = 100
    train_csv: Optional[str] = None
    test_csv: Optional[str] = None

    def __post_init__(self):
        if self.train_csv is None:
            if self.num_classes < 2:
                raise ConfigError("data.num_classes", f"need at least 2 classes, got {self.num_classes}")
            if self.per_class < 1:
                raise ConfigError("data.per_class", f"must be >= 1, got {self.per_class}")
            if self.dim < 1:
                raise ConfigError("data.dim", f"must be >= 1, got {self.dim}")
            if self.separation <= 0:
                raise ConfigError("data.separation", f"must be > 0, got {self.separation}")
        if self.test_csv is None and self.test_per_class < 1:
            raise ConfigError("data.test_per_class", f"must be >= 1, got {self.test_per_class}")


@dataclass(frozen=True)
class ExperimentConfig:
    M: int
    S: int
    B: int
    T_max: int
    q: float
    model: ModelSpec
    aggregator: Aggregator = "drag"
    U: int = 5
    eta: float = 0.1
    target_accuracy: Optional[float] = None
    drag: DragConfig = DragConfig()
    attack: Optional[AttackConfig] = None
    n_root: Optional[int] = None
    seed: int = 0
    data: DataConfig = DataConfig()
    workers: int = 1
    verify_closed_form: bool = False

    def __post_init__(self):
        if self.M < 1:
            raise ConfigError("M", f"must be >= 1, got {self.M}")
        if not 1 <= self.S <= self.M:
            raise ConfigError("S", f"must lie in [1, M={self.M}], got {self.S}")
        if self.U < 1:
            raise ConfigError("U", f"must be >= 1, got {self.U}")
        if self.B < 1:
            raise ConfigError("B", f"must be >= 1, got {self.B}")
        if not self.eta > 0:
            raise ConfigError("eta", f"must be > 0, got {self.eta}")
        if self.T_max < 0:
            raise ConfigError("T_max", f"must be >= 0, got {self.T_max}")
        if self.target_accuracy is not None and not 0.0 <= self.target_accuracy <= 1.0:
            raise ConfigError("target_accuracy", f"must lie in [0, 1], got {self.target_accuracy}")
        if self.aggregator not in AGGREGATORS:
            raise ConfigError("aggregator", f"expected one of {', '.join(AGGREGATORS)}, got {self.aggregator!r}")
        if not 1.0 / self.M - 1e-9 <= self.q <= 1.0:
            raise ConfigError("q", f"must lie in [1/M, 1] = [{1.0 / self.M:.6g}, 1], got {self.q}")
        if self.aggregator == "drag_byzantine" and self.n_root is None:
            raise ConfigError("n_root", "drag_byzantine needs a root dataset size")
        if self.n_root is not None and self.n_root < 1:
            raise ConfigError("n_root", f"must be >= 1, got {self.n_root}")
        if self.attack is not None and self.attack.num_attackers > self.S:
            raise ConfigError("attack.num_attackers",
                              f"{self.attack.num_attackers} attackers exceed S={self.S} participants")
        if self.workers < 1:
            raise ConfigError("workers", f"must be >= 1, got {self.workers}")
        if self.data.train_csv is None:
            if self.model.num_classes != self.data.num_classes:
                raise ConfigError("model.num_classes",
                                  f"{self.model.num_classes} != data.num_classes {self.data.num_classes}")
            if self.model.input_dim != self.data.dim:
                raise ConfigError("model.input_dim", f"{self.model.input_dim} != data.dim {self.data.dim}")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (ModelSpec, AttackConfig)):
                value = value.to_dict()
            elif isinstance(value, (DragConfig, DataConfig)):
                value = {g.name: getattr(value, g.name) for g in fields(value)}
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        for key in ("M", "S", "B", "T_max", "q", "model"):
            if key not in raw:
                raise ConfigError(key, "required but missing")
        kwargs = dict(raw)
        kwargs["model"] = _build(ModelSpec, raw["model"], "model")
        if "drag" in raw:
            kwargs["drag"] = _build(DragConfig, raw["drag"], "drag")
        if "data" in raw:
            kwargs["data"] = _build(DataConfig, raw["data"], "data")
        if raw.get("attack") is not None:
            if not isinstance(raw["attack"], dict):
                raise ConfigError("attack", "must be an object")
            att = dict(raw["attack"])
            if "scalar_mode" in att:
                if not isinstance(att["scalar_mode"], dict):
                    raise ConfigError("attack.scalar_mode", "must be an object")
                att["scalar_mode"] = attacks.scalar_mode_from_dict(att["scalar_mode"])
            kwargs["attack"] = _build(AttackConfig, att, "attack")
        _check_types(kwargs)
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise ConfigError("config", str(e)) from e


def _build(kind, raw: Any, prefix: str):
    if not isinstance(raw, dict):
        raise ConfigError(prefix, "must be an object")
    known = {f.name for f in fields(kind)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{prefix}.{key}", "unknown configuration key")
    try:
        return kind(**raw)
    except TypeError as e:
        raise ConfigError(prefix, str(e)) from e


_INT_FIELDS = ("M", "S", "U", "B", "T_max", "seed", "workers")
_REAL_FIELDS = ("eta", "q")


def _check_types(kwargs: dict) -> None:
    for key in _INT_FIELDS:
        if key in kwargs and (isinstance(kwargs[key], bool) or not isinstance(kwargs[key], int)):
            raise ConfigError(key, f"must be an integer, got {kwargs[key]!r}")
    for key in _REAL_FIELDS:
        if key in kwargs and (isinstance(kwargs[key], bool) or not isinstance(kwargs[key], (int, float))):
            raise ConfigError(key, f"must be a number, got {kwargs[key]!r}")
    target = kwargs.get("target_accuracy")
    if target is not None and (isinstance(target, bool) or not isinstance(target, (int, float))):
        raise ConfigError("target_accuracy", f"must be a number or null, got {target!r}")
    n_root = kwargs.get("n_root")
    if n_root is not None and (isinstance(n_root, bool) or not isinstance(n_root, int)):
        raise ConfigError("n_root", f"must be an integer, got {n_root!r}")


@dataclass(frozen=True, eq=False)
class ClientUpdate:
    client_id: int
    g: ParamVector
    attacked: bool = False


@dataclass(frozen=True)
class RoundRecord:
    round: int
    train_loss: float
    test_accuracy: float
    global_grad_norm_sq: float
    mean_lambda: Optional[float]
    max_lambda: Optional[float]
    participants: tuple[int, ...]
    attackers: tuple[int, ...]
    attack_scalars: dict = field(default_factory=dict)
    degenerate_count: int = 0
    degenerate_reference: bool = False


@dataclass(eq=False)
class ExperimentState:
    config: ExperimentConfig
    train: Dataset
    test: Dataset
    shards: list[Dataset]
    theta: ParamVector
    root: Optional[RootDataset] = None
    reference: Optional[ReferenceState] = None
    round: int = 0
    pinned_attackers: Optional[frozenset[int]] = None
    pinned_scalars: dict[int, float] = field(default_factory=dict)


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(e) for e in entropy]))


def _derived_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def client_rng(seed: int, round_index: int, client_id: int) -> np.random.Generator:
    """Generator for one client's local SGD in one round."""
    return _rng(seed, _CLIENT, round_index, client_id)


def _local_steps(spec: ModelSpec, theta: ParamVector, shard, U: int, B: int, eta: float,
                 rng: np.random.Generator) -> ParamVector:
    if len(shard) == 0:
        raise EmptyInputError("local training on an empty shard")
    current = theta.copy()
    for _ in range(U):
        batch = data.draw_batch(shard, B, rng)
        current = vecmath.axpy(current, -eta, models.grad(spec, current, batch))
    return vecmath.axpy(current, -1.0, theta)


def local_sgd(spec: ModelSpec, theta: ParamVector, shard, U: int, B: int, eta: float,
              rng: np.random.Generator, client_id: int = 0) -> ClientUpdate:
    """U mini-batch SGD steps from ``theta``; returns the model delta."""
    if U < 1 or B < 1:
        raise ConfigError("U" if U < 1 else "B", "must be >= 1")
    return ClientUpdate(client_id=client_id, g=_local_steps(spec, theta, shard, U, B, eta, rng))


def sample_participants(M: int, S: int, rng: np.random.Generator) -> list[int]:
    if S > M:
        raise ConfigError("S", f"cannot sample {S} participants from {M} clients")
    return [int(i) for i in rng.choice(M, size=S, replace=False)]


def compute_root_reference(spec: ModelSpec, theta: ParamVector, root: Optional[RootDataset],
                           U: int, B: int, eta: float, rng: np.random.Generator) -> ParamVector:
    """Server-side trusted direction: the delta of U SGD steps on the root dataset."""
    if root is None or len(root) == 0:
        raise EmptyInputError("robust aggregation needs a root dataset")
    return _local_steps(spec, theta, root, U, B, eta, rng)


def init_state(config: ExperimentConfig) -> ExperimentState:
    dc = config.data
    if dc.train_csv is not None:
        train = data.load_csv_dataset(Path(dc.train_csv), config.model.num_classes)
    else:
        train = data.gen_gaussian_mixture(dc.num_classes, dc.per_class, dc.dim, dc.separation,
                                          _derived_seed(config.seed, _TRAIN_DATA))
    if dc.test_csv is not None:
        test = data.load_csv_dataset(Path(dc.test_csv), config.model.num_classes)
    elif dc.train_csv is not None:
        raise ConfigError("data.test_csv", "a CSV training set needs a CSV test set")
    else:
        test = data.gen_gaussian_mixture(dc.num_classes, dc.test_per_class, dc.dim, dc.separation,
                                         _derived_seed(config.seed, _TRAIN_DATA),
                                         noise_seed=_derived_seed(config.seed, _TEST_DATA))

    if train.dim != config.model.input_dim:
        raise ConfigError("model.input_dim", f"{config.model.input_dim} != data dimension {train.dim}")
    if train.num_classes != config.model.num_classes:
        raise ConfigError("model.num_classes", f"{config.model.num_classes} != data classes {train.num_classes}")

    partition = data.partition_label_skew(train, config.M, config.q, _derived_seed(config.seed, _PARTITION))
    shards = [train.subset(idx) for idx in partition.shards]
    root = None
    if config.n_root is not None:
        root = data.sample_root(train, config.n_root, _derived_seed(config.seed, _ROOT_SAMPLE))

    pinned = None
    if config.attack is not None and config.attack.fixed_attackers and config.attack.num_attackers:
        rng = _rng(config.seed, config.attack.seed, _ATTACKERS)
        pinned = attacks.select_attackers(list(range(config.M)), config.attack.num_attackers, rng)

    theta = models.init_params(config.model, _derived_seed(config.seed, _INIT))
    logger.info("initialized %d clients (shard sizes %s), d=%d, aggregator=%s",
                partition.num_clients, partition.sizes(), theta.shape[0], config.aggregator)
    return ExperimentState(config=config, train=train, test=test, shards=shards, theta=theta,
                           root=root, pinned_attackers=pinned)


def _round_attackers(state: ExperimentState, participants: list[int], t: int) -> frozenset[int]:
    cfg = state.config.attack
    if cfg is None or cfg.num_attackers == 0:
        return frozenset()
    if state.pinned_attackers is not None:
        return state.pinned_attackers.intersection(participants)
    rng = _rng(state.config.seed, cfg.seed, _ATTACKERS, t)
    return attacks.select_attackers(sorted(participants), cfg.num_attackers, rng)


def _attack_scalar(state: ExperimentState, client_id: int, t: int) -> float:
    cfg = state.config.attack
    if cfg.fixed_scalars:
        if client_id not in state.pinned_scalars:
            rng = _rng(state.config.seed, cfg.seed, _SCALARS, client_id)
            state.pinned_scalars[client_id] = attacks.draw_scalar(cfg, rng)
        return state.pinned_scalars[client_id]
    return attacks.draw_scalar(cfg, _rng(state.config.seed, cfg.seed, _SCALARS, t, client_id))


def _train_clients(state: ExperimentState, clients: list[int], t: int) -> list[ClientUpdate]:
    cfg = state.config
    theta = state.theta

    def work(cid: int) -> ClientUpdate:
        return local_sgd(cfg.model, theta, state.shards[cid], cfg.U, cfg.B, cfg.eta,
                         client_rng(cfg.seed, t, cid), client_id=cid)

    if cfg.workers > 1 and len(clients) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(work, clients))
    return [work(cid) for cid in clients]


def run_round(state: ExperimentState) -> tuple[ParamVector, RoundRecord]:
    """Broadcast, local training (+ attacks), aggregation, evaluation; advances ``state``."""
    cfg = state.config
    t = state.round
    theta = state.theta

    participants = sample_participants(cfg.M, cfg.S, _rng(cfg.seed, _PARTICIPANTS, t))
    clients = sorted(participants)
    attackers = _round_attackers(state, participants, t)

    updates = _train_clients(state, clients, t)
    scalars: dict[int, float] = {}
    for i, u in enumerate(updates):
        if u.client_id in attackers:
            p = _attack_scalar(state, u.client_id, t)
            scalars[u.client_id] = p
            updates[i] = ClientUpdate(u.client_id, attacks.apply_attack(u.g, cfg.attack, None, p=p), attacked=True)
    raw = [u.g for u in updates]

    mean_lam = max_lam = None
    degenerate_count = 0
    degenerate_reference = False
    if cfg.aggregator == "fedavg":
        new_theta = drag_core.fedavg_aggregate(raw, theta)
    else:
        robust = cfg.aggregator == "drag_byzantine"
        if robust:
            r = compute_root_reference(cfg.model, theta, state.root, cfg.U, cfg.B, cfg.eta,
                                       _rng(cfg.seed, _ROOT_SGD, t))
            degenerate_reference = vecmath.norm(r) <= EPS
            if degenerate_reference:
                logger.warning("round %d: root update vanished; aggregating raw updates", t)
        else:
            if state.reference is None:
                state.reference = drag_core.init_reference(raw, keep_history=cfg.verify_closed_form)
            r = state.reference.r
        mods = [drag_core.drag_step(g, r, cfg.drag, robust=robust) for g in raw]
        delta = drag_core.aggregate_modified(mods)
        new_theta = vecmath.axpy(theta, 1.0, delta)
        mean_lam, max_lam = drag_core.lambda_stats(mods)
        degenerate_count = sum(m.degenerate for m in mods)
        if not robust:
            state.reference = drag_core.update_reference(state.reference, delta, cfg.drag.alpha, t)
            if cfg.verify_closed_form:
                gap = drag_core.verify_reference(state.reference, cfg.drag.alpha)
                if gap > _CLOSED_FORM_RTOL:
                    raise ReferenceStateError(f"round {t}: recursive reference deviates from closed form by {gap:.3g}")

    train_batch = state.train.as_batch()
    gnorm = vecmath.norm(models.grad(cfg.model, new_theta, train_batch))
    record = RoundRecord(
        round=t,
        train_loss=models.loss(cfg.model, new_theta, train_batch),
        test_accuracy=models.accuracy(cfg.model, new_theta, state.test),
        global_grad_norm_sq=gnorm * gnorm,
        mean_lambda=mean_lam,
        max_lambda=max_lam,
        participants=tuple(clients),
        attackers=tuple(sorted(attackers)),
        attack_scalars=scalars,
        degenerate_count=degenerate_count,
        degenerate_reference=degenerate_reference,
    )
    state.theta = new_theta
    state.round = t + 1
    logger.debug("round %d: loss=%.5f acc=%.4f |grad|^2=%.3g", t, record.train_loss,
                 record.test_accuracy, record.global_grad_norm_sq)
    return new_theta, record


def reached_target(config: ExperimentConfig, records: list[RoundRecord]) -> bool:
    return (config.target_accuracy is not None and bool(records)
            and records[-1].test_accuracy >= config.target_accuracy)


def run_experiment(config: ExperimentConfig) -> list[RoundRecord]:
    """Rounds until T_max or until test accuracy reaches the target."""
    state = init_state(config)
    records: list[RoundRecord] = []
    for _ in range(config.T_max):
        _, record = run_round(state)
        records.append(record)
        if reached_target(config, records):
            logger.info("target accuracy %.3f reached after %d rounds", config.target_accuracy, len(records))
            break
    else:
        logger.info("stopped after %d rounds (T_max)", len(records))
    return records
