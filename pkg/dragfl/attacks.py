"""Byzantine clients that scale (and possibly reverse) their update before sending it."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import vecmath
from .errors import ConfigError
from .vecmath import ParamVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FixedScalar:
    p: float

    kind = "fixed"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p}


@dataclass(frozen=True)
class GaussianScalar:
    variance: float = 3.0

    kind = "gaussian"

    def __post_init__(self):
        if self.variance <= 0:
            raise ConfigError("attack.scalar_mode.variance", f"must be > 0, got {self.variance}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "variance": self.variance}


ScalarMode = Union[FixedScalar, GaussianScalar]


def scalar_mode_from_dict(raw: dict) -> ScalarMode:
    kind = raw.get("kind")
    try:
        if kind == "fixed":
            return FixedScalar(p=float(raw["p"]))
        if kind == "gaussian":
            return GaussianScalar(variance=float(raw.get("variance", 3.0)))
    except KeyError as e:
        raise ConfigError(f"attack.scalar_mode.{e.args[0]}", "missing") from e
    raise ConfigError("attack.scalar_mode.kind", f"expected 'fixed' or 'gaussian', got {kind!r}")


@dataclass(frozen=True)
class AttackConfig:
    num_attackers: int = 0
    scalar_mode: ScalarMode = GaussianScalar()
    seed: int = 0
    # pin attacker identities for the whole run instead of re-selecting per round
    fixed_attackers: bool = True
    # draw p once per attacker instead of once per attacker and round
    fixed_scalars: bool = False

    def __post_init__(self):
        if self.num_attackers < 0:
            raise ConfigError("attack.num_attackers", f"must be >= 0, got {self.num_attackers}")

    def to_dict(self) -> dict:
        return {
            "num_attackers": self.num_attackers,
            "scalar_mode": self.scalar_mode.to_dict(),
            "seed": self.seed,
            "fixed_attackers": self.fixed_attackers,
            "fixed_scalars": self.fixed_scalars,
        }


def select_attackers(participants: Sequence[int], A: int, rng: np.random.Generator) -> frozenset[int]:
    """A distinct ids drawn uniformly without replacement from ``participants``."""
    if A > len(participants):
        raise ConfigError("attack.num_attackers", f"{A} attackers but only {len(participants)} participants")
    if A == 0:
        return frozenset()
    picked = rng.choice(np.asarray(participants, dtype=np.int64), size=A, replace=False)
    return frozenset(int(i) for i in picked)


def draw_scalar(cfg: AttackConfig, rng: np.random.Generator) -> float:
    mode = cfg.scalar_mode
    if isinstance(mode, FixedScalar):
        return float(mode.p)
    return float(rng.normal(0.0, np.sqrt(mode.variance)))


def apply_attack(g: ParamVector, cfg: AttackConfig, rng: Optional[np.random.Generator],
                 p: Optional[float] = None) -> ParamVector:
    """Return ``p * g``; ``p`` is drawn from the config unless given."""
    if p is None:
        p = draw_scalar(cfg, rng)
    logger.debug("attack scalar %.4g applied", p)
    return vecmath.scale(g, p)
