"""
Divergence-based aggregation
----------------------------
Server-side mathematics of the drag aggregator:

- reference direction: momentum over past global updates, seeded with the
  mean raw update of round 0 (recursive form is canonical, the closed form
  is kept as a verification oracle),
- degree of divergence: lambda = c * (1 - cos(g, r)), in [0, 2c],
- vector manipulation: drag each client update toward the reference,
  either norm-preserving (standard) or normalized to |r| (Byzantine-robust),
- aggregation of modified updates and the plain FedAvg rule.

Vectors with norm <= vecmath.EPS are never divided by; such clients bypass
manipulation and the returned ``ModifiedUpdate`` is flagged ``degenerate``.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from . import vecmath
from .errors import ConfigError, DimensionError, EmptyInputError, ReferenceStateError
from .vecmath import EPS, ParamVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DragConfig:
    c: float = 0.25
    alpha: float = 0.6

    def __post_init__(self):
        if not 0.0 <= self.c <= 1.0:
            raise ConfigError("drag.c", f"must lie in [0, 1], got {self.c}")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("drag.alpha", f"must lie in (0, 1], got {self.alpha}")


@dataclass(frozen=True, eq=False)
class ReferenceState:
    r: Optional[ParamVector] = None
    initialized: bool = False
    # (round, delta) pairs, kept only when closed-form verification is on
    history: Optional[tuple[tuple[int, ParamVector], ...]] = None
    # round-0 raw updates, needed by the closed form
    seed_updates: Optional[tuple[ParamVector, ...]] = None


@dataclass(frozen=True)
class DivergenceScore:
    lam: float
    cosine: float
    degenerate: bool = False


@dataclass(frozen=True, eq=False)
class ModifiedUpdate:
    v: ParamVector
    score: DivergenceScore
    degenerate: bool = False


def degree_of_divergence(g: ParamVector, r: ParamVector, c: float) -> DivergenceScore:
    if not 0.0 <= c <= 1.0:
        raise ConfigError("drag.c", f"must lie in [0, 1], got {c}")
    if g.shape != r.shape:
        raise DimensionError(f"update has {g.shape[0]} entries, reference has {r.shape[0]}")
    if vecmath.norm(g) <= EPS or vecmath.norm(r) <= EPS:
        return DivergenceScore(lam=0.0, cosine=1.0, degenerate=True)
    cos = vecmath.cosine(g, r)
    return DivergenceScore(lam=c * (1.0 - cos), cosine=cos)


def _score_for(g: ParamVector, r: ParamVector, lam: Union[float, DivergenceScore]) -> DivergenceScore:
    if isinstance(lam, DivergenceScore):
        score = lam
    else:
        degenerate = vecmath.norm(g) <= EPS or vecmath.norm(r) <= EPS
        cos = 1.0 if degenerate else vecmath.cosine(g, r)
        score = DivergenceScore(lam=float(lam), cosine=cos, degenerate=degenerate)
    if score.lam < 0:
        raise ValueError(f"degree of divergence must be >= 0, got {score.lam}")
    return score


def drag_manipulate(g: ParamVector, r: ParamVector, lam: Union[float, DivergenceScore]) -> ModifiedUpdate:
    """v = (1 - lam) g + lam (|g| / |r|) r; the norm of g is carried over to r."""
    if g.shape != r.shape:
        raise DimensionError(f"update has {g.shape[0]} entries, reference has {r.shape[0]}")
    score = _score_for(g, r, lam)
    ng, nr = vecmath.norm(g), vecmath.norm(r)
    if ng <= EPS or nr <= EPS:
        return ModifiedUpdate(v=g.copy(), score=score, degenerate=True)
    if score.lam == 0.0:
        return ModifiedUpdate(v=g.copy(), score=score)
    v = vecmath.axpy(vecmath.scale(g, 1.0 - score.lam), score.lam * ng / nr, r)
    return ModifiedUpdate(v=v, score=score)


def byzantine_manipulate(g: ParamVector, r: ParamVector, lam: Union[float, DivergenceScore]) -> ModifiedUpdate:
    """v = (1 - lam) (|r| / |g|) g + lam r; every update is rescaled to the trusted norm."""
    if g.shape != r.shape:
        raise DimensionError(f"update has {g.shape[0]} entries, reference has {r.shape[0]}")
    score = _score_for(g, r, lam)
    ng, nr = vecmath.norm(g), vecmath.norm(r)
    if nr <= EPS:
        return ModifiedUpdate(v=g.copy(), score=score, degenerate=True)
    if ng <= EPS:
        return ModifiedUpdate(v=r.copy(), score=score, degenerate=True)
    v = vecmath.axpy(vecmath.scale(g, (1.0 - score.lam) * nr / ng), score.lam, r)
    return ModifiedUpdate(v=v, score=score)


def drag_step(g: ParamVector, r: ParamVector, cfg: DragConfig, robust: bool = False) -> ModifiedUpdate:
    """Score one client update against ``r`` and apply the matching manipulation."""
    score = degree_of_divergence(g, r, cfg.c)
    mod = byzantine_manipulate(g, r, score) if robust else drag_manipulate(g, r, score)
    if mod.degenerate:
        logger.debug("near-zero update or reference (|g|=%.3g, |r|=%.3g); manipulation skipped",
                     vecmath.norm(g), vecmath.norm(r))
    return mod


def init_reference(raw_updates: Sequence[ParamVector], keep_history: bool = False) -> ReferenceState:
    if len(raw_updates) == 0:
        raise EmptyInputError("reference direction needs at least one round-0 update")
    r0 = vecmath.mean(raw_updates)
    if not keep_history:
        return ReferenceState(r=r0, initialized=True)
    return ReferenceState(
        r=r0,
        initialized=True,
        history=(),
        seed_updates=tuple(u.copy() for u in raw_updates),
    )


def update_reference(state: ReferenceState, delta_prev: ParamVector, alpha: float,
                     round_index: Optional[int] = None) -> ReferenceState:
    """r <- (1 - alpha) r + alpha * delta_prev."""
    if not state.initialized or state.r is None:
        raise ReferenceStateError("reference direction updated before initialization")
    r = vecmath.axpy(vecmath.scale(state.r, 1.0 - alpha), alpha, delta_prev)
    if state.history is None:
        return replace(state, r=r)
    t = round_index if round_index is not None else len(state.history)
    return replace(state, r=r, history=state.history + ((t, delta_prev.copy()),))


def closed_form_reference(g0_updates: Sequence[ParamVector], deltas: Sequence[ParamVector],
                          alpha: float, t: int) -> ParamVector:
    """(1-alpha)^t mean(g0) + sum_i alpha (1-alpha)^(t-i-1) delta_i, for t >= 1.

    ``g0_updates`` are the raw updates of round 0: unrolling the recursion
    leaves the round-0 mean, not the current round's, in the first term.
    """
    if t < 1:
        raise ValueError(f"closed form is defined for t >= 1, got {t}")
    if len(deltas) != t:
        raise DimensionError(f"expected {t} global updates, got {len(deltas)}")
    out = vecmath.scale(vecmath.mean(g0_updates), (1.0 - alpha) ** t)
    for i, delta in enumerate(deltas):
        out = vecmath.axpy(out, alpha * (1.0 - alpha) ** (t - i - 1), delta)
    return out


def verify_reference(state: ReferenceState, alpha: float) -> float:
    """Relative gap between the recursive reference and its closed form."""
    if state.history is None or state.seed_updates is None:
        raise ReferenceStateError("closed-form verification needs the retained history")
    t = len(state.history)
    if t == 0:
        return 0.0
    oracle = closed_form_reference(state.seed_updates, [d for _, d in state.history], alpha, t)
    scale_ = max(vecmath.norm(oracle), EPS)
    return vecmath.norm(state.r - oracle) / scale_


def aggregate_modified(mods: Sequence[ModifiedUpdate]) -> ParamVector:
    """Delta = mean of the modified updates, in the order given."""
    if len(mods) == 0:
        raise EmptyInputError("no modified updates to aggregate")
    return vecmath.mean([m.v for m in mods])


def fedavg_aggregate(updates: Sequence[ParamVector], theta: ParamVector) -> ParamVector:
    """theta + mean(updates)."""
    if len(updates) == 0:
        raise EmptyInputError("no client updates to aggregate")
    for g in updates:
        if g.shape != theta.shape:
            raise DimensionError(f"update has {g.shape[0]} entries, model has {theta.shape[0]}")
    return vecmath.axpy(theta, 1.0, vecmath.mean(updates))


def lambda_stats(mods: Sequence[ModifiedUpdate]) -> tuple[float, float]:
    lams = np.array([m.score.lam for m in mods], dtype=np.float64)
    return float(lams.mean()), float(lams.max())
