"""Proposal distributions built from masked conditionals.

Single-position and block proposals share one pipeline: fetch the logit
row(s) for a masked view, reshape the entropy with a temperature, prune the
tail with a nucleus boundary, then sample.  Reverse probabilities are read
off the *same* truncated conditionals, so Metropolis-Hastings acceptance
stays exact even when the old token fell outside the nucleus (its reverse
log-probability is reported as ``-inf`` and the sampler rejects).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Sequence, apply_mask
from .energy import CategoricalDist, LogitRow, Scorer, positional_logits, softmax
from .errors import InvalidBoundary, NonPositiveTemperature


@dataclass(frozen=True)
class ProposalSettings:
    """Entropy controls for the masked conditionals used as proposals.

    Temperature is applied first, then the nucleus truncation.  A truncated
    proposal mixes ``defensive`` weight of the untruncated conditional back
    in so that no token's proposal probability is ever exactly zero: the
    acceptance ratio uses the mixture densities, so the sampler stays exact
    while remaining ergodic under aggressive truncation.  With
    ``defensive=0.0`` pruned tokens keep probability zero and a pruned old
    token makes the reverse log-probability ``-inf`` (the step is then
    always rejected), which can strand parts of the state space.
    """

    temperature: float = 1.0
    nucleus: float = 1.0
    defensive: float = 0.01

    def __post_init__(self):
        if self.temperature <= 0:
            raise NonPositiveTemperature(f"temperature must be > 0, got {self.temperature}")
        if not 0 < self.nucleus <= 1:
            raise InvalidBoundary(f"nucleus boundary must be in (0, 1], got {self.nucleus}")
        if not 0 <= self.defensive < 1:
            raise ValueError(f"defensive weight must be in [0, 1), got {self.defensive}")


@dataclass(frozen=True)
class Proposal:
    """A candidate next state with forward/reverse log proposal probabilities.

    ``changed`` holds the positions whose token actually differs from the
    source state; it is always a subset of the masked positions.
    ``log_q_rev`` may be ``-inf`` when an old token was pruned out of the
    nucleus; ``log_q_fwd`` is always finite.
    """

    candidate: Sequence
    log_q_fwd: float
    log_q_rev: float
    changed: frozenset[int]


@dataclass(frozen=True)
class BlockPolicy:
    """How many positions a block proposal masks at each epoch.

    ``fixed`` keeps ``size`` positions (clamped to the sequence length);
    ``annealed`` starts from ``initial_fraction`` of the length and decays
    linearly to single-position moves by the final epoch.
    """

    mode: str = "fixed"  # "fixed" | "annealed"
    size: int = 1
    initial_fraction: float = 0.5

    def __post_init__(self):
        if self.mode not in ("fixed", "annealed"):
            raise ValueError(f"unknown block mode {self.mode!r}")
        if self.mode == "fixed" and self.size < 1:
            raise ValueError(f"block size must be >= 1, got {self.size}")
        if not 0 < self.initial_fraction <= 1:
            raise ValueError(f"initial fraction must be in (0, 1], got {self.initial_fraction}")


def temper(row: LogitRow, temperature: float) -> CategoricalDist:
    """Softmax of ``row / temperature``, stabilized by max subtraction."""
    if temperature <= 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {temperature}")
    return softmax(np.asarray(row, dtype=np.float64) / temperature)


def nucleus_truncate(dist: CategoricalDist, boundary: float) -> CategoricalDist:
    """Keep the smallest top-probability set with cumulative mass >= boundary.

    Tokens are ranked by probability descending, ties broken by ascending
    token id; everything past the boundary is zeroed and the rest
    renormalized.
    """
    if not 0 < boundary <= 1:
        raise InvalidBoundary(f"nucleus boundary must be in (0, 1], got {boundary}")
    dist = np.asarray(dist, dtype=np.float64)
    order = np.lexsort((np.arange(dist.size), -dist))
    csum = np.cumsum(dist[order])
    cut = int(np.searchsorted(csum, boundary - 1e-12))
    cut = min(cut, dist.size - 1)
    kept = order[: cut + 1]
    out = np.zeros_like(dist)
    out[kept] = dist[kept]
    return out / out.sum()


def proposal_distribution(row: LogitRow, settings: ProposalSettings) -> CategoricalDist:
    """The distribution a proposal actually samples (and scores) a token from."""
    dist = temper(row, settings.temperature)
    if settings.nucleus < 1.0:
        kept = nucleus_truncate(dist, settings.nucleus)
        dist = (1.0 - settings.defensive) * kept + settings.defensive * dist
    return dist


def _draw(dist: CategoricalDist, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; zero-probability tokens are never returned."""
    csum = np.cumsum(dist)
    csum /= csum[-1]
    return int(np.searchsorted(csum, rng.random(), side="right"))


def propose_single(model: Scorer, state: Sequence, pos: int,
                   settings: ProposalSettings, rng: np.random.Generator) -> Proposal:
    """Resample one position from its truncated masked conditional.

    The masked context is shared by the current and candidate state, so the
    reverse probability is the old token's mass under the same conditional.
    """
    view = apply_mask(state, {pos})
    [(_, row)] = positional_logits(model, view)
    dist = proposal_distribution(row, settings)
    new_tok = _draw(dist, rng)
    old_tok = state.tokens[pos]
    with np.errstate(divide="ignore"):
        log_fwd = float(np.log(dist[new_tok]))
        log_rev = float(np.log(dist[old_tok]))
    candidate = state.replace(pos, new_tok) if new_tok != old_tok else state
    changed = frozenset({pos}) if new_tok != old_tok else frozenset()
    return Proposal(candidate, log_fwd, log_rev, changed)


def propose_block(model: Scorer, state: Sequence, positions,
                  settings: ProposalSettings, rng: np.random.Generator) -> Proposal:
    """Resample a set of positions jointly masked in one view.

    Each position draws independently from its own conditional under the
    shared multi-mask context; forward and reverse log-probabilities are the
    sums over positions.
    """
    positions = sorted(int(p) for p in positions)
    if not positions:
        raise ValueError("block proposal needs at least one position")
    view = apply_mask(state, positions)
    rows = dict(positional_logits(model, view))
    log_fwd = 0.0
    log_rev = 0.0
    candidate = state
    changed = set()
    for pos in positions:
        dist = proposal_distribution(rows[pos], settings)
        new_tok = _draw(dist, rng)
        old_tok = state.tokens[pos]
        with np.errstate(divide="ignore"):
            log_fwd += float(np.log(dist[new_tok]))
            log_rev += float(np.log(dist[old_tok]))
        if new_tok != old_tok:
            candidate = candidate.replace(pos, new_tok)
            changed.add(pos)
    return Proposal(candidate, log_fwd, log_rev, frozenset(changed))


def position_schedule(length: int, mode: str, rng: np.random.Generator) -> list[int]:
    """The order in which one epoch visits positions: a permutation of [0, T)."""
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if mode == "left_to_right":
        return list(range(length))
    if mode == "random":
        return [int(p) for p in rng.permutation(length)]
    raise ValueError(f"unknown position mode {mode!r}")


def block_schedule(epoch: int, total_epochs: int, length: int, policy: BlockPolicy) -> int:
    """Block size for ``epoch``; annealed schedules shrink linearly to 1."""
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} not in [0, {total_epochs})")
    if policy.mode == "fixed":
        return min(policy.size, length)
    raw = policy.initial_fraction * length * (1.0 - epoch / total_epochs)
    return max(1, int(np.floor(raw + 0.5)))
