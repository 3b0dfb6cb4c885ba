"""Metropolis-Hastings chains over masked-conditional proposals.

One chain is strictly sequential; independent chains share nothing mutable
and derive their random streams from (master seed, chain index), so results
do not depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import MaskedView, Sequence, sequence_new
from .energy import Scorer, energy, positional_logits, softmax
from .errors import ConfigInvalid
from .proposal import (BlockPolicy, Proposal, ProposalSettings, block_schedule,
                       position_schedule, propose_block, propose_single)
from .trace import StepOutcome, Trace


@dataclass
class ChainState:
    """Mutable bookkeeping for one chain.

    ``current_energy`` always caches the energy of ``current`` under the
    chain's configured (model, kind); every accepted transition refreshes it.
    """

    current: Sequence
    current_energy: float
    epoch: int = 0
    step: int = 0
    target_temp: float = 1.0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def assert_energy_coherent(self, model: Scorer, kind: str, tol: float = 1e-9) -> None:
        fresh = energy(model, self.current, kind).value
        if abs(fresh - self.current_energy) > tol:
            raise AssertionError(f"cached energy {self.current_energy} drifted from "
                                 f"recomputed {fresh}")


@dataclass(frozen=True)
class AnnealSchedule:
    """Linear per-epoch decay of the target temperature, clamped at a floor.

    Every produced temperature lies in ``[floor, initial]``.
    """

    rate: float
    initial: float = 1.0
    floor: float = 0.05

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"anneal rate must be >= 0, got {self.rate}")
        if not 0 < self.floor <= self.initial:
            raise ValueError(f"need 0 < floor <= initial, got floor={self.floor} "
                             f"initial={self.initial}")


def anneal_temperature(epoch: int, sched: AnnealSchedule) -> float:
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return max(sched.floor, sched.initial - sched.rate * epoch)


def mh_step(model: Scorer, kind: str, state: ChainState, prop: Proposal,
            force_accept: bool = False) -> tuple[ChainState, StepOutcome]:
    """Accept or reject ``prop`` by the Metropolis-Hastings rule.

    The log acceptance ratio divides only the energy difference by the
    target temperature; the proposal ratio is untouched.  ``force_accept``
    bypasses the rule (used by the optional first-epochs variance trick and
    the degenerate Gibbs baseline) while still recording energies.
    """
    e_old = state.current_energy
    e_new = energy(model, prop.candidate, kind).value
    if force_accept:
        log_alpha = 0.0
    else:
        log_alpha = min(0.0, (e_old - e_new) / state.target_temp
                        + prop.log_q_rev - prop.log_q_fwd)
    u = state.rng.random()
    accepted = bool(log_alpha > -np.inf and (u <= 0.0 or np.log(u) <= log_alpha))
    if accepted:
        state.current = prop.candidate
        state.current_energy = e_new
    outcome = StepOutcome(accepted=accepted,
                          novel=accepted and bool(prop.changed),
                          acceptance_prob=float(np.exp(log_alpha)),
                          energy_old=e_old, energy_new=e_new,
                          log_q_fwd=prop.log_q_fwd, log_q_rev=prop.log_q_rev)
    return state, outcome


def degenerate_gibbs_step(model: Scorer, kind: str, state: ChainState, pos: int,
                          settings: ProposalSettings) -> tuple[ChainState, StepOutcome]:
    """Resample ``pos`` from its masked conditional and always transition.

    The acceptance probability is 1.0 by construction; energies are computed
    for diagnostics only and play no role in the transition.
    """
    prop = propose_single(model, state.current, pos, settings, state.rng)
    return _forced_transition(model, kind, state, prop)


def _forced_transition(model: Scorer, kind: str, state: ChainState,
                       prop: Proposal) -> tuple[ChainState, StepOutcome]:
    e_old = state.current_energy
    e_new = energy(model, prop.candidate, kind).value
    state.current = prop.candidate
    state.current_energy = e_new
    outcome = StepOutcome(accepted=True, novel=bool(prop.changed),
                          acceptance_prob=1.0,
                          energy_old=e_old, energy_new=e_new,
                          log_q_fwd=prop.log_q_fwd, log_q_rev=prop.log_q_rev)
    return state, outcome


def warm_start(model: Scorer, length: int, mode: str, rng: np.random.Generator) -> Sequence:
    """Fill an all-mask sequence left to right from the masked conditionals.

    ``greedy`` takes each position's argmax (ties to the lowest token id),
    ``sample_all`` draws from the conditional instead; every position is
    conditioned on the partially filled sequence with all not-yet-filled
    positions still masked.  The result never contains the mask id.
    """
    if mode not in ("greedy", "sample_all"):
        raise ValueError(f"unknown warm-start mode {mode!r}")
    tokens = [0] * length
    for t in range(length):
        placeholder = sequence_new(tokens, model.vocab)
        view = MaskedView(placeholder, frozenset(range(t, length)))
        row = dict(positional_logits(model, view))[t]
        if mode == "greedy":
            tokens[t] = int(np.argmax(row))
        else:
            dist = softmax(row)
            csum = np.cumsum(dist)
            csum /= csum[-1]
            tokens[t] = int(np.searchsorted(csum, rng.random(), side="right"))
    return sequence_new(tokens, model.vocab)


@dataclass(frozen=True)
class SamplerConfig:
    """Everything one chain needs besides the model and its random stream.

    ``epochs`` counts all sweeps including the first ``burn_in`` ones, whose
    steps are flagged and excluded from collected samples.
    """

    algorithm: str  # "mh" | "deg_gibbs"
    kind: str  # "raw" | "norm"
    length: int
    epochs: int
    burn_in: int = 7
    settings: ProposalSettings = ProposalSettings()
    positions: str = "random"  # "random" | "left_to_right"
    warm: str = "greedy"  # "greedy" | "sample_all"
    block: BlockPolicy | None = None
    anneal: AnnealSchedule | None = None
    force_accept_epochs: int = 0
    track_both_energies: bool = False

    def __post_init__(self):
        if self.algorithm not in ("mh", "deg_gibbs"):
            raise ConfigInvalid(f"unknown algorithm {self.algorithm!r}")
        if self.kind not in ("raw", "norm"):
            raise ConfigInvalid(f"unknown energy kind {self.kind!r}")
        if self.epochs < 1:
            raise ConfigInvalid(f"epochs must be >= 1, got {self.epochs}")
        if not 0 <= self.burn_in < self.epochs:
            raise ConfigInvalid(f"burn_in must be in [0, epochs), got {self.burn_in}")
        if self.length < 1:
            raise ConfigInvalid(f"length must be >= 1, got {self.length}")


@dataclass
class ChainResult:
    """Final state plus the full trace and the post-burn-in visited states."""

    final: Sequence
    trace: Trace
    samples: list[tuple[int, ...]]


def run_chain(model: Scorer, config: SamplerConfig, rng: np.random.Generator,
              chain_id: int = 0, config_hash: str = "") -> ChainResult:
    """Warm-start and run one chain for ``config.epochs`` sweeps.

    Each epoch covers every position once: either one single-position step
    per scheduled position, or ``ceil(T / blocksize)`` block steps over a
    random partition of the positions when a block policy is set.  The
    target temperature is refreshed once per epoch when annealing is on.
    """
    start = warm_start(model, config.length, config.warm, rng)
    state = ChainState(start, energy(model, start, config.kind).value, rng=rng)
    trace = Trace(config_hash)
    samples: list[tuple[int, ...]] = []
    step_index = 0
    for epoch in range(config.epochs):
        state.epoch = epoch
        if config.anneal is not None:
            state.target_temp = anneal_temperature(epoch, config.anneal)
        burn = epoch < config.burn_in
        force = config.algorithm == "mh" and epoch < config.force_accept_epochs
        for group in _epoch_groups(config, epoch, state.rng):
            if config.block is None:
                prop = propose_single(model, state.current, group[0],
                                      config.settings, state.rng)
            else:
                prop = propose_block(model, state.current, group,
                                     config.settings, state.rng)
            if config.algorithm == "deg_gibbs":
                state, outcome = _forced_transition(model, config.kind, state, prop)
            else:
                state, outcome = mh_step(model, config.kind, state, prop,
                                         force_accept=force)
            state.step = step_index
            e_raw, e_norm = _tracked_energies(model, state, config)
            trace.record(outcome, chain_id=chain_id, epoch=epoch, step=step_index,
                         burn_in=burn, target_temp=state.target_temp,
                         energy_raw=e_raw, energy_norm=e_norm)
            if not burn:
                samples.append(state.current.tokens)
            step_index += 1
    return ChainResult(state.current, trace, samples)


def _epoch_groups(config: SamplerConfig, epoch: int, rng: np.random.Generator):
    """Position groups visited in one epoch: singletons or a block partition."""
    if config.block is None:
        return [[p] for p in position_schedule(config.length, config.positions, rng)]
    size = block_schedule(epoch, config.epochs, config.length, config.block)
    order = [int(p) for p in rng.permutation(config.length)]
    return [order[i:i + size] for i in range(0, config.length, size)]


def _tracked_energies(model: Scorer, state: ChainState, config: SamplerConfig):
    e_raw = e_norm = None
    if config.kind == "raw":
        e_raw = state.current_energy
        if config.track_both_energies:
            e_norm = energy(model, state.current, "norm").value
    else:
        e_norm = state.current_energy
        if config.track_both_energies:
            e_raw = energy(model, state.current, "raw").value
    return e_raw, e_norm
