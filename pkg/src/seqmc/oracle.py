"""Exact brute-force checks on enumerable models.

States are all ``|V|**T`` token strings, indexed big-endian in base ``|V|``
(position 0 is the most significant digit).  Everything here is pure and
deterministic: enumerated targets, exact single-position conditionals of
the raw-score random field, full transition matrices for the samplers, and
the cross-ratio test for inconsistent conditional tables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import Sequence, Vocab, apply_mask, sequence_new
from .energy import (CategoricalDist, Scorer, energy, energy_raw, mlm_conditional,
                     positional_logits, softmax)
from .errors import (InvalidTable, LengthMismatch, NoConvergence, ShapeMismatch,
                     StateSpaceTooLarge)
from .proposal import ProposalSettings, proposal_distribution

MAX_ENUM_STATES = 10**5
MAX_KERNEL_STATES = 4096


@dataclass(frozen=True)
class ExactDistribution:
    """Target probabilities over all sequences, plus the log normalizer."""

    probs: np.ndarray
    log_z: float


@dataclass(frozen=True)
class SamplerSpec:
    """Which sampler a kernel encodes.

    ``block_size`` of ``None`` means random-scan single-position steps;
    otherwise the kernel mixes uniformly over all position subsets of that
    size.
    """

    algorithm: str = "mh"  # "mh" | "deg_gibbs"
    kind: str = "raw"
    target_temp: float = 1.0
    settings: ProposalSettings = ProposalSettings()
    block_size: int | None = None


@dataclass(frozen=True)
class Kernel:
    """A row-stochastic transition matrix and the sampler it encodes."""

    matrix: np.ndarray
    sampler_spec: SamplerSpec


def state_index(tokens, vocab_size: int) -> int:
    idx = 0
    for t in tokens:
        idx = idx * vocab_size + t
    return idx


def index_tokens(idx: int, vocab_size: int, length: int) -> tuple[int, ...]:
    tokens = []
    for _ in range(length):
        idx, tok = divmod(idx, vocab_size)
        tokens.append(tok)
    return tuple(reversed(tokens))


def _check_enumerable(model: Scorer, cap: int = MAX_ENUM_STATES) -> int:
    states = model.vocab.size ** model.length
    if states > cap:
        raise StateSpaceTooLarge(f"{states} states exceed the cap of {cap}")
    return states


def all_sequences(model: Scorer) -> list[Sequence]:
    n = _check_enumerable(model)
    V, T = model.vocab.size, model.length
    return [sequence_new(index_tokens(i, V, T), model.vocab) for i in range(n)]


def enumerate_energies(model: Scorer, kind: str) -> np.ndarray:
    return np.array([energy(model, seq, kind).value for seq in all_sequences(model)])


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    return m + float(np.log(np.sum(np.exp(values - m))))


def enumerate_target(model: Scorer, kind: str, target_temp: float = 1.0) -> ExactDistribution:
    """Exact normalized target: exp(-E/temp) over every sequence."""
    scaled = -enumerate_energies(model, kind) / target_temp
    log_z = _logsumexp(scaled)
    return ExactDistribution(np.exp(scaled - log_z), log_z)


def exact_raw_conditional(model: Scorer, seq: Sequence, pos: int) -> CategoricalDist:
    """Single-position conditional of the raw-score random field.

    Evaluates the full positional-potential product for every token the
    position could take (``|V|`` complete energy evaluations), then
    normalizes.  This is the conditional a correct Gibbs sampler for the
    raw energy would need, and it differs in general from the much cheaper
    masked conditional.
    """
    _check_enumerable(model)
    scores = np.array([-energy_raw(model, seq.replace(pos, w)).value
                       for w in range(model.vocab.size)])
    return softmax(scores)


def mismatch_pmlm_vs_raw(model: Scorer, seq: Sequence, pos: int) -> float:
    """TV distance between the masked conditional and the exact raw one."""
    free = mlm_conditional(model, apply_mask(seq, {pos}), pos)
    return total_variation(free, exact_raw_conditional(model, seq, pos))


def total_variation(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise LengthMismatch(f"distributions have shapes {p.shape} and {q.shape}")
    return 0.5 * float(np.sum(np.abs(p - q)))


def _conditional_at(model: Scorer, view, pos, settings: ProposalSettings) -> np.ndarray:
    row = dict(positional_logits(model, view))[pos]
    return proposal_distribution(row, settings)


def transition_kernel(model: Scorer, spec: SamplerSpec) -> Kernel:
    """Exact one-step transition matrix of the configured sampler.

    Random-scan single-position samplers average the per-position step
    kernels; block samplers average over all position subsets of the fixed
    block size.  Rejected Metropolis-Hastings mass sits on the diagonal.
    """
    n = _check_enumerable(model, MAX_KERNEL_STATES)
    V, T = model.vocab.size, model.length
    sequences = all_sequences(model)
    energies = None
    if spec.algorithm == "mh":
        energies = enumerate_energies(model, spec.kind)
    elif spec.algorithm != "deg_gibbs":
        raise ValueError(f"unknown algorithm {spec.algorithm!r}")

    if spec.block_size is None:
        groups = [(t,) for t in range(T)]
    else:
        if not 1 <= spec.block_size <= T:
            raise ValueError(f"block size {spec.block_size} not in [1, {T}]")
        groups = list(itertools.combinations(range(T), spec.block_size))

    matrix = np.zeros((n, n))
    for group in groups:
        matrix += _group_kernel(model, spec, sequences, energies, group, n, V, T)
    matrix /= len(groups)
    sums = matrix.sum(axis=1)
    if np.any(matrix < 0) or np.max(np.abs(sums - 1.0)) > 1e-9:
        raise AssertionError("constructed kernel is not row-stochastic")
    return Kernel(matrix, spec)


def _group_kernel(model, spec, sequences, energies, group, n, V, T) -> np.ndarray:
    """Step kernel for masking one fixed position group."""
    k = np.zeros((n, n))
    places = [V ** (T - 1 - t) for t in group]
    for x in range(n):
        seq = sequences[x]
        view = apply_mask(seq, group)
        dists = [_conditional_at(model, view, t, spec.settings) for t in group]
        old = [seq.tokens[t] for t in group]
        base = x - sum(p * o for p, o in zip(places, old))
        with np.errstate(divide="ignore"):
            log_rev = float(sum(np.log(d[o]) for d, o in zip(dists, old)))
        moved = 0.0
        for combo in itertools.product(range(V), repeat=len(group)):
            q_fwd = float(np.prod([d[w] for d, w in zip(dists, combo)]))
            if q_fwd == 0.0:
                continue
            y = base + sum(p * w for p, w in zip(places, combo))
            if spec.algorithm == "deg_gibbs":
                k[x, y] += q_fwd
                continue
            if y == x:
                accept = 1.0
            elif log_rev == -np.inf:
                accept = 0.0
            else:
                log_a = ((energies[x] - energies[y]) / spec.target_temp
                         + log_rev - np.log(q_fwd))
                accept = float(np.exp(min(0.0, log_a)))
            k[x, y] += q_fwd * accept
            if y != x:
                moved += q_fwd * accept
        if spec.algorithm == "mh":
            k[x, x] = 1.0 - moved
    return k


def stationary_distribution(kernel: Kernel, tol: float = 1e-12,
                            max_iters: int = 10**6) -> np.ndarray:
    """Power iteration from uniform until the L1 update drops below ``tol``.

    Kernels that are already fixed on the start vector (like the identity)
    return uniform immediately; periodic kernels raise ``NoConvergence``.
    """
    matrix = kernel.matrix
    dist = np.full(matrix.shape[0], 1.0 / matrix.shape[0])
    for _ in range(max_iters):
        nxt = dist @ matrix
        if float(np.sum(np.abs(nxt - dist))) < tol:
            return nxt
        dist = nxt
    raise NoConvergence(f"no fixed point within {max_iters} iterations")


def detailed_balance_residual(kernel: Kernel, target: ExactDistribution | np.ndarray) -> float:
    """Largest violation of pi_x K_xy = pi_y K_yx over all state pairs."""
    pi = target.probs if isinstance(target, ExactDistribution) else np.asarray(target)
    if pi.shape[0] != kernel.matrix.shape[0]:
        raise ShapeMismatch(f"target has {pi.shape[0]} states, "
                            f"kernel {kernel.matrix.shape[0]}")
    flow = pi[:, None] * kernel.matrix
    return float(np.max(np.abs(flow - flow.T)))


# ---------------------------------------------------------------------------
# Inconsistent-conditionals counter-example.
# ---------------------------------------------------------------------------

# Built-in tables: the second variable predicts the first almost surely,
# while the first says nothing about the second; no joint has both.
COUNTEREXAMPLE_C12 = np.array([[0.99, 0.01], [0.01, 0.99]])
COUNTEREXAMPLE_C21 = np.array([[0.5, 0.5], [0.5, 0.5]])


def _check_table(table) -> np.ndarray:
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] != table.shape[1]:
        raise InvalidTable(f"conditional table must be square, got {table.shape}")
    if np.any(table < 0) or np.any(np.abs(table.sum(axis=1) - 1.0) > 1e-9):
        raise InvalidTable("rows must be distributions summing to 1")
    return table


def bayes_consistency_gap(c12, c21) -> float:
    """Worst cross-ratio disagreement between two conditional tables.

    ``c12[b, a]`` is p(X1=a | X2=b) and ``c21[a, b]`` is p(X2=b | X1=a);
    rows are the conditioning values.  For every (a, b, b') the joint mass
    ratio p(a,b)/p(a,b') can be read through either table; the gap is the
    largest absolute log disagreement, including the role-swapped form.
    Tables whose context variable is uniformly distributed under a common
    joint score (near) zero; the built-in pair scores log 99.
    """
    c12 = _check_table(c12)
    c21 = _check_table(c21)
    if c12.shape != c21.shape:
        raise InvalidTable(f"tables have shapes {c12.shape} and {c21.shape}")
    with np.errstate(divide="ignore"):
        l12 = np.log(c12)
        l21 = np.log(c21)
    gap = 0.0
    m = c12.shape[0]
    for a, b, b2 in itertools.product(range(m), repeat=3):
        gap = max(gap, abs((l12[b, a] + l21[a, b2]) - (l12[b2, a] + l21[a, b])))
    for b, a, a2 in itertools.product(range(m), repeat=3):
        gap = max(gap, abs((l21[a, b] + l12[b, a2]) - (l21[a2, b] + l12[b, a])))
    return float(gap)


def export_distribution_csv(dist: ExactDistribution | np.ndarray, path) -> None:
    """Write an enumerated distribution as ``index,value`` rows."""
    probs = dist.probs if isinstance(dist, ExactDistribution) else np.asarray(dist)
    with open(path, "w") as fh:
        fh.write("index,value\n")
        for i, p in enumerate(probs):
            fh.write(f"{i},{float(p)!r}\n")


def export_kernel_csv(kernel: Kernel, path) -> None:
    """Write a transition matrix as ``row,col,value`` entries."""
    with open(path, "w") as fh:
        fh.write("row,col,value\n")
        for i, row in enumerate(kernel.matrix):
            for j, value in enumerate(row):
                fh.write(f"{i},{j},{float(value)!r}\n")


def conditionals_from_joint(joint) -> tuple[np.ndarray, np.ndarray]:
    """Both single-variable conditional tables of a two-variable joint.

    ``joint[a, b]`` is p(X1=a, X2=b); returns (c12, c21) with rows as
    conditioning values, matching :func:`bayes_consistency_gap`.
    """
    joint = np.asarray(joint, dtype=np.float64)
    if joint.ndim != 2 or not np.isclose(joint.sum(), 1.0):
        raise InvalidTable("joint must be a 2-D table summing to 1")
    p1 = joint.sum(axis=1)
    p2 = joint.sum(axis=0)
    c12 = (joint / p2[None, :]).T  # rows: values of X2
    c21 = joint / p1[:, None]      # rows: values of X1
    return c12, c21
