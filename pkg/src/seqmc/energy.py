"""Scorer interface, energy parametrizations, and the tabular toy model.

A *scorer* maps a masked view to one row of log-potentials (logits) per
masked position, with every masked position hidden simultaneously.  Two
energies are derived from single-mask rows:

* raw energy: negative sum of the observed tokens' raw logits,
* normalized energy: negative sum of the observed tokens' masked
  log-probabilities (so ``-value`` is the sequence's pseudo-log-likelihood).

Both mask positions one at a time (T scorer calls per evaluation); views
with several masked positions are only ever used by block proposals and
warm starts.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .core import MaskedView, Sequence, Vocab, apply_mask
from .errors import ScorerFailure, StateSpaceTooLarge

# One row of log-potentials over ordinary tokens; the mask id has no entry.
LogitRow = np.ndarray
# Probabilities over ordinary tokens, summing to one.
CategoricalDist = np.ndarray

DEFAULT_ROW_CAP = 10**7
DEFAULT_SCALE = 2.0

_FILE_MAGIC = b"SQMC"
_FILE_VERSION = 1
_HEADER = struct.Struct("<4sIQIId")  # magic, version, seed, vocab_size, length, scale


@dataclass(frozen=True)
class Energy:
    """A sequence score; ``kind`` records which parametrization produced it."""

    value: float
    kind: str  # "raw" | "norm"


class Scorer(Protocol):
    """Anything that can produce masked-position logits for a view."""

    vocab: Vocab
    length: int

    def logits(self, view: MaskedView) -> list[tuple[int, LogitRow]]:
        """One ``(position, row)`` pair per masked position, ascending."""
        ...


def log_softmax(row: LogitRow) -> np.ndarray:
    """Numerically stabilized log-softmax (max subtraction)."""
    shifted = np.asarray(row, dtype=np.float64) - np.max(row)
    return shifted - np.log(np.sum(np.exp(shifted)))


def softmax(row: LogitRow) -> CategoricalDist:
    p = np.exp(log_softmax(row))
    return p / p.sum()


def positional_logits(model: Scorer, view: MaskedView) -> list[tuple[int, LogitRow]]:
    """Logit rows for every masked position of ``view``, all masked at once.

    Validates the scorer's output shape and finiteness; malformed rows are
    surfaced as :class:`ScorerFailure` regardless of the backend.
    """
    if not view.masked:
        raise ValueError("view has no masked positions")
    rows = model.logits(view)
    if [p for p, _ in rows] != sorted(view.masked):
        raise ScorerFailure(f"scorer returned rows for {[p for p, _ in rows]}, "
                            f"expected {sorted(view.masked)}")
    out = []
    for pos, row in rows:
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (model.vocab.size,):
            raise ScorerFailure(f"row at {pos} has shape {row.shape}")
        if not np.all(np.isfinite(row)):
            raise ScorerFailure(f"non-finite logits at position {pos}")
        out.append((pos, row))
    return out


def single_mask_row(model: Scorer, seq: Sequence, pos: int) -> LogitRow:
    """The logit row at ``pos`` with exactly that position masked."""
    [(_, row)] = positional_logits(model, apply_mask(seq, {pos}))
    return row


def energy_raw(model: Scorer, seq: Sequence) -> Energy:
    """Negative sum of the observed tokens' raw logits, one mask at a time."""
    total = 0.0
    for t in range(seq.length):
        total += single_mask_row(model, seq, t)[seq.tokens[t]]
    return Energy(float(-total), "raw")


def energy_norm(model: Scorer, seq: Sequence) -> Energy:
    """Negative sum of masked log-probabilities of the observed tokens.

    Always non-negative; ``-value`` is the pseudo-log-likelihood of ``seq``.
    """
    total = 0.0
    for t in range(seq.length):
        total += log_softmax(single_mask_row(model, seq, t))[seq.tokens[t]]
    return Energy(float(-total), "norm")


def energy(model: Scorer, seq: Sequence, kind: str) -> Energy:
    if kind == "raw":
        return energy_raw(model, seq)
    if kind == "norm":
        return energy_norm(model, seq)
    raise ValueError(f"unknown energy kind {kind!r}")


def mlm_conditional(model: Scorer, view: MaskedView, pos: int) -> CategoricalDist:
    """Softmax of the logit row at ``pos`` under ``view``."""
    from .errors import PositionNotMasked

    if pos not in view.masked:
        raise PositionNotMasked(f"position {pos} is not masked in the view")
    for p, row in positional_logits(model, view):
        if p == pos:
            return softmax(row)
    raise AssertionError("unreachable: masked position missing from rows")


# ---------------------------------------------------------------------------
# Deterministic counter-based row generator (splitmix64-style finisher).
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_PHI = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix_int(h: int) -> int:
    h &= _MASK64
    h ^= h >> 30
    h = (h * _MIX1) & _MASK64
    h ^= h >> 27
    h = (h * _MIX2) & _MASK64
    h ^= h >> 31
    return h


def _mix_array(h: np.ndarray) -> np.ndarray:
    h = h.copy()
    h ^= h >> np.uint64(30)
    h *= np.uint64(_MIX1)
    h ^= h >> np.uint64(27)
    h *= np.uint64(_MIX2)
    h ^= h >> np.uint64(31)
    return h


def _generate_rows(seed: int, pos: int, keys: np.ndarray, vocab_size: int,
                   scale: float) -> np.ndarray:
    """Rows of logits in ``[-scale, scale]`` for the given context keys."""
    base = _mix_int(_mix_int(seed + _PHI) ^ ((pos + 1) * _PHI))
    hk = _mix_array(np.uint64(base) ^ (keys.astype(np.uint64) + np.uint64(1)) * np.uint64(_PHI))
    tok = (np.arange(1, vocab_size + 1, dtype=np.uint64)) * np.uint64(_PHI)
    hv = _mix_array(hk[:, None] ^ tok[None, :])
    unit = (hv >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return (2.0 * unit - 1.0) * scale


@dataclass
class TabularMLM:
    """Deterministic table-backed scorer for desk-scale experiments.

    Rows are keyed by (position, context key), where the context key encodes
    the readout of the other ``T - 1`` positions as a big-endian base
    ``(|V| + 1)`` integer so that views with several positions masked at once
    (block proposals, warm starts) have their own rows; the mask sentinel
    contributes digit ``|V|``.  Rows are either generated on demand from a
    counter-based generator keyed by ``(seed, position, context key)`` and
    memoized, or read back from a dense array loaded from disk.  Either way
    the same inputs always yield bit-identical rows, and instances are safe
    to share across chains (the memo only ever fills in identical values).
    """

    vocab: Vocab
    length: int
    seed: int
    scale: float
    _dense: np.ndarray | None = None  # (T, (V+1)**(T-1), V) when loaded
    _cache: dict[tuple[int, int], np.ndarray] = field(default_factory=dict, repr=False)
    _table: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_rows(self) -> int:
        """Count of fully observed single-mask contexts: T * |V|**(T-1)."""
        return self.length * self.vocab.size ** (self.length - 1)

    def context_key(self, readout: tuple[int, ...], pos: int) -> int:
        """Base-(|V|+1) key of all positions except ``pos``, in order."""
        radix = self.vocab.size + 1
        key = 0
        for j, tok in enumerate(readout):
            if j == pos:
                continue
            key = key * radix + tok
        return key

    def row(self, pos: int, key: int) -> np.ndarray:
        if self._dense is not None:
            return self._dense[pos, key]
        cached = self._cache.get((pos, key))
        if cached is None:
            cached = _generate_rows(self.seed, pos, np.array([key], dtype=np.uint64),
                                    self.vocab.size, self.scale)[0]
            cached.flags.writeable = False
            self._cache[(pos, key)] = cached
        return cached

    def logits(self, view: MaskedView) -> list[tuple[int, np.ndarray]]:
        if view.base.length != self.length:
            raise ScorerFailure(f"model is fixed to length {self.length}, "
                                f"got {view.base.length}")
        readout = view.readout()
        return [(pos, self.row(pos, self.context_key(readout, pos)))
                for pos in sorted(view.masked)]

    @property
    def table(self) -> np.ndarray:
        """Single-mask rows, shape (T, |V|**(T-1), V).

        Entry ``[t, c]`` is the row at position ``t`` whose fully observed
        context spells ``c`` in big-endian base ``|V|``.
        """
        if self._table is None:
            self._table = np.stack(
                [self._position_block(t, masked_contexts=False) for t in range(self.length)])
            self._table.flags.writeable = False
        return self._table

    def _position_block(self, pos: int, masked_contexts: bool) -> np.ndarray:
        """All rows for one position, context keys ascending.

        With ``masked_contexts`` the block spans the extended alphabet
        (every digit in ``[0, |V|]``); otherwise only fully observed
        contexts, indexed in base ``|V|`` but keyed into the generator by
        their extended encoding.
        """
        V, T = self.vocab.size, self.length
        radix = V + 1 if masked_contexts else V
        n = radix ** (T - 1)
        if masked_contexts:
            keys = np.arange(n, dtype=np.uint64)
        else:
            place = radix ** np.arange(T - 2, -1, -1, dtype=np.int64)
            digits = (np.arange(n, dtype=np.int64)[:, None] // place[None, :]) % radix
            ext_place = (V + 1) ** np.arange(T - 2, -1, -1, dtype=np.uint64)
            keys = (digits.astype(np.uint64) * ext_place[None, :]).sum(axis=1, dtype=np.uint64)
        if self._dense is not None:
            return self._dense[pos] if masked_contexts else self._dense[pos, keys]
        return _generate_rows(self.seed, pos, keys, V, self.scale)


def tabular_model_generate(seed: int, vocab_size: int, length: int,
                           scale: float = DEFAULT_SCALE,
                           cap: int = DEFAULT_ROW_CAP) -> TabularMLM:
    """Build a deterministic tabular scorer.

    Rejects configurations whose single-mask row count ``T * |V|**(T-1)``
    exceeds ``cap``.
    """
    if vocab_size < 2:
        raise ValueError(f"vocab size must be >= 2, got {vocab_size}")
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if scale <= 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    rows = length * vocab_size ** (length - 1)
    if rows > cap or vocab_size > cap:
        raise StateSpaceTooLarge(f"{rows} rows of width {vocab_size} exceed "
                                 f"the cap of {cap}")
    return TabularMLM(Vocab(vocab_size), length, seed % 2**64, float(scale))


def save_tabular(model: TabularMLM, path) -> None:
    """Write a model file: SQMC header plus dense row-major float64 logits.

    The body covers the *extended* context alphabet (mask digit included),
    ``T * (|V|+1)**(T-1)`` rows in (position, context key) order, so a file
    consumer can answer any view, including multi-mask ones, by lookup.
    """
    V, T = model.vocab.size, model.length
    rows = T * (V + 1) ** (T - 1)
    if rows > DEFAULT_ROW_CAP:
        raise StateSpaceTooLarge(f"{rows} extended rows exceed {DEFAULT_ROW_CAP}")
    body = np.stack([model._position_block(t, masked_contexts=True) for t in range(T)])
    header = _HEADER.pack(_FILE_MAGIC, _FILE_VERSION, model.seed, V, T, model.scale)
    Path(path).write_bytes(header + body.astype("<f8").tobytes())


def load_tabular(path) -> TabularMLM:
    """Read a model file back into a dense, lookup-only :class:`TabularMLM`."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size or raw[:4] != _FILE_MAGIC:
        raise ValueError(f"{path}: not a SQMC model file")
    magic, version, seed, vocab_size, length, scale = _HEADER.unpack_from(raw)
    if version != _FILE_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    n = (vocab_size + 1) ** (length - 1)
    dense = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if dense.size != length * n * vocab_size:
        raise ValueError(f"{path}: body size mismatch")
    dense = dense.reshape(length, n, vocab_size).astype(np.float64)
    return TabularMLM(Vocab(vocab_size), length, seed, scale, _dense=dense)


@dataclass
class ProductModel:
    """Context-free scorer: position ``t`` always answers ``rows[t]``.

    Useful as a controlled fixture; with ``rows[t] = log p_t`` its masked
    conditionals are the exact conditionals of the independent joint
    ``prod_t p_t`` and both energies equal that joint's negative log mass
    up to normalization.
    """

    vocab: Vocab
    length: int
    rows: np.ndarray  # (T, V)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.shape != (self.length, self.vocab.size):
            raise ValueError(f"rows must have shape ({self.length}, {self.vocab.size})")

    def logits(self, view: MaskedView) -> list[tuple[int, np.ndarray]]:
        if view.base.length != self.length:
            raise ScorerFailure(f"model is fixed to length {self.length}, "
                                f"got {view.base.length}")
        return [(pos, self.rows[pos]) for pos in sorted(view.masked)]


def zero_model(vocab_size: int, length: int) -> ProductModel:
    """All-zero logits: uniform conditionals and constant energy."""
    return ProductModel(Vocab(vocab_size), length, np.zeros((length, vocab_size)))


def constant_model(vocab_size: int, length: int, row) -> ProductModel:
    """The same logit row at every position and context."""
    rows = np.tile(np.asarray(row, dtype=np.float64), (length, 1))
    return ProductModel(Vocab(vocab_size), length, rows)
