"""Token, vocabulary, and sequence primitives.

All types here are immutable values: safe to share between concurrently
running chains without synchronization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EmptySequence, PositionOutOfRange, TokenOutOfRange

MAX_LENGTH = 1024


@dataclass(frozen=True)
class Vocab:
    """An ordinary-token alphabet of ``size`` ids plus one mask sentinel.

    Ordinary tokens are the ids ``0 .. size-1``; the mask sentinel is the
    single id ``size`` and never appears in a finalized sample.
    """

    size: int

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"vocab size must be >= 2, got {self.size}")

    @property
    def mask_id(self) -> int:
        return self.size


@dataclass(frozen=True)
class Sequence:
    """A fixed-length string of validated ordinary token ids."""

    tokens: tuple[int, ...]
    vocab: Vocab

    @property
    def length(self) -> int:
        return len(self.tokens)

    def replace(self, pos: int, token: int) -> "Sequence":
        """Return a copy with ``pos`` set to ``token``."""
        if not 0 <= pos < self.length:
            raise PositionOutOfRange(f"position {pos} not in [0, {self.length})")
        if not 0 <= token < self.vocab.size:
            raise TokenOutOfRange(pos, token)
        tokens = list(self.tokens)
        tokens[pos] = token
        return Sequence(tuple(tokens), self.vocab)


def sequence_new(tokens, vocab: Vocab) -> Sequence:
    """Validate ``tokens`` and wrap them as a :class:`Sequence`.

    Rejects empty input and any id outside ``[0, vocab.size)``; the mask
    sentinel is not a legal token in a finalized sequence.
    """
    tokens = tuple(int(t) for t in tokens)
    if not tokens:
        raise EmptySequence("a sequence needs at least one token")
    if len(tokens) > MAX_LENGTH:
        raise ValueError(f"length {len(tokens)} exceeds maximum {MAX_LENGTH}")
    for i, t in enumerate(tokens):
        if not 0 <= t < vocab.size:
            raise TokenOutOfRange(i, t)
    return Sequence(tokens, vocab)


@dataclass(frozen=True)
class MaskedView:
    """A read-only overlay that replaces a set of positions with the mask id.

    The underlying sequence is untouched; reading a masked position yields
    ``vocab.mask_id`` and every other position its base token.
    """

    base: Sequence
    masked: frozenset[int] = field(default_factory=frozenset)

    def __getitem__(self, pos: int) -> int:
        if not 0 <= pos < self.base.length:
            raise PositionOutOfRange(f"position {pos} not in [0, {self.base.length})")
        if pos in self.masked:
            return self.base.vocab.mask_id
        return self.base.tokens[pos]

    def readout(self) -> tuple[int, ...]:
        """All positions as read through the mask."""
        return tuple(self[i] for i in range(self.base.length))


def apply_mask(seq: Sequence, positions) -> MaskedView:
    """View ``seq`` with ``positions`` masked out.

    Raises :class:`PositionOutOfRange` for any index outside ``[0, T)``.
    """
    positions = frozenset(int(p) for p in positions)
    for p in positions:
        if not 0 <= p < seq.length:
            raise PositionOutOfRange(f"position {p} not in [0, {seq.length})")
    return MaskedView(seq, positions)
