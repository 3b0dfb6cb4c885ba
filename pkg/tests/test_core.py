import numpy as np
import pytest

from seqmc import MaskedView, Vocab, apply_mask, sequence_new
from seqmc.errors import EmptySequence, PositionOutOfRange, TokenOutOfRange


def test_vocab_mask_id_is_size():
    v = Vocab(5)
    assert v.mask_id == 5
    with pytest.raises(ValueError):
        Vocab(1)


def test_sequence_new_accepts_in_range_tokens():
    seq = sequence_new([0, 1, 0], Vocab(2))
    assert seq.length == 3
    assert seq.tokens == (0, 1, 0)


def test_sequence_new_rejects_empty():
    with pytest.raises(EmptySequence):
        sequence_new([], Vocab(2))


def test_sequence_new_rejects_out_of_range():
    with pytest.raises(TokenOutOfRange) as err:
        sequence_new([0, 5], Vocab(2))
    assert err.value.position == 1
    assert err.value.token == 5


def test_sequence_new_rejects_mask_sentinel():
    # the sentinel equals vocab size and is not a legal ordinary token
    with pytest.raises(TokenOutOfRange):
        sequence_new([0, 2], Vocab(2))


def test_apply_mask_reads_sentinel_at_masked_positions():
    seq = sequence_new([0, 1, 1], Vocab(2))
    view = apply_mask(seq, {1})
    assert view.readout() == (0, 2, 1)
    assert view[1] == seq.vocab.mask_id


def test_apply_mask_empty_set_reads_like_base():
    seq = sequence_new([0, 1], Vocab(2))
    view = apply_mask(seq, set())
    assert view.readout() == seq.tokens


def test_apply_mask_rejects_out_of_range_position():
    seq = sequence_new([0, 1], Vocab(2))
    with pytest.raises(PositionOutOfRange):
        apply_mask(seq, {5})


def test_mask_round_trip_leaves_base_untouched():
    rng = np.random.default_rng(3)
    vocab = Vocab(4)
    for _ in range(50):
        length = int(rng.integers(1, 9))
        tokens = tuple(int(t) for t in rng.integers(0, 4, size=length))
        seq = sequence_new(tokens, vocab)
        positions = {int(p) for p in rng.integers(0, length, size=length // 2 + 1)}
        view = apply_mask(seq, positions)
        assert view.base.tokens == tokens
        unmasked = tuple(seq.tokens[i] if i in positions else view[i]
                         for i in range(length))
        assert unmasked == tokens


def test_replace_validates_inputs():
    seq = sequence_new([0, 1], Vocab(2))
    assert seq.replace(0, 1).tokens == (1, 1)
    assert seq.tokens == (0, 1)
    with pytest.raises(PositionOutOfRange):
        seq.replace(2, 0)
    with pytest.raises(TokenOutOfRange):
        seq.replace(0, 2)


def test_views_are_values():
    seq = sequence_new([0, 1, 0], Vocab(2))
    a = MaskedView(seq, frozenset({1}))
    b = MaskedView(seq, frozenset({1}))
    assert a == b
