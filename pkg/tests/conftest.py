import numpy as np
import pytest

from seqmc import Vocab, tabular_model_generate, zero_model


@pytest.fixture
def vocab3():
    return Vocab(3)


@pytest.fixture
def zero33():
    return zero_model(3, 3)


@pytest.fixture
def tab733():
    """The seeded toy model most DERIVED checks run against."""
    return tabular_model_generate(7, 3, 3)


def context_key_oracle(readout, pos, vocab_size):
    """Independent re-derivation of the tabular context key.

    Big-endian base (|V|+1) over every position except ``pos``; the mask
    sentinel contributes the digit |V|.
    """
    key = 0
    for j, tok in enumerate(readout):
        if j != pos:
            key = key * (vocab_size + 1) + tok
    return key


def dense_key_oracle(tokens, pos, vocab_size):
    """Context key of a fully observed sequence, for table indexing."""
    key = 0
    for j, tok in enumerate(tokens):
        if j != pos:
            key = key * vocab_size + tok
    return key


def raw_energy_oracle(model, tokens):
    """Brute-force raw energy by direct table lookup and summation."""
    total = 0.0
    for t, tok in enumerate(tokens):
        ctx = dense_key_oracle(tokens, t, model.vocab.size)
        total += model.table[t, ctx][tok]
    return -total


def rng(seed=0):
    return np.random.default_rng(seed)
