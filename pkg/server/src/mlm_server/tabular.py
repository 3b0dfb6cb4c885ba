"""Reader for tabular scorer model files (magic ``SQMC``, version 1).

The file is little-endian: a 32-byte header (magic, version u32, seed u64,
vocab_size u32, length u32, scale f64) followed by
``length * (vocab_size + 1) ** (length - 1)`` rows of ``vocab_size``
float64 logits in (position, context key) order.  A context key encodes
the tokens at every position except the scored one, big-endian in base
``vocab_size + 1``; the mask id (== vocab_size) is its own digit, so rows
exist for every view, however many positions are masked.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_MAGIC = b"SQMC"
_VERSION = 1
_HEADER = struct.Struct("<4sIQIId")


class TabularModelError(ValueError):
    pass


class TabularModel:
    def __init__(self, path):
        raw = Path(path).read_bytes()
        if len(raw) < _HEADER.size or raw[:4] != _MAGIC:
            raise TabularModelError(f"{path}: not a tabular model file")
        _, version, self.seed, self.vocab_size, self.length, self.scale = \
            _HEADER.unpack_from(raw)
        if version != _VERSION:
            raise TabularModelError(f"{path}: unsupported version {version}")
        contexts = (self.vocab_size + 1) ** (self.length - 1)
        body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
        if body.size != self.length * contexts * self.vocab_size:
            raise TabularModelError(f"{path}: body size mismatch")
        self.rows_by_key = body.reshape(self.length, contexts, self.vocab_size)

    @property
    def mask_id(self) -> int:
        return self.vocab_size

    def context_key(self, tokens, pos: int) -> int:
        radix = self.vocab_size + 1
        key = 0
        for j, tok in enumerate(tokens):
            if j != pos:
                key = key * radix + tok
        return key

    def row(self, tokens, pos: int) -> np.ndarray:
        return self.rows_by_key[pos, self.context_key(tokens, pos)]
