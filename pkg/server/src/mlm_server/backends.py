"""Scoring backends: a tabular model file or a pretrained masked LM.

A backend answers one request shape: given a token-id list with the
backend's mask id at the masked slots and the sorted list of masked
positions, return one row of raw (pre-softmax) logits per masked position
with every requested position masked simultaneously.
"""

from __future__ import annotations

from .tabular import TabularModel


class RequestError(ValueError):
    """The request violates the protocol; reported, connection stays open."""


class TabularBackend:
    def __init__(self, path):
        self._model = TabularModel(path)
        self.vocab_size = self._model.vocab_size
        self.mask_id = self._model.mask_id
        self.max_length = self._model.length
        self.name = f"tabular:{self._model.seed}"

    def rows(self, tokens: list[int], masked: list[int]) -> list[list[float]]:
        if len(tokens) != self._model.length:
            raise RequestError(f"model is fixed to length {self._model.length}, "
                               f"got {len(tokens)}")
        for i, tok in enumerate(tokens):
            if i in masked:
                if tok != self.mask_id:
                    raise RequestError(f"masked slot {i} must carry mask id "
                                       f"{self.mask_id}, got {tok}")
            elif not 0 <= tok < self.vocab_size:
                raise RequestError(f"token {tok} at position {i} is out of range")
        return [self._model.row(tokens, pos).tolist() for pos in masked]


class PretrainedBackend:
    """Wraps a masked language model with the usual transformers call shape.

    One forward pass per request, all requested positions masked at once;
    inference runs deterministically (eval mode, no gradients).  The
    vocabulary is served as-is: ids are the model's own, and the mask id
    is the tokenizer's mask token.
    """

    def __init__(self, model, tokenizer, device: str = "cpu", name: str = "pretrained"):
        import torch

        self._torch = torch
        self._model = model.eval().to(device)
        self._device = device
        self.vocab_size = int(model.config.vocab_size)
        self.mask_id = int(tokenizer.mask_token_id)
        self.max_length = int(model.config.max_position_embeddings)
        self.name = name

    @classmethod
    def load(cls, name: str, device: str = "cpu") -> "PretrainedBackend":
        from transformers import AutoModelForMaskedLM, AutoTokenizer

        model = AutoModelForMaskedLM.from_pretrained(name)
        tokenizer = AutoTokenizer.from_pretrained(name)
        return cls(model, tokenizer, device=device, name=name)

    def rows(self, tokens: list[int], masked: list[int]) -> list[list[float]]:
        if len(tokens) > self.max_length:
            raise RequestError(f"sequence length {len(tokens)} exceeds "
                               f"max_length {self.max_length}")
        for i in masked:
            if tokens[i] != self.mask_id:
                raise RequestError(f"masked slot {i} must carry mask id {self.mask_id}")
        torch = self._torch
        with torch.no_grad():
            input_ids = torch.tensor([tokens], dtype=torch.long, device=self._device)
            logits = self._model(input_ids=input_ids).logits[0]
        return [logits[pos, : self.vocab_size].tolist() for pos in masked]
