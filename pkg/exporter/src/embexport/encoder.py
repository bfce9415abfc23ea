"""Sentence encoding with optional in-model dropout.

Mean pooling over the final hidden states followed by L2 normalization, the
standard sentence-transformers recipe. Dropout variants are produced the
SimCSE way: the model's own dropout layers are kept active at inference with
their rate overridden, under a seeded torch generator.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from transformers import AutoModel, AutoTokenizer


class SentenceEncoder:
    """A tokenizer-model pair exposing deterministic batched encoding."""

    def __init__(self, model_id: str):
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise RuntimeError(f"failed to load model {model_id!r}: {exc}") from exc
        self.model.eval()

    @property
    def dim(self) -> int:
        return int(self.model.config.hidden_size)

    def _set_dropout(self, rate: float) -> None:
        for module in self.model.modules():
            if isinstance(module, nn.Dropout):
                module.p = rate

    def encode(
        self,
        texts: list[str],
        dropout: float = 0.0,
        seed: int = 0,
        batch_size: int = 32,
    ) -> np.ndarray:
        """L2-normalized fp32 embeddings, one row per text in input order.

        dropout > 0 runs the model in train mode with every dropout layer set
        to that rate; the torch seed makes the stochastic pass reproducible.
        """
        if not texts:
            raise ValueError("empty text list")
        torch.manual_seed(seed)
        if dropout > 0.0:
            self._set_dropout(dropout)
            self.model.train()
        else:
            self.model.eval()
        rows = []
        try:
            with torch.no_grad():
                for start in range(0, len(texts), batch_size):
                    batch = texts[start : start + batch_size]
                    tokens = self.tokenizer(
                        batch, padding=True, truncation=True, return_tensors="pt"
                    )
                    hidden = self.model(**tokens).last_hidden_state
                    mask = tokens["attention_mask"].unsqueeze(-1).float()
                    pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1e-9)
                    pooled = torch.nn.functional.normalize(pooled, dim=1)
                    rows.append(pooled.cpu().numpy().astype(np.float32))
        finally:
            self.model.eval()
            self._set_dropout(0.0)
        return np.concatenate(rows, axis=0)
