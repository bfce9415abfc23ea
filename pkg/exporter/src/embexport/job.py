"""Export job description and validation."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

DEFAULT_MODEL = "sentence-transformers/all-MiniLM-L6-v2"


class ExportMode(str, Enum):
    EMBEDDINGS = "Embeddings"
    CDE_TRIPLETS = "CdeTriplets"
    CDI_TRIPLETS = "CdiTriplets"


@dataclass(frozen=True)
class ExportJob:
    """One export run: a dataset in, one EMB1 or TRP1 file out."""

    input_path: str
    output_path: str
    mode: ExportMode = ExportMode.EMBEDDINGS
    model_id: str = DEFAULT_MODEL
    dropout: float = 0.1
    k_factor: int = 5
    seed: int = 0
    batch_size: int = 32

    def __post_init__(self):
        if self.mode is not ExportMode.EMBEDDINGS and not 0.0 < self.dropout <= 0.2:
            raise ValueError(
                f"triplet modes need dropout in (0, 0.2], got {self.dropout}"
            )
        if self.k_factor < 1:
            raise ValueError("k_factor must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
