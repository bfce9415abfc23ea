"""Compute-in-memory retrieval simulator with noise-robust embedding training."""

from .codec import ProjectionHead, QuantSpec, hash_embed
from .crossbar import (
    EmbeddingMatrix,
    ProgrammedIndex,
    RetrievalResult,
    WriteVerifyConfig,
    mips,
    mips_batch,
    mips_exact,
    program,
)
from .devices import (
    DeviceProfile,
    NoiseConfig,
    NoiseMode,
    builtin_devices,
    device_by_name,
    perturb_embedding_naive,
    sample_cell_noise,
)
from .formats import DocumentRecord, ingest, read_emb1, read_trp1, write_emb1, write_trp1
from .synthetic import make_clustered_corpus, make_random_corpus
from .training import (
    HashEmbedder,
    TrainConfig,
    TrainReport,
    TripletSet,
    construct_cde,
    construct_cdi,
    dropout_embed,
    noisy_forward,
    train,
    triplet_loss,
)

__all__ = [
    "DeviceProfile",
    "DocumentRecord",
    "EmbeddingMatrix",
    "HashEmbedder",
    "NoiseConfig",
    "NoiseMode",
    "ProgrammedIndex",
    "ProjectionHead",
    "QuantSpec",
    "RetrievalResult",
    "TrainConfig",
    "TrainReport",
    "TripletSet",
    "WriteVerifyConfig",
    "builtin_devices",
    "construct_cde",
    "construct_cdi",
    "device_by_name",
    "dropout_embed",
    "hash_embed",
    "ingest",
    "make_clustered_corpus",
    "make_random_corpus",
    "mips",
    "mips_batch",
    "mips_exact",
    "noisy_forward",
    "perturb_embedding_naive",
    "program",
    "read_emb1",
    "read_trp1",
    "sample_cell_noise",
    "train",
    "triplet_loss",
    "write_emb1",
    "write_trp1",
]

__version__ = "0.1.0"
