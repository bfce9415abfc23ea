"""Sentence-model embedding exporter for the CiM retrieval simulator."""

from .encoder import SentenceEncoder
from .export import export_embeddings, export_triplets, run
from .job import DEFAULT_MODEL, ExportJob, ExportMode

__all__ = [
    "DEFAULT_MODEL",
    "ExportJob",
    "ExportMode",
    "SentenceEncoder",
    "export_embeddings",
    "export_triplets",
    "run",
]

__version__ = "0.1.0"
