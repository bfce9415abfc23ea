"""Reads JSONL datasets and emits EMB1/TRP1 files for the simulator."""

from __future__ import annotations

import numpy as np
from cimrag.formats import write_emb1, write_trp1
from cimrag.formats import ingest as ingest_dataset
from cimrag.training import CDE_SEPARATOR

from .encoder import SentenceEncoder
from .job import ExportJob, ExportMode


def export_embeddings(job: ExportJob, encoder: SentenceEncoder | None = None) -> int:
    """One normalized fp32 row per record, in file order. Returns row count."""
    records = ingest_dataset(job.input_path)
    if not records:
        raise ValueError(f"{job.input_path}: empty dataset")
    encoder = encoder or SentenceEncoder(job.model_id)
    matrix = encoder.encode(
        [r.content for r in records], dropout=0.0, seed=job.seed,
        batch_size=job.batch_size,
    )
    write_emb1(job.output_path, matrix, ids=[r.id for r in records])
    return matrix.shape[0]


def export_triplets(job: ExportJob, encoder: SentenceEncoder | None = None) -> int:
    """n x K anchor/positive/negative groups into TRP1. Returns group count.

    Anchors are encoded with dropout off. Positives re-encode the anchor text
    with in-model dropout r. Negatives are foreign-label concatenations
    (CDE, dropout off) or heavy-dropout re-encodings at rate 1 - r (CDI).
    """
    if job.mode is ExportMode.EMBEDDINGS:
        raise ValueError("export_triplets needs a triplet mode")
    records = ingest_dataset(job.input_path)
    if not records:
        raise ValueError(f"{job.input_path}: empty dataset")
    encoder = encoder or SentenceEncoder(job.model_id)
    k = job.k_factor

    if job.mode is ExportMode.CDE_TRIPLETS:
        if any(r.label is None for r in records):
            raise ValueError("CDE export requires a label on every record")
        distinct = sorted({str(r.label) for r in records})
        if len(distinct) < 2:
            raise ValueError("CDE export requires at least 2 distinct labels")
        rng = np.random.default_rng(job.seed)
        anchor_texts = [r.content + CDE_SEPARATOR + str(r.label) for r in records]
        negative_texts = []
        for rec in records:
            foreign = [l for l in distinct if l != str(rec.label)]
            picks = rng.choice(len(foreign), size=k, replace=k > len(foreign))
            negative_texts.extend(rec.content + CDE_SEPARATOR + foreign[j] for j in picks)
        negatives = encoder.encode(
            negative_texts, dropout=0.0, seed=job.seed, batch_size=job.batch_size
        )
    else:
        anchor_texts = [r.content for r in records]
        negatives = np.repeat(
            encoder.encode(
                anchor_texts, dropout=1.0 - job.dropout, seed=job.seed + 2,
                batch_size=job.batch_size,
            ),
            k, axis=0,
        )
        # Re-encode per copy so the K negatives of a record differ.
        if k > 1:
            extra = [
                encoder.encode(
                    anchor_texts, dropout=1.0 - job.dropout, seed=job.seed + 2 + i,
                    batch_size=job.batch_size,
                )
                for i in range(1, k)
            ]
            stacked = np.stack(
                [negatives[::k]] + extra, axis=1
            )
            negatives = stacked.reshape(len(records) * k, -1)

    anchors = np.repeat(
        encoder.encode(
            anchor_texts, dropout=0.0, seed=job.seed, batch_size=job.batch_size
        ),
        k, axis=0,
    )
    positive_views = [
        encoder.encode(
            anchor_texts, dropout=job.dropout, seed=job.seed + 100 + i,
            batch_size=job.batch_size,
        )
        for i in range(k)
    ]
    positives = np.stack(positive_views, axis=1).reshape(len(records) * k, -1)

    write_trp1(job.output_path, anchors, positives, negatives)
    return len(records) * k


def run(job: ExportJob, encoder: SentenceEncoder | None = None) -> int:
    if job.mode is ExportMode.EMBEDDINGS:
        return export_embeddings(job, encoder)
    return export_triplets(job, encoder)
