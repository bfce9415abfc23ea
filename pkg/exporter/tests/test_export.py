"""Exporter unit tests against a local random-init model."""

from __future__ import annotations

import numpy as np
import pytest
from cimrag.formats import read_emb1, read_trp1

from embexport import (
    ExportJob,
    ExportMode,
    SentenceEncoder,
    export_embeddings,
    export_triplets,
)


@pytest.fixture(scope="session")
def encoder(tiny_model_dir):
    return SentenceEncoder(tiny_model_dir)


def test_job_validation(tmp_path):
    with pytest.raises(ValueError):
        ExportJob("in", "out", mode=ExportMode.CDI_TRIPLETS, dropout=0.5)
    with pytest.raises(ValueError):
        ExportJob("in", "out", mode=ExportMode.CDE_TRIPLETS, dropout=0.0)
    with pytest.raises(ValueError):
        ExportJob("in", "out", k_factor=0)
    # Dropout range only constrains triplet modes.
    ExportJob("in", "out", mode=ExportMode.EMBEDDINGS, dropout=0.9)


def test_encoder_loads_and_reports_dim(encoder):
    assert encoder.dim == 32


def test_encoder_load_failure():
    with pytest.raises(RuntimeError, match="no-such-model"):
        SentenceEncoder("/tmp/no-such-model-anywhere")


def test_export_embeddings_header_and_norms(tmp_path, dataset_path, encoder):
    out = tmp_path / "vecs.emb1"
    job = ExportJob(str(dataset_path), str(out))
    count = export_embeddings(job, encoder)
    matrix, ids = read_emb1(out)
    assert count == 24
    assert matrix.shape == (24, encoder.dim)
    assert ids == list(range(24))
    np.testing.assert_allclose(np.linalg.norm(matrix, axis=1), 1.0, atol=1e-6)


def test_export_embeddings_deterministic(tmp_path, dataset_path, encoder):
    a, b = tmp_path / "a.emb1", tmp_path / "b.emb1"
    export_embeddings(ExportJob(str(dataset_path), str(a), seed=7), encoder)
    export_embeddings(ExportJob(str(dataset_path), str(b), seed=7), encoder)
    assert a.read_bytes() == b.read_bytes()


def test_export_embeddings_empty_dataset(tmp_path, encoder):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(ValueError):
        export_embeddings(ExportJob(str(empty), str(tmp_path / "o.emb1")), encoder)


def test_export_cde_triplets(tmp_path, dataset_path, encoder):
    out = tmp_path / "cde.trp1"
    job = ExportJob(
        str(dataset_path), str(out), mode=ExportMode.CDE_TRIPLETS,
        dropout=0.1, k_factor=3,
    )
    count = export_triplets(job, encoder)
    assert count == 24 * 3
    anchors, positives, negatives = read_trp1(out)
    assert anchors.shape == (72, encoder.dim)
    # The K negatives of one record share its anchor row.
    np.testing.assert_array_equal(anchors[0], anchors[2])
    assert not np.array_equal(negatives[0], anchors[0])
    cos_ap = np.sum(anchors * positives, axis=1)
    assert cos_ap.mean() > 0.5


def test_export_cde_requires_labels(tmp_path, encoder):
    unlabeled = tmp_path / "unlabeled.jsonl"
    unlabeled.write_text('{"id": 0, "content": "a doc"}\n{"id": 1, "content": "b doc"}')
    job = ExportJob(
        str(unlabeled), str(tmp_path / "x.trp1"), mode=ExportMode.CDE_TRIPLETS
    )
    with pytest.raises(ValueError, match="label"):
        export_triplets(job, encoder)


def test_export_cdi_triplets_cosine_ordering(tmp_path, dataset_path, encoder):
    out = tmp_path / "cdi.trp1"
    job = ExportJob(
        str(dataset_path), str(out), mode=ExportMode.CDI_TRIPLETS,
        dropout=0.1, k_factor=2,
    )
    count = export_triplets(job, encoder)
    assert count == 48
    anchors, positives, negatives = read_trp1(out)
    assert anchors.shape[1] == encoder.dim
    cos_ap = np.mean(np.sum(anchors * positives, axis=1))
    cos_an = np.mean(np.sum(anchors * negatives, axis=1))
    assert cos_ap > cos_an
    # Distinct dropout draws give distinct negative views per record.
    assert not np.array_equal(negatives[0], negatives[1])


def test_export_triplets_deterministic(tmp_path, dataset_path, encoder):
    a, b = tmp_path / "a.trp1", tmp_path / "b.trp1"
    for path in (a, b):
        export_triplets(
            ExportJob(
                str(dataset_path), str(path), mode=ExportMode.CDI_TRIPLETS,
                dropout=0.1, k_factor=2, seed=3,
            ),
            encoder,
        )
    assert a.read_bytes() == b.read_bytes()


def test_export_triplets_rejects_embeddings_mode(tmp_path, dataset_path, encoder):
    job = ExportJob(str(dataset_path), str(tmp_path / "x.trp1"))
    with pytest.raises(ValueError):
        export_triplets(job, encoder)
