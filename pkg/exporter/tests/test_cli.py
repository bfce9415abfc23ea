"""Exporter CLI tests."""

from __future__ import annotations

from cimrag.formats import read_emb1, read_trp1

from embexport.cli import main


def test_cli_embeddings(tmp_path, dataset_path, tiny_model_dir):
    out = tmp_path / "vecs.emb1"
    rc = main(
        ["--input", str(dataset_path), "--output", str(out),
         "--model", tiny_model_dir]
    )
    assert rc == 0
    matrix, _ = read_emb1(out)
    assert matrix.shape == (24, 32)


def test_cli_cdi_triplets(tmp_path, dataset_path, tiny_model_dir):
    out = tmp_path / "cdi.trp1"
    rc = main(
        ["--input", str(dataset_path), "--output", str(out),
         "--mode", "CdiTriplets", "--k", "2", "--dropout", "0.1",
         "--model", tiny_model_dir]
    )
    assert rc == 0
    anchors, _, _ = read_trp1(out)
    assert anchors.shape == (48, 32)


def test_cli_error_paths(tmp_path, tiny_model_dir, capsys):
    rc = main(
        ["--input", str(tmp_path / "missing.jsonl"),
         "--output", str(tmp_path / "o.emb1"), "--model", tiny_model_dir]
    )
    assert rc == 1
    assert "error:" in capsys.readouterr().err
    rc = main(
        ["--input", str(tmp_path / "missing.jsonl"),
         "--output", str(tmp_path / "o.trp1"), "--mode", "CdiTriplets",
         "--dropout", "0.5", "--model", tiny_model_dir]
    )
    assert rc == 1
