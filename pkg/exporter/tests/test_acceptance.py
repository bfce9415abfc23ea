"""Exporter acceptance gate: round-trip through the primary validators."""

from __future__ import annotations

import json
import time

import numpy as np
from cimrag.formats import read_emb1, read_trp1

from embexport import ExportJob, ExportMode, SentenceEncoder, export_triplets


def report(num, name, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\ncriterion {num} ({name}): {status} [{detail}]")
    assert ok, f"criterion {num} ({name}): {detail}"


def test_criterion_9_exporter_round_trip(tmp_path, tiny_model_dir):
    start = time.monotonic()
    rows = [
        {
            "id": i,
            "content": f"synthetic document {i} mentions topic {i % 6}",
            "label": f"topic {i % 6}",
        }
        for i in range(2000)
    ]
    dataset = tmp_path / "docs.jsonl"
    dataset.write_text("\n".join(json.dumps(r) for r in rows))
    encoder = SentenceEncoder(tiny_model_dir)

    cde_out = tmp_path / "cde.trp1"
    groups = export_triplets(
        ExportJob(
            str(dataset), str(cde_out), mode=ExportMode.CDE_TRIPLETS,
            dropout=0.1, k_factor=5, batch_size=128,
        ),
        encoder,
    )
    anchors, positives, negatives = read_trp1(cde_out)
    cde_ok = groups == 10000 and anchors.shape == (10000, encoder.dim)
    cde_ok = cde_ok and positives.shape == anchors.shape == negatives.shape

    cdi_out = tmp_path / "cdi.trp1"
    export_triplets(
        ExportJob(
            str(dataset), str(cdi_out), mode=ExportMode.CDI_TRIPLETS,
            dropout=0.1, k_factor=2, batch_size=128,
        ),
        encoder,
    )
    a, p, n = read_trp1(cdi_out)
    cos_ap = float(np.mean(np.sum(a * p, axis=1)))
    cos_an = float(np.mean(np.sum(a * n, axis=1)))
    cdi_ok = cos_ap > cos_an

    elapsed = time.monotonic() - start
    report(
        9, "exporter round-trip",
        cde_ok and cdi_ok,
        f"CDE groups {groups} (expected 10000), CDI cos(a,p) {cos_ap:.3f} > "
        f"cos(a,n) {cos_an:.3f}, validators ok, {elapsed:.0f}s",
    )
