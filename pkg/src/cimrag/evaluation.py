"""Retrieval-quality metrics, sigma sweeps, and device comparison grids.

The reference ranking is the zero-noise crossbar ranking under the same head
(so noise effects are isolated from quantization effects); an fp32 reference
is available as an option. Downstream generation is replaced by a top-k
majority-vote label proxy.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import ProjectionHead, QuantSpec, project, project_batch, quantize
from .crossbar import (
    EmbeddingMatrix,
    RetrievalResult,
    WriteVerifyConfig,
    _rank,
    mips,
    mips_batch,
    mips_exact,
    program,
)
from .devices import DeviceProfile, NoiseConfig, perturb_embedding_naive

CSV_HEADER = [
    "sigma_scale",
    "device",
    "method",
    "top1_match_rate",
    "topk_overlap",
    "accuracy",
    "macro_f1",
    "mae",
    "rmse",
    "seed_count",
]


@dataclass(frozen=True)
class MipsAccuracyReport:
    top1_match_rate: float
    topk_overlap: float
    k: int
    n_queries: int
    sigma_scale: float
    device: str
    seeds: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "top1_match_rate": self.top1_match_rate,
            "topk_overlap": self.topk_overlap,
            "k": self.k,
            "n_queries": self.n_queries,
            "sigma_scale": self.sigma_scale,
            "device": self.device,
            "seeds": list(self.seeds),
        }


@dataclass(frozen=True)
class ProxyMetricsReport:
    task: str  # "Classification" | "Regression"
    accuracy: float = 0.0
    macro_f1: float = 0.0
    mae: float | None = None
    rmse: float | None = None

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "mae": self.mae,
            "rmse": self.rmse,
        }


def mips_accuracy(
    noisy: list[RetrievalResult],
    clean: list[RetrievalResult],
    sigma_scale: float = 0.0,
    device: str = "",
    seeds: tuple[int, ...] = (),
) -> MipsAccuracyReport:
    """Fraction of matching top-1 ids and mean top-k set overlap."""
    if len(noisy) != len(clean) or not noisy:
        raise ValueError("result lists must be nonempty and paired")
    clean_by_id = {r.query_id: r for r in clean}
    if set(clean_by_id) != {r.query_id: None for r in noisy}.keys():
        raise ValueError("unpaired query ids")
    top1 = 0
    overlap = 0.0
    k = noisy[0].k
    for nr in noisy:
        cr = clean_by_id[nr.query_id]
        if nr.k != cr.k:
            raise ValueError(f"query {nr.query_id}: k mismatch")
        if nr.ranked and cr.ranked and nr.ranked[0][0] == cr.ranked[0][0]:
            top1 += 1
        overlap += len(set(nr.top_ids()) & set(cr.top_ids())) / nr.k
    return MipsAccuracyReport(
        top1_match_rate=top1 / len(noisy),
        topk_overlap=overlap / len(noisy),
        k=k,
        n_queries=len(noisy),
        sigma_scale=sigma_scale,
        device=device,
        seeds=seeds,
    )


def _majority_vote(labels: list) -> object:
    counts: dict = {}
    for l in labels:
        counts[l] = counts.get(l, 0) + 1
    best = max(counts.values())
    for l in labels:  # ties go to the highest-ranked tied doc
        if counts[l] == best:
            return l
    raise AssertionError("unreachable")


def macro_f1_score(y_true: list, y_pred: list) -> float:
    classes = sorted({str(c) for c in y_true} | {str(c) for c in y_pred})
    f1s = []
    for c in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if str(t) == c and str(p) == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if str(t) != c and str(p) == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if str(t) == c and str(p) != c)
        f1s.append(2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0)
    return float(np.mean(f1s)) if f1s else 0.0


def proxy_metrics(
    results: list[RetrievalResult],
    profile_labels: dict[int, object],
    query_labels: dict[int, object],
    task: str,
    vote_k: int = 1,
) -> ProxyMetricsReport:
    """Majority-vote label of the top retrieved docs, scored against truth."""
    preds, truths = [], []
    for res in results:
        top = list(res.top_ids())[:vote_k]
        for doc_id in top:
            if doc_id not in profile_labels or profile_labels[doc_id] is None:
                raise ValueError(f"doc {doc_id} has no label")
        if res.query_id not in query_labels:
            raise ValueError(f"query {res.query_id} has no label")
        preds.append(_majority_vote([profile_labels[d] for d in top]))
        truths.append(query_labels[res.query_id])
    if task == "Regression":
        p = np.asarray(preds, dtype=np.float64)
        t = np.asarray(truths, dtype=np.float64)
        err = p - t
        acc = float(np.mean(p == t))
        return ProxyMetricsReport(
            task=task,
            accuracy=acc,
            macro_f1=macro_f1_score(truths, preds),
            mae=float(np.mean(np.abs(err))),
            rmse=float(np.sqrt(np.mean(err**2))),
        )
    acc = float(np.mean([str(p) == str(t) for p, t in zip(preds, truths)]))
    return ProxyMetricsReport(task=task, accuracy=acc, macro_f1=macro_f1_score(truths, preds))


def clean_results(
    corpus: EmbeddingMatrix,
    head: ProjectionHead,
    queries: np.ndarray,
    k: int,
    device: DeviceProfile,
    quant: QuantSpec,
    fp32_reference: bool = False,
) -> list[RetrievalResult]:
    """Zero-noise reference rankings (quantized crossbar by default)."""
    if fp32_reference:
        return [mips_exact(corpus, head, q, k, query_id=i) for i, q in enumerate(queries)]
    zero = NoiseConfig(sigma_scale=0.0, seed=0)
    index = program(corpus, head, device, quant, zero)
    return mips_batch(index, head, queries, k)


def noisy_results(
    corpus: EmbeddingMatrix,
    head: ProjectionHead,
    queries: np.ndarray,
    k: int,
    device: DeviceProfile,
    quant: QuantSpec,
    noise: NoiseConfig,
    write_verify: WriteVerifyConfig | None = None,
) -> list[RetrievalResult]:
    index = program(corpus, head, device, quant, noise, write_verify)
    return mips_batch(index, head, queries, k)


def gap_filter(
    clean: list[RetrievalResult], quant: QuantSpec, lsb_gap: float = 2.0
) -> list[int]:
    """Query ids whose clean top-2 score gap exceeds `lsb_gap` quantization LSBs.

    Crossbar scores are integer dot products; one embedding LSB corresponds to
    qmax integer score units for a full-scale counterpart coordinate sum.
    """
    keep = []
    threshold = lsb_gap * quant.qmax
    for res in clean:
        if len(res.ranked) < 2 or (res.ranked[0][1] - res.ranked[1][1]) > threshold:
            keep.append(res.query_id)
    return keep


def sweep_sigma(
    corpus: EmbeddingMatrix,
    queries: np.ndarray,
    head: ProjectionHead,
    device: DeviceProfile,
    quant: QuantSpec,
    sigma_list: list[float],
    seeds: list[int],
    k: int = 1,
    write_verify: WriteVerifyConfig | None = None,
) -> list[dict]:
    """Mean/std of top-1 match rate per sigma, against the zero-noise reference."""
    if not sigma_list:
        raise ValueError("sigma_list must be nonempty")
    clean = clean_results(corpus, head, queries, k, device, quant)
    rows = []
    for sigma in sigma_list:
        rates = []
        for seed in seeds:
            noisy = noisy_results(
                corpus, head, queries, k, device, quant,
                NoiseConfig(sigma_scale=sigma, seed=seed), write_verify,
            )
            rates.append(mips_accuracy(noisy, clean).top1_match_rate)
        rows.append(
            {
                "sigma_scale": sigma,
                "device": device.name,
                "mean_top1_match_rate": float(np.mean(rates)),
                "std_top1_match_rate": float(np.std(rates)),
                "seed_count": len(seeds),
            }
        )
    return rows


def sweep_naive_sigma(
    corpus: EmbeddingMatrix,
    queries: np.ndarray,
    head: ProjectionHead,
    sigma_list: list[float],
    seeds: list[int],
    k: int = 1,
) -> list[dict]:
    """Plain-Gaussian perturbation sweep over fp32 embeddings (no crossbar)."""
    projected = project_batch(head, corpus.vectors)
    doc_ids = np.asarray(corpus.ids)
    q_proj = np.stack([project(head, q) for q in queries])
    clean = [
        _rank(doc_ids, projected @ q, k, query_id=i) for i, q in enumerate(q_proj)
    ]
    rows = []
    for sigma in sigma_list:
        rates = []
        for seed in seeds:
            rng = np.random.default_rng(seed)
            perturbed = perturb_embedding_naive(projected, sigma, rng)
            noisy = [
                _rank(doc_ids, perturbed.astype(np.float64) @ q, k, query_id=i)
                for i, q in enumerate(q_proj)
            ]
            rates.append(mips_accuracy(noisy, clean).top1_match_rate)
        rows.append(
            {
                "sigma_scale": sigma,
                "device": "naive-gaussian",
                "mean_top1_match_rate": float(np.mean(rates)),
                "std_top1_match_rate": float(np.std(rates)),
                "seed_count": len(seeds),
            }
        )
    return rows


def compare_devices(
    corpus: EmbeddingMatrix,
    queries: np.ndarray,
    heads: dict[str, ProjectionHead],
    devices: list[DeviceProfile],
    quant: QuantSpec,
    sigma_scale: float = 0.1,
    seeds: list[int] | None = None,
    k: int = 1,
) -> list[dict]:
    """One (device, method) evaluation grid at a fixed noise scale."""
    required = {"untrained", "RoCR-CDE", "RoCR-CDI"}
    missing = required - set(heads)
    if missing:
        raise ValueError(f"heads missing required methods: {sorted(missing)}")
    seeds = seeds or [0]
    rows = []
    for device in devices:
        for method, head in heads.items():
            clean = clean_results(corpus, head, queries, k, device, quant)
            rates, overlaps = [], []
            for seed in seeds:
                noisy = noisy_results(
                    corpus, head, queries, k, device, quant,
                    NoiseConfig(sigma_scale=sigma_scale, seed=seed),
                )
                rep = mips_accuracy(noisy, clean)
                rates.append(rep.top1_match_rate)
                overlaps.append(rep.topk_overlap)
            rows.append(
                {
                    "sigma_scale": sigma_scale,
                    "device": device.name,
                    "method": method,
                    "top1_match_rate": float(np.mean(rates)),
                    "topk_overlap": float(np.mean(overlaps)),
                    "seed_count": len(seeds),
                }
            )
    return rows


def write_csv(path, rows: list[dict], header: list[str] | None = None) -> None:
    """Fixed-header CSV; missing fields are left empty."""
    header = header or CSV_HEADER
    with open(Path(path), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: row.get(key, "") for key in header})
