"""Command-line entry point and experiment orchestration.

Every subcommand reads an optional JSON config (flags win over config keys)
and writes a manifest JSON next to its primary output, capturing the resolved
configuration, its hash, and the seed, so artifacts are regenerable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation, training
from .codec import ProjectionHead, QuantSpec, hash_embed
from .crossbar import (
    EmbeddingMatrix,
    WriteVerifyConfig,
    load_index,
    mips,
    program,
    save_index,
)
from .devices import NoiseConfig, builtin_devices, device_by_name
from .formats import (
    FormatError,
    dataset_task,
    ingest,
    read_emb1,
    read_trp1,
    write_emb1,
    write_trp1,
)

DEFAULT_OUT_DIR_ENV = "CIMRAG_OUT_DIR"


def out_path(arg: str | None, default_name: str) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(DEFAULT_OUT_DIR_ENV, ".")) / default_name


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def write_manifest(primary_output: Path, command: str, config: dict) -> None:
    manifest = {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "seed": config.get("seed", 0),
    }
    path = primary_output.with_suffix(primary_output.suffix + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))


def save_head(head: ProjectionHead, path: Path) -> None:
    path.write_text(
        json.dumps({"din": head.din, "d_out": head.d_out, "w": head.w.tolist()})
    )


def load_head(path) -> ProjectionHead:
    obj = json.loads(Path(path).read_text())
    return ProjectionHead(w=np.asarray(obj["w"]), din=obj["din"], d_out=obj["d_out"])


def load_corpus_embeddings(args, records) -> EmbeddingMatrix:
    """EMB1 rows when given, hash embeddings of the dataset otherwise."""
    if getattr(args, "embeddings", None):
        matrix, ids = read_emb1(args.embeddings)
        return EmbeddingMatrix(vectors=matrix, ids=ids)
    vecs = np.stack([hash_embed(r.content, args.din, args.seed) for r in records])
    return EmbeddingMatrix(vectors=vecs, ids=[r.id for r in records])


def parse_seeds(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip() != ""]


def parse_floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip() != ""]


def resolved_config(args, keys: list[str]) -> dict:
    return {key: getattr(args, key) for key in keys if hasattr(args, key)}


def cmd_embed(args) -> int:
    if args.validate:
        matrix, ids = read_emb1(args.validate)
        print(f"ok: {matrix.shape[0]} rows, dim {matrix.shape[1]}, {len(ids)} ids")
        return 0
    records = ingest(args.dataset)
    dest = out_path(args.out, "embeddings.emb1")
    matrix = np.stack([hash_embed(r.content, args.din, args.seed) for r in records])
    write_emb1(dest, matrix, ids=[r.id for r in records])
    write_manifest(dest, "embed", resolved_config(args, ["dataset", "din", "seed"]))
    print(f"wrote {matrix.shape[0]} x {matrix.shape[1]} embeddings to {dest}")
    return 0


def cmd_construct(args) -> int:
    records = ingest(args.dataset)
    embedder = training.HashEmbedder(din=args.din, seed=args.seed)
    if args.mode == "CDE":
        triplets = training.construct_cde(records, args.k, args.dropout, embedder, args.seed)
    else:
        triplets = training.construct_cdi(records, args.k, args.dropout, embedder, args.seed)
    dest = out_path(args.out, f"triplets_{args.mode.lower()}.trp1")
    write_trp1(dest, triplets.anchors, triplets.positives, triplets.negatives)
    write_manifest(
        dest, "construct", resolved_config(args, ["dataset", "mode", "k", "dropout", "din", "seed"])
    )
    print(f"wrote {len(triplets)} {args.mode} triplets to {dest}")
    return 0


def cmd_train(args) -> int:
    anchors, positives, negatives = read_trp1(args.triplets)
    triplets = training.TripletSet(
        anchors=anchors, positives=positives, negatives=negatives,
        provenance="CDE", k_factor=args.k,
    )
    din = anchors.shape[1]
    head = ProjectionHead.orthonormal(din, args.d_out, seed=args.seed)
    cfg = training.TrainConfig(
        margin=args.margin,
        k_factor=args.k,
        dropout=args.dropout,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        noise=NoiseConfig(sigma_scale=args.sigma_scale, seed=args.seed),
        device=device_by_name(args.device),
        quant=QuantSpec(precision_bits=args.precision),
        seed=args.seed,
    )
    report = training.train(head, triplets, cfg)
    dest = out_path(args.out, "head.json")
    save_head(head, dest)
    report_path = Path(args.report) if args.report else dest.with_suffix(".report.json")
    report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    write_manifest(
        dest,
        "train",
        resolved_config(
            args,
            ["triplets", "d_out", "margin", "k", "dropout", "lr", "epochs",
             "batch_size", "device", "sigma_scale", "precision", "seed"],
        ),
    )
    if report.aborted:
        print("training aborted: non-finite loss", file=sys.stderr)
        return 1
    print(f"trained head -> {dest}; final epoch loss {report.epoch_losses[-1]:.6f}")
    return 0


def cmd_program(args) -> int:
    matrix, ids = read_emb1(args.embeddings)
    head = load_head(args.head)
    wv = WriteVerifyConfig(args.wv_tolerance, args.wv_iterations) if args.write_verify else None
    index = program(
        EmbeddingMatrix(vectors=matrix, ids=ids),
        head,
        device_by_name(args.device),
        QuantSpec(precision_bits=args.precision),
        NoiseConfig(sigma_scale=args.sigma_scale, seed=args.seed),
        write_verify=wv,
    )
    blob = out_path(args.out, "index.cells")
    meta = Path(args.meta) if args.meta else blob.with_suffix(".meta.json")
    save_index(index, blob, meta)
    write_manifest(
        blob,
        "program",
        resolved_config(
            args,
            ["embeddings", "head", "device", "precision", "sigma_scale", "seed",
             "write_verify", "wv_tolerance", "wv_iterations"],
        ),
    )
    print(f"programmed {len(index.doc_ids)} docs over {len(index.tiles)} tiles -> {blob}")
    return 0


def cmd_query(args) -> int:
    head = load_head(args.head)
    index = load_index(args.index, args.meta)
    if args.text:
        queries = [(0, hash_embed(args.text, head.din, args.seed))]
    else:
        records = ingest(args.queries)
        queries = [(r.id, hash_embed(r.content, head.din, args.seed)) for r in records]
    results = [
        mips(index, head, vec, args.k, query_id=qid).ranked for qid, vec in queries
    ]
    payload = [
        {"query_id": qid, "ranked": [{"doc_id": d, "score": s} for d, s in ranked]}
        for (qid, _), ranked in zip(queries, results)
    ]
    dest = out_path(args.out, "results.json")
    dest.write_text(json.dumps(payload, indent=2))
    write_manifest(dest, "query", resolved_config(args, ["index", "head", "k", "seed"]))
    print(f"wrote {len(payload)} retrievals to {dest}")
    return 0


def cmd_eval(args) -> int:
    records = ingest(args.dataset)
    queries = ingest(args.queries)
    corpus = load_corpus_embeddings(args, records)
    head = load_head(args.head)
    device = device_by_name(args.device)
    quant = QuantSpec(precision_bits=args.precision)
    qvecs = np.stack([hash_embed(r.content, head.din, args.seed) for r in queries])
    clean = evaluation.clean_results(corpus, head, qvecs, args.k, device, quant)
    seeds = parse_seeds(args.seeds)
    reports = []
    for seed in seeds:
        noisy = evaluation.noisy_results(
            corpus, head, qvecs, args.k, device, quant,
            NoiseConfig(sigma_scale=args.sigma_scale, seed=seed),
        )
        reports.append(
            evaluation.mips_accuracy(
                noisy, clean, sigma_scale=args.sigma_scale, device=device.name, seeds=(seed,)
            )
        )
    payload: dict = {
        "mips_accuracy": {
            "mean_top1_match_rate": float(np.mean([r.top1_match_rate for r in reports])),
            "mean_topk_overlap": float(np.mean([r.topk_overlap for r in reports])),
            "per_seed": [r.to_dict() for r in reports],
        }
    }
    if all(r.label is not None for r in records) and all(q.label is not None for q in queries):
        task = dataset_task(records)
        noisy = evaluation.noisy_results(
            corpus, head, qvecs, args.k, device, quant,
            NoiseConfig(sigma_scale=args.sigma_scale, seed=seeds[0]),
        )
        proxy = evaluation.proxy_metrics(
            noisy,
            {r.id: r.label for r in records},
            {q.id: q.label for q in queries},
            task,
        )
        payload["proxy_metrics"] = proxy.to_dict()
    dest = out_path(args.out, "eval.json")
    dest.write_text(json.dumps(payload, indent=2, sort_keys=True))
    write_manifest(
        dest,
        "eval",
        resolved_config(
            args,
            ["dataset", "queries", "head", "embeddings", "device", "precision",
             "sigma_scale", "k", "seeds", "seed"],
        ),
    )
    print(f"wrote evaluation report to {dest}")
    return 0


def cmd_sweep(args) -> int:
    records = ingest(args.dataset)
    queries = ingest(args.queries)
    corpus = load_corpus_embeddings(args, records)
    head = load_head(args.head) if args.head else ProjectionHead.orthonormal(
        args.din, args.d_out, seed=args.seed
    )
    qvecs = np.stack([hash_embed(r.content, head.din, args.seed) for r in queries])
    sigmas = parse_floats(args.sigmas)
    seeds = parse_seeds(args.seeds)
    if args.naive:
        rows = evaluation.sweep_naive_sigma(corpus, qvecs, head, sigmas, seeds, k=args.k)
    else:
        rows = evaluation.sweep_sigma(
            corpus, qvecs, head, device_by_name(args.device),
            QuantSpec(precision_bits=args.precision), sigmas, seeds, k=args.k,
        )
    dest = out_path(args.out, "sweep.csv")
    evaluation.write_csv(
        dest, rows,
        header=["sigma_scale", "device", "mean_top1_match_rate",
                "std_top1_match_rate", "seed_count"],
    )
    write_manifest(
        dest,
        "sweep",
        resolved_config(
            args,
            ["dataset", "queries", "head", "embeddings", "device", "precision",
             "sigmas", "seeds", "k", "naive", "din", "d_out", "seed"],
        ),
    )
    print(f"wrote {len(rows)} sweep rows to {dest}")
    return 0


def cmd_compare(args) -> int:
    records = ingest(args.dataset)
    queries = ingest(args.queries)
    corpus = load_corpus_embeddings(args, records)
    heads = {}
    for pair in args.heads.split(","):
        method, _, path = pair.partition("=")
        heads[method] = load_head(path)
    qvecs = np.stack(
        [hash_embed(r.content, next(iter(heads.values())).din, args.seed) for r in queries]
    )
    rows = evaluation.compare_devices(
        corpus, qvecs, heads, builtin_devices(),
        QuantSpec(precision_bits=args.precision),
        sigma_scale=args.sigma_scale,
        seeds=parse_seeds(args.seeds),
        k=args.k,
    )
    dest = out_path(args.out, "compare.csv")
    evaluation.write_csv(
        dest, rows,
        header=["sigma_scale", "device", "method", "top1_match_rate",
                "topk_overlap", "seed_count"],
    )
    write_manifest(
        dest,
        "compare",
        resolved_config(
            args,
            ["dataset", "queries", "heads", "embeddings", "precision",
             "sigma_scale", "seeds", "k", "seed"],
        ),
    )
    print(f"wrote {len(rows)} comparison rows to {dest}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cimrag")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="hash-embed a dataset or validate an EMB1 file")
    _add_common(p)
    p.add_argument("--dataset")
    p.add_argument("--din", type=int, default=384)
    p.add_argument("--validate", help="EMB1 file to validate instead of embedding")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("construct", help="build CDE/CDI triplets into TRP1")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", choices=["CDE", "CDI"], required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--din", type=int, default=384)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("train", help="train a projection head from TRP1 triplets")
    _add_common(p)
    p.add_argument("--triplets", required=True)
    p.add_argument("--d-out", type=int, default=64, dest="d_out")
    p.add_argument("--margin", type=float, default=0.5)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=64, dest="batch_size")
    p.add_argument("--device", default="Device-1")
    p.add_argument("--sigma-scale", type=float, default=0.1, dest="sigma_scale")
    p.add_argument("--precision", type=int, default=8)
    p.add_argument("--report")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("program", help="program an EMB1 corpus onto crossbar tiles")
    _add_common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--device", default="Device-1")
    p.add_argument("--precision", type=int, default=8)
    p.add_argument("--sigma-scale", type=float, default=0.1, dest="sigma_scale")
    p.add_argument("--write-verify", action="store_true", dest="write_verify")
    p.add_argument("--wv-tolerance", type=float, default=0.005, dest="wv_tolerance")
    p.add_argument("--wv-iterations", type=int, default=10, dest="wv_iterations")
    p.add_argument("--meta")
    p.set_defaults(func=cmd_program)

    p = sub.add_parser("query", help="retrieve top-k documents from a saved index")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--text")
    p.add_argument("--queries")
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="MIPS accuracy and retrieval-proxy metrics")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--din", type=int, default=384)
    p.add_argument("--device", default="Device-1")
    p.add_argument("--precision", type=int, default=8)
    p.add_argument("--sigma-scale", type=float, default=0.1, dest="sigma_scale")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="sigma sweep CSV")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--head")
    p.add_argument("--embeddings")
    p.add_argument("--din", type=int, default=384)
    p.add_argument("--d-out", type=int, default=64, dest="d_out")
    p.add_argument("--device", default="Device-1")
    p.add_argument("--precision", type=int, default=8)
    p.add_argument("--sigmas", default="0,0.025,0.05,0.1,0.15")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--naive", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="device x method comparison grid CSV")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--heads", required=True,
                   help="comma list of method=head.json (untrained, RoCR-CDE, RoCR-CDI)")
    p.add_argument("--embeddings")
    p.add_argument("--din", type=int, default=384)
    p.add_argument("--precision", type=int, default=8)
    p.add_argument("--sigma-scale", type=float, default=0.1, dest="sigma_scale")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    return parser


def apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse args, then re-parse with config-file values as defaults (flags win)."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        config = json.loads(Path(args.config).read_text())
        # Re-parse with config values injected as defaults for this subcommand.
        sub = next(
            a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
        ).choices[args.command]
        valid = {a.dest for a in sub._actions}
        unknown = set(config) - valid
        if unknown:
            raise FormatError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = apply_config_file(parser, sys.argv[1:] if argv is None else argv)
        return args.func(args)
    except (FormatError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
