"""Crossbar programming and in-memory top-k retrieval.

Documents are projected, quantized, offset-encoded, bit-sliced, and written
onto fixed-size tiles. Programming noise is sampled once per write (frozen
until reprogram); the query path is digital and noise-free. Scores come from
per-slice analog column sums, digital shift-add, and exact offset correction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import (
    ProjectionHead,
    QuantSpec,
    bit_slice_matrix,
    offset_encode,
    project,
    project_batch,
    quantize,
    slice_count,
)
from .devices import DeviceProfile, NoiseConfig, NoiseMode, cell_rng, sample_noise_field

ARRAY_SIZE = 64


@dataclass(frozen=True)
class WriteVerifyConfig:
    tolerance: float = 0.005
    max_iterations: int = 10

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Row-major fp32 base embeddings with document ids."""

    vectors: np.ndarray  # (n, din)
    ids: tuple[int, ...]

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.float32)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        if vecs.ndim != 2:
            raise ValueError("vectors must be 2-D")
        if len(self.ids) != vecs.shape[0]:
            raise ValueError("id count != row count")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate document ids")


@dataclass
class CrossbarTile:
    """One array of cells; a document occupies S consecutive columns."""

    cells: np.ndarray  # (rows, cols) real-valued noisy levels
    target_levels: np.ndarray  # (rows, cols) ints
    doc_ids: tuple[int, ...]  # column-group owners, in order


@dataclass
class ProgrammedIndex:
    tiles: list[CrossbarTile]
    device: DeviceProfile
    quant: QuantSpec
    noise: NoiseConfig
    doc_ids: tuple[int, ...]
    d_out: int
    program_epoch: int = 0
    write_verify: WriteVerifyConfig | None = None
    unverified_cells: int = 0

    @property
    def slices_per_doc(self) -> int:
        return slice_count(self.device, self.quant)


@dataclass(frozen=True)
class RetrievalResult:
    query_id: int
    ranked: tuple[tuple[int, float], ...]  # (doc_id, score) descending
    k: int
    k_clamped: bool = False

    def top_ids(self) -> tuple[int, ...]:
        return tuple(d for d, _ in self.ranked)


def program(
    embeddings: EmbeddingMatrix,
    head: ProjectionHead,
    device: DeviceProfile,
    quant: QuantSpec,
    noise: NoiseConfig,
    write_verify: WriteVerifyConfig | None = None,
    array_size: int = ARRAY_SIZE,
    program_epoch: int = 0,
) -> ProgrammedIndex:
    """Write every document onto tiles with one frozen noise field."""
    if noise.mode is not NoiseMode.DEVICE_TABLE:
        raise ValueError("program() models device-table noise only")
    if embeddings.vectors.shape[0] == 0:
        raise ValueError("empty corpus")
    if head.d_out > array_size:
        raise ValueError(f"d_out {head.d_out} exceeds array size {array_size}")

    s = slice_count(device, quant)
    docs_per_tile = array_size // s
    projected = project_batch(head, embeddings.vectors)  # (n, d)
    q = quantize(projected, quant)
    u = offset_encode(q, quant)
    sliced = bit_slice_matrix(u, device, quant)  # (n, d, S)

    tiles: list[CrossbarTile] = []
    unverified = 0
    n = u.shape[0]
    for tile_idx, start in enumerate(range(0, n, docs_per_tile)):
        chunk = sliced[start : start + docs_per_tile]  # (m, d, S)
        m = chunk.shape[0]
        # Column layout: doc-major, slice-minor -> (d, m*S).
        targets = chunk.transpose(1, 0, 2).reshape(head.d_out, m * s)
        cells = _program_tile(
            targets, device, noise, write_verify, noise.seed, tile_idx, program_epoch
        )
        if write_verify is not None:
            err = np.abs(cells - targets) / (device.levels - 1)
            unverified += int(np.count_nonzero(err > write_verify.tolerance))
        tiles.append(
            CrossbarTile(
                cells=cells,
                target_levels=targets,
                doc_ids=tuple(embeddings.ids[start : start + m]),
            )
        )
    return ProgrammedIndex(
        tiles=tiles,
        device=device,
        quant=quant,
        noise=noise,
        doc_ids=embeddings.ids,
        d_out=head.d_out,
        program_epoch=program_epoch,
        write_verify=write_verify,
        unverified_cells=unverified,
    )


def _program_tile(
    targets: np.ndarray,
    device: DeviceProfile,
    noise: NoiseConfig,
    write_verify: WriteVerifyConfig | None,
    seed: int,
    tile_idx: int,
    epoch: int,
) -> np.ndarray:
    """Sample the tile noise field, rewriting out-of-tolerance cells if asked."""
    span = device.levels - 1
    draws = sample_noise_field(device, targets, noise, cell_rng(seed, tile_idx, epoch, 0))
    if write_verify is not None:
        pending = np.abs(draws) > write_verify.tolerance
        for it in range(1, write_verify.max_iterations):
            if not pending.any():
                break
            redraw = sample_noise_field(
                device, targets, noise, cell_rng(seed, tile_idx, epoch, it)
            )
            draws = np.where(pending, redraw, draws)
            pending &= np.abs(draws) > write_verify.tolerance
    return targets + span * draws


def _rank(doc_ids: np.ndarray, scores: np.ndarray, k: int, query_id: int) -> RetrievalResult:
    """Top-k by descending score, ties broken by ascending doc id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    clamped = k > len(doc_ids)
    k = min(k, len(doc_ids))
    order = np.lexsort((doc_ids, -scores))[:k]
    ranked = tuple((int(doc_ids[i]), float(scores[i])) for i in order)
    return RetrievalResult(query_id=query_id, ranked=ranked, k=k, k_clamped=clamped)


def raw_scores(index: ProgrammedIndex, query_q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Offset-corrected crossbar scores for a signed quantized query."""
    s = index.slices_per_doc
    weights = float(index.device.levels) ** np.arange(s)
    correction = index.quant.offset * float(query_q.sum())
    all_ids: list[int] = []
    all_scores: list[np.ndarray] = []
    for tile in index.tiles:
        col_sums = query_q.astype(np.float64) @ tile.cells  # analog per-column sum
        per_doc = col_sums.reshape(len(tile.doc_ids), s) @ weights
        all_scores.append(per_doc - correction)
        all_ids.extend(tile.doc_ids)
    return np.asarray(all_ids), np.concatenate(all_scores)


def mips(
    index: ProgrammedIndex,
    head: ProjectionHead,
    query_base: np.ndarray,
    k: int,
    query_id: int = 0,
) -> RetrievalResult:
    """Noisy crossbar retrieval with a digital (noise-free) query path."""
    query_q = quantize(project(head, query_base), index.quant)
    doc_ids, scores = raw_scores(index, query_q)
    return _rank(doc_ids, scores, k, query_id)


def mips_batch(
    index: ProgrammedIndex,
    head: ProjectionHead,
    query_bases: np.ndarray,
    k: int,
) -> list[RetrievalResult]:
    """Batched mips(); query row i gets query_id i. Same results as mips()."""
    queries_q = quantize(project_batch(head, query_bases), index.quant).astype(np.float64)
    s = index.slices_per_doc
    weights = float(index.device.levels) ** np.arange(s)
    corrections = index.quant.offset * queries_q.sum(axis=1)  # (nq,)
    all_ids: list[int] = []
    per_tile: list[np.ndarray] = []
    for tile in index.tiles:
        col_sums = queries_q @ tile.cells  # (nq, cols)
        per_tile.append(
            col_sums.reshape(len(queries_q), len(tile.doc_ids), s) @ weights
        )
        all_ids.extend(tile.doc_ids)
    doc_ids = np.asarray(all_ids)
    scores = np.concatenate(per_tile, axis=1) - corrections[:, None]
    return [_rank(doc_ids, row, k, query_id=i) for i, row in enumerate(scores)]


def mips_exact(
    embeddings: EmbeddingMatrix,
    head: ProjectionHead,
    query_base: np.ndarray,
    k: int,
    query_id: int = 0,
) -> RetrievalResult:
    """fp32 cosine reference over projected embeddings, same tie-breaking."""
    projected = project_batch(head, embeddings.vectors)
    scores = projected @ project(head, query_base)
    return _rank(np.asarray(embeddings.ids), scores, k, query_id)


def save_index(index: ProgrammedIndex, blob_path, meta_path) -> None:
    """Persist cell matrices as one fp32 blob plus a JSON sidecar."""
    blob_path, meta_path = Path(blob_path), Path(meta_path)
    with open(blob_path, "wb") as fh:
        for tile in index.tiles:
            fh.write(np.ascontiguousarray(tile.cells, dtype="<f4").tobytes())
    meta = {
        "device": json.loads(index.device.to_json()),
        "precision_bits": index.quant.precision_bits,
        "noise": {
            "sigma_scale": index.noise.sigma_scale,
            "mode": index.noise.mode.value,
            "naive_sigma": index.noise.naive_sigma,
            "seed": index.noise.seed,
        },
        "d_out": index.d_out,
        "program_epoch": index.program_epoch,
        "doc_count": len(index.doc_ids),
        "tile_count": len(index.tiles),
        "tiles": [
            {"cols": tile.cells.shape[1], "doc_ids": list(tile.doc_ids)} for tile in index.tiles
        ],
        "write_verify": (
            None
            if index.write_verify is None
            else {
                "tolerance": index.write_verify.tolerance,
                "max_iterations": index.write_verify.max_iterations,
            }
        ),
        "unverified_cells": index.unverified_cells,
    }
    meta_path.write_text(json.dumps(meta, indent=2))


def load_index(blob_path, meta_path) -> ProgrammedIndex:
    meta = json.loads(Path(meta_path).read_text())
    device = DeviceProfile(
        name=meta["device"]["name"],
        bits_per_cell=meta["device"]["bits_per_cell"],
        sigma_per_level=tuple(meta["device"]["sigma_per_level"]),
    )
    quant = QuantSpec(precision_bits=meta["precision_bits"])
    noise = NoiseConfig(
        sigma_scale=meta["noise"]["sigma_scale"],
        mode=NoiseMode(meta["noise"]["mode"]),
        naive_sigma=meta["noise"]["naive_sigma"],
        seed=meta["noise"]["seed"],
    )
    wv = meta["write_verify"]
    write_verify = None if wv is None else WriteVerifyConfig(**wv)
    d_out = meta["d_out"]
    tiles = []
    doc_ids: list[int] = []
    data = np.fromfile(blob_path, dtype="<f4").astype(np.float64)
    pos = 0
    for tile_meta in meta["tiles"]:
        cols = tile_meta["cols"]
        cells = data[pos : pos + d_out * cols].reshape(d_out, cols)
        pos += d_out * cols
        tiles.append(
            CrossbarTile(
                cells=cells,
                # Targets are not persisted; nearest level is the best reconstruction.
                target_levels=np.rint(cells).astype(np.int64),
                doc_ids=tuple(tile_meta["doc_ids"]),
            )
        )
        doc_ids.extend(tile_meta["doc_ids"])
    return ProgrammedIndex(
        tiles=tiles,
        device=device,
        quant=quant,
        noise=noise,
        doc_ids=tuple(doc_ids),
        d_out=d_out,
        program_epoch=meta["program_epoch"],
        write_verify=write_verify,
        unverified_cells=meta["unverified_cells"],
    )
