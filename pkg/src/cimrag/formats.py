"""On-disk interchange formats.

Binary formats are little-endian with a 4-byte magic:
  EMB1: magic, u32 count, u32 dim, count*dim fp32 rows.
  TRP1: magic, u32 count, u32 dim, count groups of 3*dim fp32
        (anchor, positive, negative).
Datasets are JSONL records {"id": int, "content": str, "label": optional}.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EMB1_MAGIC = b"EMB1"
TRP1_MAGIC = b"TRP1"


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class DocumentRecord:
    id: int
    content: str
    label: str | float | None = None

    def __post_init__(self):
        if not self.content:
            raise ValueError(f"record {self.id}: empty content")


def _write_header(fh, magic: bytes, count: int, dim: int) -> None:
    fh.write(magic)
    fh.write(struct.pack("<II", count, dim))


def _read_header(fh, magic: bytes, path) -> tuple[int, int]:
    got = fh.read(4)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    raw = fh.read(8)
    if len(raw) != 8:
        raise FormatError(f"{path}: truncated header")
    return struct.unpack("<II", raw)


def write_emb1(path, matrix: np.ndarray, ids: list[int] | None = None) -> None:
    """Write an embedding matrix; optionally an adjacent .ids.jsonl file."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise FormatError("EMB1 expects a 2-D matrix")
    path = Path(path)
    with open(path, "wb") as fh:
        _write_header(fh, EMB1_MAGIC, matrix.shape[0], matrix.shape[1])
        fh.write(matrix.tobytes())
    if ids is not None:
        if len(ids) != matrix.shape[0]:
            raise FormatError("ids length != row count")
        with open(path.with_suffix(path.suffix + ".ids.jsonl"), "w") as fh:
            for i in ids:
                fh.write(json.dumps({"id": int(i)}) + "\n")


def read_emb1(path) -> tuple[np.ndarray, list[int]]:
    """Read an embedding matrix; row index is the id unless an ids file exists."""
    path = Path(path)
    with open(path, "rb") as fh:
        count, dim = _read_header(fh, EMB1_MAGIC, path)
        data = np.fromfile(fh, dtype="<f4", count=count * dim)
    if data.size != count * dim:
        raise FormatError(f"{path}: expected {count * dim} floats, got {data.size}")
    matrix = data.reshape(count, dim)
    ids_path = path.with_suffix(path.suffix + ".ids.jsonl")
    if ids_path.exists():
        ids = [json.loads(line)["id"] for line in ids_path.read_text().splitlines() if line]
        if len(ids) != count:
            raise FormatError(f"{ids_path}: {len(ids)} ids for {count} rows")
    else:
        ids = list(range(count))
    return matrix, ids


def write_trp1(path, anchors: np.ndarray, positives: np.ndarray, negatives: np.ndarray) -> None:
    arrays = [np.ascontiguousarray(a, dtype="<f4") for a in (anchors, positives, negatives)]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1 or arrays[0].ndim != 2:
        raise FormatError("triplet arrays must share one 2-D shape")
    count, dim = arrays[0].shape
    interleaved = np.stack(arrays, axis=1)  # (count, 3, dim)
    with open(path, "wb") as fh:
        _write_header(fh, TRP1_MAGIC, count, dim)
        fh.write(np.ascontiguousarray(interleaved, dtype="<f4").tobytes())


def read_trp1(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    path = Path(path)
    with open(path, "rb") as fh:
        count, dim = _read_header(fh, TRP1_MAGIC, path)
        data = np.fromfile(fh, dtype="<f4", count=count * 3 * dim)
    if data.size != count * 3 * dim:
        raise FormatError(f"{path}: truncated triplet payload")
    groups = data.reshape(count, 3, dim)
    return groups[:, 0, :], groups[:, 1, :], groups[:, 2, :]


def sniff_label(value):
    """Numeric-looking labels become floats; everything else stays a string."""
    if value is None or isinstance(value, (int, float)):
        return value
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)


def ingest(path) -> list[DocumentRecord]:
    """Load and validate a JSONL dataset."""
    records: list[DocumentRecord] = []
    seen: set[int] = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if "id" not in obj or "content" not in obj:
                raise FormatError(f"{path}:{lineno}: missing id or content")
            doc_id = int(obj["id"])
            if doc_id in seen:
                raise FormatError(f"{path}:{lineno}: duplicate id {doc_id}")
            seen.add(doc_id)
            if not obj["content"]:
                raise FormatError(f"{path}:{lineno}: empty content")
            records.append(
                DocumentRecord(
                    id=doc_id,
                    content=str(obj["content"]),
                    label=sniff_label(obj.get("label")),
                )
            )
    return records


def dataset_task(records: list[DocumentRecord]) -> str:
    """Classification unless every present label parsed as numeric."""
    labels = [sniff_label(r.label) for r in records if r.label is not None]
    if labels and all(isinstance(l, (int, float)) for l in labels):
        return "Regression"
    return "Classification"
