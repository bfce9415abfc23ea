"""Embedding conversion for crossbar storage.

Pipeline: project to the array dimension, L2-normalize, symmetric int
quantization, offset-encode to unsigned, then bit-slice onto L-level cells.
Every stage has an exact inverse (up to quantization rounding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .devices import DeviceProfile


@dataclass(frozen=True)
class QuantSpec:
    """Symmetric signed quantization with offset-binary cell encoding."""

    precision_bits: int = 8

    def __post_init__(self):
        if self.precision_bits < 2:
            raise ValueError("precision_bits must be >= 2")

    @property
    def qmax(self) -> int:
        return 2 ** (self.precision_bits - 1) - 1

    @property
    def scale(self) -> float:
        return 1.0 / self.qmax

    @property
    def offset(self) -> int:
        return 2 ** (self.precision_bits - 1)


@dataclass
class ProjectionHead:
    """Linear reshape map from base dimension din to array dimension d_out."""

    w: np.ndarray  # (din, d_out)
    din: int
    d_out: int

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.shape != (self.din, self.d_out):
            raise ValueError(f"weight shape {self.w.shape} != ({self.din}, {self.d_out})")
        if not np.all(np.isfinite(self.w)):
            raise ValueError("non-finite projection weights")

    @classmethod
    def orthonormal(cls, din: int, d_out: int, seed: int = 0) -> "ProjectionHead":
        """Seeded Gaussian draw with orthonormalized columns."""
        if d_out > din:
            raise ValueError("d_out must be <= din for orthonormal init")
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((din, d_out))
        q, _ = np.linalg.qr(g)
        return cls(w=q, din=din, d_out=d_out)

    def copy(self) -> "ProjectionHead":
        return ProjectionHead(w=self.w.copy(), din=self.din, d_out=self.d_out)


@dataclass(frozen=True)
class SlicedVector:
    """One document's offset-encoded coordinates split across cells."""

    doc_id: int
    slices: np.ndarray  # (d, S) ints in [0, L-1], slice 0 least significant


def l2_normalize(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    norm = np.linalg.norm(vec)
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("cannot normalize zero or non-finite vector")
    return vec / norm


def hash_embed(text: str, din: int, seed: int = 0) -> np.ndarray:
    """Deterministic synthetic embedding: signed feature hash of char trigrams."""
    if din < 8:
        raise ValueError("din must be >= 8")
    padded = f"\x02{text}\x03"
    if len(padded) < 3:
        raise ValueError("empty text has no trigrams")
    vec = np.zeros(din)
    for i in range(len(padded) - 2):
        h = hash_trigram(padded[i : i + 3], seed)
        vec[h % din] += 1.0 if (h >> 32) & 1 else -1.0
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        # Opposed-sign collisions can cancel; nudge by text length.
        vec[len(padded) % din] = 1.0
        norm = 1.0
    return (vec / norm).astype(np.float32)


def hash_trigram(tri: str, seed: int) -> int:
    """64-bit FNV-1a over the trigram bytes, mixed with the seed."""
    h = (14695981039346656037 ^ (seed * 0x9E3779B97F4A7C15)) & 0xFFFFFFFFFFFFFFFF
    for b in tri.encode("utf-8"):
        h = ((h ^ b) * 1099511628211) & 0xFFFFFFFFFFFFFFFF
    return h


def project(head: ProjectionHead, base: np.ndarray) -> np.ndarray:
    """L2-normalized w^T @ base."""
    base = np.asarray(base, dtype=np.float64)
    if base.shape != (head.din,):
        raise ValueError(f"expected base of length {head.din}, got {base.shape}")
    return l2_normalize(base @ head.w)


def project_batch(head: ProjectionHead, bases: np.ndarray) -> np.ndarray:
    """Row-wise project + normalize for a (n, din) matrix."""
    bases = np.asarray(bases, dtype=np.float64)
    z = bases @ head.w
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise ValueError("zero or non-finite projection in batch")
    return z / norms


def quantize(vec: np.ndarray, spec: QuantSpec) -> np.ndarray:
    """Round to signed integers in [-qmax, qmax]."""
    vec = np.asarray(vec)
    if not np.all(np.isfinite(vec)):
        raise ValueError("non-finite input to quantize")
    q = np.rint(vec / spec.scale)
    return np.clip(q, -spec.qmax, spec.qmax).astype(np.int64)


def dequantize(q: np.ndarray, spec: QuantSpec) -> np.ndarray:
    return np.asarray(q, dtype=np.float64) * spec.scale


def offset_encode(q: np.ndarray, spec: QuantSpec) -> np.ndarray:
    """Shift signed values to unsigned so single-polarity cells can hold them."""
    return np.asarray(q, dtype=np.int64) + spec.offset


def offset_decode(u: np.ndarray, spec: QuantSpec) -> np.ndarray:
    return np.asarray(u) - spec.offset


def slice_count(profile: DeviceProfile, spec: QuantSpec) -> int:
    if spec.precision_bits % profile.bits_per_cell != 0:
        raise ValueError(
            f"precision {spec.precision_bits} not divisible by "
            f"{profile.bits_per_cell} bits per cell"
        )
    return spec.precision_bits // profile.bits_per_cell


def bit_slice_matrix(u: np.ndarray, profile: DeviceProfile, spec: QuantSpec) -> np.ndarray:
    """Split unsigned ints into per-cell levels, least-significant slice first.

    Input (..., d) -> output (..., d, S) with entries in [0, L-1].
    """
    s = slice_count(profile, spec)
    u = np.asarray(u, dtype=np.int64)
    shifts = np.arange(s) * profile.bits_per_cell
    return (u[..., None] >> shifts) & (profile.levels - 1)


def bit_slice(u: np.ndarray, profile: DeviceProfile, spec: QuantSpec, doc_id: int = 0) -> SlicedVector:
    return SlicedVector(doc_id=doc_id, slices=bit_slice_matrix(u, profile, spec))


def recombine(slices: np.ndarray, profile: DeviceProfile) -> np.ndarray:
    """Shift-add slices back to values; real-valued (noisy) slices stay real.

    Operates on the trailing axis: (..., S) -> (...).
    """
    slices = np.asarray(slices)
    weights = float(profile.levels) ** np.arange(slices.shape[-1])
    out = slices @ weights
    if np.issubdtype(slices.dtype, np.integer):
        return np.rint(out).astype(np.int64)
    return out
