"""Triplet construction and noise-aware contrastive training of the head.

CDE builds triplets from content-label concatenation; CDI builds them from
dropout views of the content alone (light dropout for positives, heavy for
negatives). Training minimizes a hinge over cosine similarities, with the
quantize/slice/noise chain applied on the forward pass only (straight-through
backward).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codec import (
    ProjectionHead,
    QuantSpec,
    bit_slice_matrix,
    hash_embed,
    offset_encode,
    quantize,
    recombine,
)
from .devices import SIGMA_REF, DeviceProfile, NoiseConfig, device_by_name
from .formats import DocumentRecord

CDE_SEPARATOR = " | "


@dataclass(frozen=True)
class HashEmbedder:
    """Default text embedder for standalone runs."""

    din: int = 384
    seed: int = 0

    def __call__(self, text: str) -> np.ndarray:
        return hash_embed(text, self.din, self.seed)


@dataclass
class TripletSet:
    anchors: np.ndarray  # (n*K, din)
    positives: np.ndarray
    negatives: np.ndarray
    provenance: str  # "CDE" | "CDI"
    k_factor: int
    sampled_with_replacement: bool = False

    def __len__(self) -> int:
        return self.anchors.shape[0]


@dataclass
class TrainConfig:
    margin: float = 0.5
    k_factor: int = 5
    dropout: float = 0.1
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 64
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    device: DeviceProfile = field(default_factory=lambda: device_by_name("Device-1"))
    quant: QuantSpec | None = field(default_factory=QuantSpec)
    distance: str = "cosine"  # or "euclidean"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.dropout <= 0.2:
            raise ValueError("dropout must be in (0, 0.2]")
        if self.k_factor < 1:
            raise ValueError("k_factor must be >= 1")
        if self.margin <= 0:
            raise ValueError("margin must be > 0")
        if self.distance not in ("cosine", "euclidean"):
            raise ValueError(f"unknown distance {self.distance!r}")


@dataclass
class TrainReport:
    epoch_losses: list[float]
    n_triplets: int
    epochs: int
    seed: int
    aborted: bool = False

    def to_dict(self) -> dict:
        return {
            "epoch_losses": self.epoch_losses,
            "n_triplets": self.n_triplets,
            "epochs": self.epochs,
            "seed": self.seed,
            "aborted": self.aborted,
        }


def dropout_embed(base: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Zero coordinates with probability `rate`, rescale, renormalize."""
    if not 0 <= rate < 1:
        raise ValueError("rate must be in [0, 1)")
    base = np.asarray(base, dtype=np.float64)
    if rate == 0.0:
        return base.copy()
    # Sparse embeddings can lose every nonzero coordinate at high rates, so
    # resample a bounded number of times before giving up.
    for _ in range(16):
        keep = rng.random(base.shape) >= rate
        dropped = np.where(keep, base / (1.0 - rate), 0.0)
        norm = np.linalg.norm(dropped)
        if norm > 0:
            return dropped / norm
    raise ValueError("dropout zeroed the embedding on every resample")


def construct_cde(
    dataset: list[DocumentRecord],
    k_factor: int,
    rate: float,
    embedder,
    seed: int = 0,
) -> TripletSet:
    """Content-label concatenation triplets for explicitly labeled data."""
    if any(r.label is None for r in dataset):
        raise ValueError("CDE requires a label on every record")
    labels = [r.label for r in dataset]
    distinct = sorted({str(l) for l in labels})
    if len(distinct) < 2:
        raise ValueError("CDE requires at least 2 distinct labels")
    rng = np.random.default_rng(seed)
    anchors, positives, negatives = [], [], []
    replacement = False
    for rec in dataset:
        own = str(rec.label)
        foreign = [l for l in distinct if l != own]
        if k_factor <= len(foreign):
            picks = rng.choice(len(foreign), size=k_factor, replace=False)
        else:
            picks = rng.choice(len(foreign), size=k_factor, replace=True)
            replacement = True
        anchor_vec = embedder(rec.content + CDE_SEPARATOR + own)
        for j in picks:
            anchors.append(anchor_vec)
            positives.append(dropout_embed(anchor_vec, rate, rng))
            negatives.append(embedder(rec.content + CDE_SEPARATOR + foreign[j]))
    return TripletSet(
        anchors=np.asarray(anchors, dtype=np.float32),
        positives=np.asarray(positives, dtype=np.float32),
        negatives=np.asarray(negatives, dtype=np.float32),
        provenance="CDE",
        k_factor=k_factor,
        sampled_with_replacement=replacement,
    )


def construct_cdi(
    dataset: list[DocumentRecord],
    k_factor: int,
    rate: float,
    embedder,
    seed: int = 0,
) -> TripletSet:
    """Dropout-view triplets for implicitly labeled data.

    Positives use light dropout `rate`; negatives use heavy dropout 1 - rate,
    imitating a noise-corrupted copy of the same content.
    """
    if not 0 < rate <= 0.2:
        raise ValueError("rate must be in (0, 0.2]")
    rng = np.random.default_rng(seed)
    anchors, positives, negatives = [], [], []
    for rec in dataset:
        anchor_vec = embedder(rec.content)
        for _ in range(k_factor):
            anchors.append(anchor_vec)
            positives.append(dropout_embed(anchor_vec, rate, rng))
            negatives.append(dropout_embed(anchor_vec, 1.0 - rate, rng))
    return TripletSet(
        anchors=np.asarray(anchors, dtype=np.float32),
        positives=np.asarray(positives, dtype=np.float32),
        negatives=np.asarray(negatives, dtype=np.float32),
        provenance="CDI",
        k_factor=k_factor,
    )


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def _cosine_grads(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    c = float(a @ b) / (na * nb)
    return b / (na * nb) - c * a / na**2, a / (na * nb) - c * b / nb**2


def triplet_loss(
    anchor: np.ndarray,
    positive: np.ndarray,
    negative: np.ndarray,
    margin: float,
    distance: str = "cosine",
) -> float:
    """Hinge pulling the anchor toward the positive by at least `margin`."""
    a = np.asarray(anchor, dtype=np.float64)
    p = np.asarray(positive, dtype=np.float64)
    n = np.asarray(negative, dtype=np.float64)
    if distance == "cosine":
        gap = _cosine(a, n) - _cosine(a, p)
    else:
        gap = float(np.linalg.norm(a - p) - np.linalg.norm(a - n))
    return max(0.0, gap + margin)


def triplet_loss_grads(
    anchor: np.ndarray,
    positive: np.ndarray,
    negative: np.ndarray,
    margin: float,
    distance: str = "cosine",
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Loss plus analytic gradients w.r.t. all three inputs."""
    a = np.asarray(anchor, dtype=np.float64)
    p = np.asarray(positive, dtype=np.float64)
    n = np.asarray(negative, dtype=np.float64)
    loss = triplet_loss(a, p, n, margin, distance)
    if loss == 0.0:
        z = np.zeros_like(a)
        return 0.0, z, z.copy(), z.copy()
    if distance == "cosine":
        ga_n, gn = _cosine_grads(a, n)
        ga_p, gp = _cosine_grads(a, p)
        return loss, ga_n - ga_p, -gp, gn
    dp = a - p
    dn = a - n
    ndp = np.linalg.norm(dp) or 1.0
    ndn = np.linalg.norm(dn) or 1.0
    return loss, dp / ndp - dn / ndn, -dp / ndp, dn / ndn


def _slice_noise_decode(
    y: np.ndarray,
    device: DeviceProfile,
    quant: QuantSpec,
    noise: NoiseConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Quantize, slice, perturb each cell, recombine, decode, renormalize."""
    q = quantize(y, quant)
    u = offset_encode(q, quant)
    slices = bit_slice_matrix(u, device, quant)  # (..., d, S)
    sigmas = np.asarray(device.sigma_per_level)[slices] * (noise.sigma_scale / SIGMA_REF)
    noisy = slices + (device.levels - 1) * rng.standard_normal(slices.shape) * sigmas
    decoded = (recombine(noisy, device) - quant.offset) * quant.scale
    norms = np.linalg.norm(decoded, axis=-1, keepdims=True)
    norms = np.where(norms == 0, 1.0, norms)
    return decoded / norms


def noisy_forward(
    head: ProjectionHead,
    base: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Deployment-path forward: project, normalize, quantize+noise, renormalize.

    The quantization and noise stages are forward-only; the training backward
    pass treats them as identity.
    """
    base = np.asarray(base, dtype=np.float64)
    z = base @ head.w
    y = z / np.linalg.norm(z)
    if cfg.quant is None:
        return y
    return _slice_noise_decode(y, cfg.device, cfg.quant, cfg.noise, rng)


def _forward_branch(w, x, cfg, rng):
    """Batch forward returning (noisy output, clean normalized, norms)."""
    z = x @ w
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    y = z / norms
    if cfg.quant is None:
        return y, y, norms
    return _slice_noise_decode(y, cfg.device, cfg.quant, cfg.noise, rng), y, norms


def _batch_grad(w, triplets: TripletSet, idx, cfg, rng):
    """Summed loss and dL/dW for one mini-batch (1/K weight per triplet)."""
    xa = triplets.anchors[idx].astype(np.float64)
    xp = triplets.positives[idx].astype(np.float64)
    xn = triplets.negatives[idx].astype(np.float64)
    ya, ca, na = _forward_branch(w, xa, cfg, rng)
    yp, cp, npos = _forward_branch(w, xp, cfg, rng)
    yn, cn, nn = _forward_branch(w, xn, cfg, rng)

    sim_ap = np.sum(ya * yp, axis=1)
    sim_an = np.sum(ya * yn, axis=1)
    hinge = sim_an - sim_ap + cfg.margin
    active = hinge > 0
    weight = np.where(active, 1.0 / cfg.k_factor, 0.0)[:, None]
    loss = float(np.sum(np.maximum(hinge, 0.0)) / cfg.k_factor)

    # Cosine gradients on the (unit-norm) noisy outputs; straight-through
    # back to the clean normalized projection, then through normalization.
    g_ya = weight * ((yn - sim_an[:, None] * ya) - (yp - sim_ap[:, None] * ya))
    g_yp = weight * (-(ya - sim_ap[:, None] * yp))
    g_yn = weight * (ya - sim_an[:, None] * yn)

    grad = np.zeros_like(w)
    for x, g, clean, norms in ((xa, g_ya, ca, na), (xp, g_yp, cp, npos), (xn, g_yn, cn, nn)):
        gz = (g - np.sum(g * clean, axis=1, keepdims=True) * clean) / norms
        grad += x.T @ gz
    return loss, grad


def train(head: ProjectionHead, triplets: TripletSet, cfg: TrainConfig) -> TrainReport:
    """Mini-batch Adam over the projection weights; mutates `head` in place."""
    if len(triplets) == 0:
        raise ValueError("empty triplet set")
    if cfg.distance != "cosine":
        raise NotImplementedError("training supports the cosine objective only")
    rng = np.random.default_rng(cfg.seed)
    w = head.w
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    epoch_losses: list[float] = []
    n = len(triplets)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grad = _batch_grad(w, triplets, idx, cfg, rng)
            if not np.isfinite(loss):
                return TrainReport(epoch_losses, n, cfg.epochs, cfg.seed, aborted=True)
            total += loss
            step += 1
            m = beta1 * m + (1 - beta1) * grad
            v = beta2 * v + (1 - beta2) * grad**2
            m_hat = m / (1 - beta1**step)
            v_hat = v / (1 - beta2**step)
            w -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        epoch_losses.append(total / n)
    return TrainReport(epoch_losses, n, cfg.epochs, cfg.seed)
