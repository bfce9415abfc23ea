"""NVM device profiles and programming-noise sampling.

Each multi-level cell stores one of L = 2**bits_per_cell conductance levels.
Per-level noise is zero-mean Gaussian in normalized-conductance units
(full conductance range = 1, level l sits at l/(L-1)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Reference scale: sigma_scale == SIGMA_REF reproduces the table values as-is.
SIGMA_REF = 0.1


class NoiseMode(str, Enum):
    DEVICE_TABLE = "DeviceTable"
    NAIVE_GAUSSIAN = "NaiveGaussian"


@dataclass(frozen=True)
class DeviceProfile:
    """An NVM cell type: level count and per-level programming-noise sigma."""

    name: str
    bits_per_cell: int
    sigma_per_level: tuple[float, ...]

    def __post_init__(self):
        if self.bits_per_cell < 1:
            raise ValueError(f"bits_per_cell must be >= 1, got {self.bits_per_cell}")
        sigmas = tuple(float(s) for s in self.sigma_per_level)
        object.__setattr__(self, "sigma_per_level", sigmas)
        if len(sigmas) != self.levels:
            raise ValueError(
                f"{self.name}: expected {self.levels} sigma entries, got {len(sigmas)}"
            )
        if any(s < 0 for s in sigmas):
            raise ValueError(f"{self.name}: negative sigma")

    @property
    def levels(self) -> int:
        return 2 ** self.bits_per_cell

    def to_json(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "bits_per_cell": self.bits_per_cell,
                "sigma_per_level": list(self.sigma_per_level),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DeviceProfile":
        obj = json.loads(text)
        return cls(
            name=obj["name"],
            bits_per_cell=int(obj["bits_per_cell"]),
            sigma_per_level=tuple(obj["sigma_per_level"]),
        )


@dataclass(frozen=True)
class NoiseConfig:
    """Global noise settings for programming and evaluation."""

    sigma_scale: float = 0.1
    mode: NoiseMode = NoiseMode.DEVICE_TABLE
    naive_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_scale < 0:
            raise ValueError("sigma_scale must be >= 0")
        if self.naive_sigma < 0:
            raise ValueError("naive_sigma must be >= 0")


# Characterized devices: two RRAM cells, one measured FeFET, two synthesized
# FeFETs. RRAM_1 is listed as single-bit (two levels, uniform sigma).
_BUILTIN = (
    ("RRAM_1", 1, (0.0100, 0.0100)),
    ("FeFET_2", 2, (0.0067, 0.0135, 0.0135, 0.0067)),
    ("FeFET_3", 2, (0.0049, 0.0146, 0.0146, 0.0049)),
    ("RRAM_4", 2, (0.0038, 0.0151, 0.0151, 0.0038)),
    ("FeFET_6", 2, (0.0026, 0.0155, 0.0155, 0.0026)),
)

_ALIASES = {f"Device-{i + 1}": name for i, (name, _, _) in enumerate(_BUILTIN)}


def builtin_devices() -> list[DeviceProfile]:
    """The five characterized device profiles, in Device-1..Device-5 order."""
    return [DeviceProfile(n, b, s) for n, b, s in _BUILTIN]


def device_by_name(name: str) -> DeviceProfile:
    """Look up a builtin profile by its name or its Device-N alias."""
    name = _ALIASES.get(name, name)
    for prof in builtin_devices():
        if prof.name == name:
            return prof
    raise KeyError(f"unknown device {name!r}")


def cell_rng(seed: int, tile: int, epoch: int, iteration: int = 0) -> np.random.Generator:
    """Counter-based substream for one tile's noise field.

    Philox keyed on the global seed with the (tile, epoch, iteration)
    coordinates in the counter, so streams are independent of the order in
    which tiles are programmed.
    """
    bitgen = np.random.Philox(
        key=np.uint64(seed), counter=[np.uint64(tile), np.uint64(epoch), np.uint64(iteration), 0]
    )
    return np.random.Generator(bitgen)


def noise_sigma(profile: DeviceProfile, level: int, cfg: NoiseConfig) -> float:
    """Effective noise std for one programmed level, after global scaling."""
    if not 0 <= level < profile.levels:
        raise ValueError(f"level {level} out of range for {profile.levels}-level device")
    return profile.sigma_per_level[level] * cfg.sigma_scale / SIGMA_REF


def sample_cell_noise(
    profile: DeviceProfile, level: int, cfg: NoiseConfig, rng: np.random.Generator
) -> float:
    """One normalized-conductance perturbation draw for a cell at `level`."""
    if cfg.mode is not NoiseMode.DEVICE_TABLE:
        raise ValueError("sample_cell_noise requires DeviceTable mode")
    sigma = noise_sigma(profile, level, cfg)
    if sigma == 0.0:
        return 0.0
    return float(rng.standard_normal() * sigma)


def sample_noise_field(
    profile: DeviceProfile,
    levels: np.ndarray,
    cfg: NoiseConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorized noise draws for a matrix of target levels.

    Draw order is fixed (C order over the level matrix), so the field is
    reproducible for a given substream regardless of caller iteration order.
    """
    if cfg.mode is not NoiseMode.DEVICE_TABLE:
        raise ValueError("sample_noise_field requires DeviceTable mode")
    levels = np.asarray(levels)
    if levels.size and (levels.min() < 0 or levels.max() >= profile.levels):
        raise ValueError("target level out of range")
    sigmas = np.asarray(profile.sigma_per_level)[levels] * (cfg.sigma_scale / SIGMA_REF)
    if cfg.sigma_scale == 0.0:
        return np.zeros(levels.shape)
    return rng.standard_normal(levels.shape) * sigmas


def perturb_embedding_naive(
    vec: np.ndarray, naive_sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """Add i.i.d. Gaussian noise directly to fp32 embedding coordinates."""
    vec = np.asarray(vec, dtype=np.float32)
    if naive_sigma == 0.0:
        return vec.copy()
    noise = rng.standard_normal(vec.shape).astype(np.float32) * np.float32(naive_sigma)
    return vec + noise
