"""Image ingestion: IDX parsing, patch quantization, synthetic data.

Pixels are quantized to ``levels`` equal-width bins (``floor(v * levels /
256)``; with three levels 0-85 -> 0, 86-170 -> 1, 171-255 -> 2). The policy
is named so an alternative (e.g. equal-frequency) could be added without
changing recorded results; every experiment output records the policy used.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, IdxFormatError
from .pmf import Pmf
from .space import StateSpace

__all__ = [
    "PatchSpec",
    "EmpiricalDataset",
    "parse_idx_images",
    "encode_idx_images",
    "load_idx_images",
    "quantize_pixels",
    "quantize_and_extract",
    "default_patch_locations",
    "validate_disjoint",
    "synthetic_dataset",
    "save_dataset",
    "load_dataset",
]

IDX_IMAGE_MAGIC = 0x00000803
QUANTIZATION_POLICY = "equal_width"

# Cap on count*rows*cols so a corrupt header cannot trigger a huge allocation.
_MAX_PIXELS = 1 << 33

DATASET_FORMAT = "lodem-dataset"
DATASET_FORMAT_VERSION = 1


@dataclass(frozen=True)
class PatchSpec:
    """A small pixel patch at a fixed location, with a quantization depth."""

    row: int
    col: int
    height: int = 2
    width: int = 2
    levels: int = 3

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise DomainError("patch must be at least 1x1")
        if self.levels < 2:
            raise DomainError("need at least 2 quantization levels")
        if self.row < 0 or self.col < 0:
            raise DomainError("patch offsets must be non-negative")
        if self.row + self.height > 28 or self.col + self.width > 28:
            raise DomainError("patch must fit within a 28x28 image")

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def space(self) -> StateSpace:
        return StateSpace((self.levels,) * self.n_pixels)


@dataclass(frozen=True, eq=False)
class EmpiricalDataset:
    """Observed-state counts with their normalized distribution."""

    space: StateSpace
    counts: np.ndarray
    t: int

    def __init__(self, space: StateSpace, counts, t: int | None = None):
        counts = np.array(counts, dtype=np.int64, copy=True)
        if counts.shape != (space.total,):
            raise DomainError("need one count per state")
        if np.any(counts < 0):
            raise DomainError("counts must be non-negative")
        total = int(counts.sum())
        if t is None:
            t = total
        elif total != t:
            raise DomainError(f"counts sum to {total}, expected t={t}")
        if t == 0:
            raise DomainError("dataset is empty")
        counts.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "t", t)

    @cached_property
    def pmf(self) -> Pmf:
        return Pmf(self.space, self.counts / self.t)


def parse_idx_images(data: bytes) -> np.ndarray:
    """Decode an IDX image byte stream into a (count, rows, cols) uint8 array."""
    if len(data) < 16:
        raise IdxFormatError(
            f"truncated header: got {len(data)} bytes, need 16", offset=len(data)
        )
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise IdxFormatError(
            f"bad magic 0x{magic:08x} at offset 0, expected 0x{IDX_IMAGE_MAGIC:08x}",
            offset=0,
        )
    expected = count * rows * cols
    if expected > _MAX_PIXELS:
        raise IdxFormatError(
            f"dimensions {count}x{rows}x{cols} overflow the supported size", offset=4
        )
    actual = len(data) - 16
    if actual != expected:
        raise IdxFormatError(
            f"payload has {actual} bytes, header promises {expected}", offset=16
        )
    images = np.frombuffer(data, dtype=np.uint8, offset=16).reshape(count, rows, cols)
    images = images.copy()
    images.setflags(write=False)
    return images


def encode_idx_images(images: np.ndarray) -> bytes:
    """Inverse of :func:`parse_idx_images`; byte-identical round trip."""
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise DomainError("expected a (count, rows, cols) array")
    header = struct.pack(">IIII", IDX_IMAGE_MAGIC, *images.shape)
    return header + images.tobytes()


def load_idx_images(path: str | Path) -> np.ndarray:
    """Read an IDX image file, transparently handling gzip compression."""
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return parse_idx_images(raw)


def quantize_pixels(pixels: np.ndarray, levels: int) -> np.ndarray:
    """Equal-width binning of 0-255 pixel values into ``levels`` bins."""
    return (pixels.astype(np.int64) * levels) // 256


def quantize_and_extract(images: np.ndarray, spec: PatchSpec) -> EmpiricalDataset:
    """Quantized patch states counted over all images."""
    if images.ndim != 3:
        raise DomainError("expected a (count, rows, cols) image array")
    n, rows, cols = images.shape
    if spec.row + spec.height > rows or spec.col + spec.width > cols:
        raise DomainError("patch does not fit inside the images")
    patch = images[:, spec.row : spec.row + spec.height, spec.col : spec.col + spec.width]
    levels = quantize_pixels(patch.reshape(n, spec.n_pixels), spec.levels)
    space = spec.space()
    flat = np.zeros(n, dtype=np.int64)
    for pixel in range(spec.n_pixels):
        flat = flat * spec.levels + levels[:, pixel]
    counts = np.bincount(flat, minlength=space.total)
    return EmpiricalDataset(space, counts, n)


def validate_disjoint(specs: Sequence[PatchSpec]) -> None:
    """Raise if any two patches overlap."""
    seen: dict[tuple[int, int], int] = {}
    for idx, spec in enumerate(specs):
        for r in range(spec.row, spec.row + spec.height):
            for c in range(spec.col, spec.col + spec.width):
                if (r, c) in seen:
                    raise DomainError(
                        f"patches {seen[(r, c)]} and {idx} overlap at pixel ({r}, {c})"
                    )
                seen[(r, c)] = idx


def default_patch_locations() -> tuple[PatchSpec, ...]:
    """Eight non-overlapping 2x2 patches in the central image region."""
    specs = tuple(
        PatchSpec(row=row, col=col) for row in (12, 14) for col in (10, 12, 14, 16)
    )
    validate_disjoint(specs)
    return specs


def synthetic_dataset(
    seed: int,
    space: StateSpace | None = None,
    correlation_strength: float = 0.5,
    t: int = 60000,
) -> EmpiricalDataset:
    """Reproducible stand-in for an image patch set.

    Mixes a random fully-independent distribution with a random set of
    low-entropy modes; ``correlation_strength`` is the mode weight, so 0
    gives (near-)independent variables and 1 concentrates on the modes.
    The mixture is rounded to integer counts summing to ``t``.
    """
    if not 0.0 <= correlation_strength <= 1.0:
        raise DomainError("correlation_strength must be in [0, 1]")
    if space is None:
        space = StateSpace((3, 3, 3, 3))
    if t < 1:
        raise DomainError("t must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    product = np.ones(1)
    for card in space.cards:
        product = np.kron(product, rng.dirichlet(np.ones(card)))
    n_modes = min(space.total, max(2, space.n_vars + 1))
    modes = np.zeros(space.total)
    chosen = rng.choice(space.total, size=n_modes, replace=False)
    modes[chosen] = rng.dirichlet(np.full(n_modes, 0.5))
    mix = (1.0 - correlation_strength) * product + correlation_strength * modes
    mix /= mix.sum()
    counts = np.floor(mix * t).astype(np.int64)
    # distribute the rounding remainder to the largest fractional parts
    deficit = t - int(counts.sum())
    if deficit > 0:
        frac = mix * t - counts
        order = np.argsort(-frac, kind="stable")
        counts[order[:deficit]] += 1
    return EmpiricalDataset(space, counts, t)


def save_dataset(dataset: EmpiricalDataset, path: str | Path, meta: dict | None = None) -> None:
    doc = {
        "format": DATASET_FORMAT,
        "version": DATASET_FORMAT_VERSION,
        "cards": list(dataset.space.cards),
        "t": dataset.t,
        "counts": dataset.counts.tolist(),
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(doc))


def load_dataset(path: str | Path) -> EmpiricalDataset:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != DATASET_FORMAT:
        raise DomainError(f"not a dataset document: format={doc.get('format')!r}")
    if doc.get("version") != DATASET_FORMAT_VERSION:
        raise DomainError(f"unsupported dataset version {doc.get('version')!r}")
    return EmpiricalDataset(StateSpace(doc["cards"]), doc["counts"], doc["t"])
