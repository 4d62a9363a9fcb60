"""Desk-scale data: synthetic generators, the SKD1 file format, stratified
subsets, and deterministic batching.

All generators and samplers are pure functions of their seeds; nothing
here touches global RNG state. Subsets taken at increasing fractions of
the same seed nest (the 20% subset is contained in the 40% subset), so
data-efficiency sweeps are monotone in information.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import ConfigurationError, DataError, FormatError
from .rng import generator

SKD_MAGIC = b"SKD1"
_SHUFFLE_TAG = 0x51AD  # distinct stream for the post-sample reshuffle


@dataclass
class Dataset:
    inputs: np.ndarray            # float32; (N, C, H, W) images or (N, d) flat
    labels: np.ndarray            # int64
    class_count: int
    split: str = "train"

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1 or self.inputs.shape[0] != self.labels.shape[0]:
            raise DataError(f"inputs {self.inputs.shape} and labels {self.labels.shape} disagree")
        if self.class_count < 1:
            raise DataError(f"class count must be positive, got {self.class_count}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DataError(f"label out of range for {self.class_count} classes")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.class_count == other.class_count
            and self.inputs.shape == other.inputs.shape
            and np.array_equal(self.inputs, other.inputs)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class SubsetSpec:
    fraction: float
    seed: int


def gen_spirals(classes: int, per_class: int, noise_sigma: float, seed: int) -> Dataset:
    """Interleaved 2-d spiral arms inside the unit square."""
    if classes < 2:
        raise ConfigurationError(f"need at least 2 classes, got {classes}")
    if per_class < 1:
        raise ConfigurationError(f"per_class must be positive, got {per_class}")
    xs, ys = [], []
    t = np.linspace(0.0, 1.0, per_class, dtype=np.float64)
    radius = 0.08 + 0.38 * t
    for c in range(classes):
        angle = 2.0 * np.pi * (1.75 * t + c / classes)
        pts = np.stack([0.5 + radius * np.cos(angle), 0.5 + radius * np.sin(angle)], axis=1)
        if noise_sigma:
            pts = pts + generator(seed, c).normal(0.0, noise_sigma, size=pts.shape)
        xs.append(np.clip(pts, 0.0, 1.0))
        ys.append(np.full(per_class, c, dtype=np.int64))
    return Dataset(np.concatenate(xs).astype(np.float32), np.concatenate(ys), classes)


def spiral_arm(classes: int, per_class: int, c: int) -> np.ndarray:
    """Noise-free arm coordinates for class ``c`` (the generator's backbone)."""
    t = np.linspace(0.0, 1.0, per_class, dtype=np.float64)
    radius = 0.08 + 0.38 * t
    angle = 2.0 * np.pi * (1.75 * t + c / classes)
    return np.stack([0.5 + radius * np.cos(angle), 0.5 + radius * np.sin(angle)], axis=1).astype(np.float32)


def gen_tiles(classes: int, per_class: int, side: int, seed: int, noise_sigma: float = 0.1) -> Dataset:
    """Single-channel images with class-specific frequency patterns."""
    if classes < 2:
        raise ConfigurationError(f"need at least 2 classes, got {classes}")
    if side not in (8, 16, 32):
        raise ConfigurationError(f"side must be one of 8, 16, 32, got {side}")
    if per_class < 1:
        raise ConfigurationError(f"per_class must be positive, got {per_class}")
    yy, xx = np.meshgrid(np.arange(side, dtype=np.float64), np.arange(side, dtype=np.float64), indexing="ij")
    xs, ys = [], []
    for c in range(classes):
        fx = 1 + c % 4
        fy = 1 + (c // 4) % 4
        phase = 0.7 * c
        pattern = 0.5 + 0.25 * np.sin(2 * np.pi * fx * (xx + 0.5) / side + phase) \
                      + 0.25 * np.cos(2 * np.pi * fy * (yy + 0.5) / side)
        imgs = np.broadcast_to(pattern, (per_class, side, side)).copy()
        if noise_sigma:
            imgs += generator(seed, c).normal(0.0, noise_sigma, size=imgs.shape)
        xs.append(np.clip(imgs, 0.0, 1.0)[:, None, :, :].astype(np.float32))
        ys.append(np.full(per_class, c, dtype=np.int64))
    return Dataset(np.concatenate(xs), np.concatenate(ys), classes)


def tile_pattern(side: int, c: int) -> np.ndarray:
    """Noise-free pattern for class ``c`` (the generator's backbone)."""
    yy, xx = np.meshgrid(np.arange(side, dtype=np.float64), np.arange(side, dtype=np.float64), indexing="ij")
    fx = 1 + c % 4
    fy = 1 + (c // 4) % 4
    pattern = 0.5 + 0.25 * np.sin(2 * np.pi * fx * (xx + 0.5) / side + 0.7 * c) \
                  + 0.25 * np.cos(2 * np.pi * fy * (yy + 0.5) / side)
    return pattern.astype(np.float32)


# --- SKD1 file format -------------------------------------------------------

def save_skd(dataset: Dataset, path) -> None:
    """Write the SKD1 layout: header, then (label, HWC float32 pixels) records."""
    if dataset.inputs.ndim == 4:
        n, c, h, w = dataset.inputs.shape
        pixels = dataset.inputs.transpose(0, 2, 3, 1)  # row-major H, W, C
    elif dataset.inputs.ndim == 2:
        n, d = dataset.inputs.shape
        h = w = 1
        c = d
        pixels = dataset.inputs.reshape(n, 1, 1, d)
    else:
        raise DataError(f"cannot serialize inputs of shape {dataset.inputs.shape}")
    if dataset.class_count > 0xFFFF:
        raise DataError(f"class count {dataset.class_count} exceeds the 16-bit label field")
    with open(path, "wb") as fh:
        fh.write(SKD_MAGIC)
        fh.write(struct.pack("<5I", n, h, w, c, dataset.class_count))
        for i in range(n):
            fh.write(struct.pack("<H", int(dataset.labels[i])))
            fh.write(np.ascontiguousarray(pixels[i], dtype="<f4").tobytes())


def load_skd(path) -> Dataset:
    """Read an SKD1 file; malformed input fails with the offending byte offset."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != SKD_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r} at offset 0")
    if len(blob) < 24:
        raise FormatError(f"{path}: truncated header at offset {len(blob)}")
    n, h, w, c, class_count = struct.unpack_from("<5I", blob, 4)
    if class_count < 1:
        raise FormatError(f"{path}: class count 0 at offset 20")
    record = 2 + 4 * h * w * c
    expected = 24 + n * record
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {n} records, file ends at offset {len(blob)}")
    labels = np.zeros(n, dtype=np.int64)
    pixels = np.zeros((n, h, w, c), dtype=np.float32)
    off = 24
    for i in range(n):
        (label,) = struct.unpack_from("<H", blob, off)
        if label >= class_count:
            raise FormatError(f"{path}: label {label} >= class count {class_count} at offset {off}")
        labels[i] = label
        pixels[i] = np.frombuffer(blob, dtype="<f4", count=h * w * c, offset=off + 2).reshape(h, w, c)
        off += record
    if h == 1 and w == 1:
        inputs = pixels.reshape(n, c)
    else:
        inputs = pixels.transpose(0, 3, 1, 2)
    return Dataset(inputs, labels, class_count)


# --- sampling ----------------------------------------------------------------

def stratified_subset(dataset: Dataset, spec: SubsetSpec) -> Dataset:
    """Seeded per-class sample without replacement; nested across fractions.

    For a fixed seed, each class's candidate order is a single fixed
    permutation and a fraction takes a prefix of it, so smaller
    fractions are subsets of larger ones.
    """
    if not 0.0 < spec.fraction <= 1.0:
        raise ConfigurationError(f"fraction must lie in (0, 1], got {spec.fraction}")
    chosen = subset_indices(dataset, spec)
    return Dataset(dataset.inputs[chosen], dataset.labels[chosen], dataset.class_count, split=dataset.split)


def subset_indices(dataset: Dataset, spec: SubsetSpec) -> np.ndarray:
    """The indices stratified_subset selects, in their shuffled order."""
    if not 0.0 < spec.fraction <= 1.0:
        raise ConfigurationError(f"fraction must lie in (0, 1], got {spec.fraction}")
    picks = []
    for c in range(dataset.class_count):
        members = np.flatnonzero(dataset.labels == c)
        if members.size == 0:
            raise DataError(f"class {c} has no samples")
        take = int(round(spec.fraction * members.size))
        if take < 1:
            raise DataError(f"fraction {spec.fraction} yields zero samples for class {c}")
        order = generator(spec.seed, c).permutation(members.size)
        picks.append(members[order[:take]])
    chosen = np.concatenate(picks)
    final = generator(spec.seed, _SHUFFLE_TAG).permutation(chosen.size)
    return chosen[final]


def batches(dataset: Dataset, batch_size: int, epoch_seed) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Seeded permutation of the dataset in batches; last partial batch kept."""
    if batch_size < 1:
        raise ConfigurationError(f"batch size must be positive, got {batch_size}")
    key = epoch_seed if isinstance(epoch_seed, (tuple, list)) else (epoch_seed,)
    perm = generator(*key).permutation(len(dataset))
    for start in range(0, len(dataset), batch_size):
        idx = perm[start : start + batch_size]
        yield dataset.inputs[idx], dataset.labels[idx]


def num_batches(dataset: Dataset, batch_size: int) -> int:
    return (len(dataset) + batch_size - 1) // batch_size
