"""IDX (MNIST / Fashion-MNIST) loading, deterministic batching, and a
synthetic stand-in dataset so the test suite never needs the network.

IDX layout: big-endian 32-bit magic (0x00000803 images, 0x00000801
labels), big-endian 32-bit dimension sizes, then raw unsigned bytes.
Gzip wrapping is detected by the 0x1f8b prefix.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IdxDecodeError(ValueError):
    pass


@dataclass
class ImageDataset:
    images: np.ndarray  # (N, 784) floats in [0, 1]
    labels: np.ndarray  # (N,) ints in [0, 10)
    name: str = "unnamed"
    split: str = "train"

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels are misaligned")

    def __len__(self):
        return len(self.labels)

    def subset(self, n: int) -> "ImageDataset":
        return ImageDataset(self.images[:n], self.labels[:n], self.name, self.split)


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def load_idx_images(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise IdxDecodeError(f"{path}: truncated header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise IdxDecodeError(f"{path}: magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
    expected = 16 + n * rows * cols
    if len(raw) != expected:
        raise IdxDecodeError(f"{path}: expected {expected} bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(n, rows, cols)


def load_idx_labels(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise IdxDecodeError(f"{path}: truncated header")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise IdxDecodeError(f"{path}: magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}")
    if len(raw) != 8 + n:
        raise IdxDecodeError(f"{path}: expected {8 + n} bytes, got {len(raw)}")
    labels = np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        raise IdxDecodeError(f"{path}: label {labels.max()} out of range [0, 10)")
    return labels


def encode_idx_images(images: np.ndarray) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    return struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols) + images.tobytes()


def encode_idx_labels(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABEL_MAGIC, labels.size) + labels.tobytes()


def normalize_and_flatten(raw: np.ndarray) -> np.ndarray:
    """uint8 (N, H, W) -> float (N, H*W) in [0, 1], row-major."""
    raw = np.asarray(raw)
    return raw.reshape(len(raw), -1).astype(np.float64) / 255.0


def load_dataset(images_path, labels_path, name="mnist", split="train") -> ImageDataset:
    images = normalize_and_flatten(load_idx_images(images_path))
    labels = load_idx_labels(labels_path)
    return ImageDataset(images, labels, name, split)


def batch_iter(ds: ImageDataset, batch_size: int, seed: int, epoch: int):
    """Batches in an order keyed by (seed, epoch); last partial batch kept."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if len(ds) == 0:
        raise ValueError("cannot batch an empty dataset")
    perm = np.random.default_rng([seed, epoch]).permutation(len(ds))
    for start in range(0, len(ds), batch_size):
        idx = perm[start : start + batch_size]
        yield ds.images[idx], ds.labels[idx]


def epoch_stream(ds: ImageDataset, batch_size: int, seed: int, epochs: int):
    for epoch in range(epochs):
        yield from batch_iter(ds, batch_size, seed, epoch)


def synthetic_onehot_dataset(n_samples: int, n_classes: int, seed: int,
                             name="synthetic", split="train") -> ImageDataset:
    """Class-conditional Gaussian blobs in pixel space; linearly separable
    enough that a small MLP trains in a couple of epochs."""
    if n_classes > 784:
        raise ValueError("n_classes must be <= 784")
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.1, 0.9, size=(n_classes, 784))
    labels = rng.integers(0, n_classes, size=n_samples)
    images = means[labels] + rng.normal(0.0, 0.25, size=(n_samples, 784))
    images = np.clip(images, 0.0, 1.0)
    return ImageDataset(images, labels, name, split)


def one_hot_labels(labels: np.ndarray, n_classes: int = 10) -> np.ndarray:
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out
