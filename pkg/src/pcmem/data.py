"""MNIST IDX parsing, two-digit filtering, splits and batching.

The pipeline filters standard MNIST down to digits 4 and 7, shuffles the
filtered training subset with a seed and takes the first 10097 examples as
the training set (the remaining 2010 become validation); the filtered test
subset (2010 examples) is the test set. Pixels are scaled to [0, 1] and
labels mapped 4 -> 0, 7 -> 1.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_UBYTE = 0x08

TRAIN_SIZE = 10097
VAL_SIZE = 2010
TEST_SIZE = 2010

DEFAULT_FILENAMES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


class IdxFormatError(ValueError):
    """Malformed IDX container (bad magic, type code, or payload length)."""


def parse_idx(data: bytes) -> np.ndarray:
    """Parse one IDX byte stream into a uint8 array of the declared shape."""
    if len(data) < 4:
        raise IdxFormatError("truncated IDX header")
    zero0, zero1, type_code, n_dims = struct.unpack(">BBBB", data[:4])
    if zero0 != 0 or zero1 != 0:
        raise IdxFormatError(f"bad IDX magic bytes ({zero0:#x}, {zero1:#x})")
    if type_code != IDX_UBYTE:
        raise IdxFormatError(f"unsupported IDX type code {type_code:#x}")
    header_len = 4 + 4 * n_dims
    if len(data) < header_len:
        raise IdxFormatError("truncated IDX dimension header")
    dims = struct.unpack(f">{n_dims}I", data[4:header_len])
    expected = int(np.prod(dims)) if dims else 0
    payload = data[header_len:]
    if len(payload) != expected:
        raise IdxFormatError(
            f"IDX payload length {len(payload)} != expected {expected} for dims {dims}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx(path: str | Path) -> np.ndarray:
    """Load an IDX file, transparently decompressing gzip."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return parse_idx(raw)


@dataclass(frozen=True)
class RawImageSet:
    """Unfiltered images (count x 28 x 28, uint8) with digit labels 0-9."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("image count != label count")


def load_raw(data_dir: str | Path, filenames: dict | None = None) -> tuple[RawImageSet, RawImageSet]:
    """Load the four standard MNIST files (optionally .gz) from data_dir."""
    data_dir = Path(data_dir)
    names = dict(DEFAULT_FILENAMES)
    if filenames:
        names.update(filenames)

    def find(name: str) -> Path:
        for candidate in (data_dir / name, data_dir / (name + ".gz")):
            if candidate.exists():
                return candidate
        raise FileNotFoundError(f"missing MNIST file: {data_dir / name}[.gz]")

    train = RawImageSet(
        images=load_idx(find(names["train_images"])),
        labels=load_idx(find(names["train_labels"])),
    )
    test = RawImageSet(
        images=load_idx(find(names["test_images"])),
        labels=load_idx(find(names["test_labels"])),
    )
    return train, test


@dataclass(frozen=True)
class Split:
    """Images flattened to (count, 784) float64 in [0,1]; labels in {0,1}."""

    images: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.images.shape[0]


@dataclass(frozen=True)
class DatasetSplits:
    train: Split
    validation: Split
    test: Split
    split_seed: int


def _filter_and_scale(raw: RawImageSet, digits: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    mask = np.isin(raw.labels, digits)
    images = raw.images[mask].reshape(-1, raw.images.shape[1] * raw.images.shape[2])
    images = images.astype(np.float64) / 255.0
    labels = (raw.labels[mask] == digits[1]).astype(np.uint8)
    return images, labels


def build_splits(
    train_raw: RawImageSet,
    test_raw: RawImageSet,
    digits: tuple[int, int] = (4, 7),
    split_seed: int = 0,
) -> DatasetSplits:
    """Filter to the two digits and produce the fixed-size splits.

    Fails hard (naming the observed counts) if the filtered subsets do not
    have the standard-MNIST sizes 12107 (train side) and 2010 (test side).
    """
    train_images, train_labels = _filter_and_scale(train_raw, digits)
    test_images, test_labels = _filter_and_scale(test_raw, digits)

    n_train_side = train_images.shape[0]
    if n_train_side != TRAIN_SIZE + VAL_SIZE:
        raise ValueError(
            f"filtered train-side count {n_train_side} != {TRAIN_SIZE + VAL_SIZE}"
        )
    if test_images.shape[0] != TEST_SIZE:
        raise ValueError(f"filtered test-side count {test_images.shape[0]} != {TEST_SIZE}")

    order = np.random.default_rng(split_seed).permutation(n_train_side)
    train_idx, val_idx = order[:TRAIN_SIZE], order[TRAIN_SIZE:]
    return DatasetSplits(
        train=Split(train_images[train_idx], train_labels[train_idx]),
        validation=Split(train_images[val_idx], train_labels[val_idx]),
        test=Split(test_images, test_labels),
        split_seed=split_seed,
    )


def batch_order(n: int, shuffle_seed: int, shuffle: bool) -> np.ndarray:
    """Epoch-wide example order: seeded permutation or identity."""
    if shuffle:
        return np.random.default_rng(shuffle_seed).permutation(n)
    return np.arange(n)


def batches(
    split: Split,
    batch_size: int = 64,
    shuffle_seed: int = 0,
    shuffle: bool = True,
):
    """Yield (images, labels) batches covering every example exactly once.

    Deterministic given the seed; the final batch may be smaller.
    """
    if len(split) == 0:
        raise ValueError("empty split")
    order = batch_order(len(split), shuffle_seed, shuffle)
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        yield split.images[idx], split.labels[idx]
