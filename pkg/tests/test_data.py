import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmem.data import (
    IdxFormatError,
    RawImageSet,
    Split,
    batches,
    build_splits,
    load_idx,
    parse_idx,
)


def idx_bytes(dims, payload):
    header = struct.pack(">BBBB", 0, 0, 0x08, len(dims))
    header += struct.pack(f">{len(dims)}I", *dims)
    return header + payload


class TestParseIdx:
    def test_minimal_image_file(self):
        data = idx_bytes((2, 28, 28), bytes(2 * 28 * 28))
        arr = parse_idx(data)
        assert arr.shape == (2, 28, 28) and arr.dtype == np.uint8

    def test_minimal_label_file(self):
        arr = parse_idx(idx_bytes((5,), bytes(range(5))))
        assert arr.shape == (5,)
        assert list(arr) == [0, 1, 2, 3, 4]

    def test_bad_magic(self):
        data = b"\x01\x00\x08\x01" + struct.pack(">I", 1) + b"\x00"
        with pytest.raises(IdxFormatError, match="magic"):
            parse_idx(data)

    def test_unsupported_type_code(self):
        data = b"\x00\x00\x0d\x01" + struct.pack(">I", 1) + b"\x00"
        with pytest.raises(IdxFormatError, match="type code"):
            parse_idx(data)

    def test_truncated_payload(self):
        data = idx_bytes((10,), bytes(4))
        with pytest.raises(IdxFormatError, match="payload"):
            parse_idx(data)

    def test_gzip_transparent(self, tmp_path):
        raw = idx_bytes((3,), bytes([7, 8, 9]))
        path = tmp_path / "labels.gz"
        path.write_bytes(gzip.compress(raw))
        arr = load_idx(path)
        assert list(arr) == [7, 8, 9]

    def test_parses_full_synthetic_corpus(self, corpus_dir):
        images = load_idx(corpus_dir / "train-images-idx3-ubyte")
        assert images.shape == (60000, 28, 28)


class TestBuildSplits:
    def test_sizes(self, splits):
        assert len(splits.train) == 10097
        assert len(splits.validation) == 2010
        assert len(splits.test) == 2010

    def test_independent_label_scan(self, raw_sets):
        train_raw, test_raw = raw_sets
        n47 = sum(1 for v in train_raw.labels if v == 4 or v == 7)
        assert n47 == 12107
        assert sum(1 for v in test_raw.labels if v in (4, 7)) == 2010

    def test_deterministic(self, raw_sets):
        a = build_splits(*raw_sets, split_seed=3)
        b = build_splits(*raw_sets, split_seed=3)
        np.testing.assert_array_equal(a.train.images, b.train.images)
        np.testing.assert_array_equal(a.validation.labels, b.validation.labels)

    def test_different_seed_changes_assignment(self, raw_sets, splits):
        other = build_splits(*raw_sets, split_seed=1)
        assert not np.array_equal(other.train.images, splits.train.images)

    def test_pixels_and_labels(self, splits):
        for split in (splits.train, splits.validation, splits.test):
            assert split.images.min() >= 0.0 and split.images.max() <= 1.0
            assert set(np.unique(split.labels)) <= {0, 1}

    def test_train_val_partition(self, raw_sets, splits):
        # train and validation together are a permutation of the filtered subset
        train_raw, _ = raw_sets
        mask = np.isin(train_raw.labels, (4, 7))
        filtered = train_raw.images[mask].reshape(-1, 784) / 255.0
        combined = np.vstack([splits.train.images, splits.validation.images])
        assert combined.shape == filtered.shape
        order = np.lexsort(filtered.T)
        order_c = np.lexsort(combined.T)
        np.testing.assert_allclose(filtered[order], combined[order_c])

    def test_wrong_counts_rejected(self):
        rng = np.random.default_rng(0)
        imgs = rng.integers(0, 256, size=(100, 28, 28), dtype=np.uint8)
        labels = np.full(100, 4, dtype=np.uint8)
        raw = RawImageSet(imgs, labels)
        with pytest.raises(ValueError, match="100"):
            build_splits(raw, raw)


class TestBatches:
    @staticmethod
    def split_of(n):
        return Split(np.arange(n, dtype=np.float64)[:, None] / n, np.zeros(n, dtype=np.uint8))

    def test_batch_sizes(self):
        sizes = [x.shape[0] for x, _ in batches(self.split_of(130), 64)]
        assert sizes == [64, 64, 2]

    def test_no_shuffle_is_identity(self):
        xs = np.concatenate([x[:, 0] for x, _ in batches(self.split_of(10), 4, shuffle=False)])
        np.testing.assert_array_equal(xs, np.arange(10) / 10)

    def test_deterministic_given_seed(self):
        a = [x for x, _ in batches(self.split_of(50), 16, shuffle_seed=5)]
        b = [x for x, _ in batches(self.split_of(50), 16, shuffle_seed=5)]
        for xa, xb in zip(a, b):
            np.testing.assert_array_equal(xa, xb)

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(1, 300), bs=st.integers(1, 80), seed=st.integers(0, 10))
    def test_epoch_covers_every_example_once(self, n, bs, seed):
        split = self.split_of(n)
        seen = np.concatenate(
            [np.rint(x[:, 0] * n) for x, _ in batches(split, bs, shuffle_seed=seed)]
        )
        assert sorted(seen.astype(int)) == list(range(n))

    def test_empty_split_rejected(self):
        with pytest.raises(ValueError):
            next(batches(Split(np.empty((0, 1)), np.empty(0)), 4))
