import gzip

import numpy as np
import pytest

from sofkit import datasets as ds


@pytest.fixture
def idx_files(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(30, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, size=30, dtype=np.uint8)
    img_path = tmp_path / "images-idx3-ubyte"
    lbl_path = tmp_path / "labels-idx1-ubyte"
    img_path.write_bytes(ds.encode_idx_images(images))
    lbl_path.write_bytes(ds.encode_idx_labels(labels))
    return images, labels, img_path, lbl_path


class TestIdx:
    def test_round_trip(self, idx_files):
        images, labels, img_path, lbl_path = idx_files
        assert np.array_equal(ds.load_idx_images(img_path), images)
        assert np.array_equal(ds.load_idx_labels(lbl_path), labels)

    def test_gzip_transparent(self, idx_files, tmp_path):
        images, _, img_path, _ = idx_files
        gz = tmp_path / "images.gz"
        gz.write_bytes(gzip.compress(img_path.read_bytes()))
        assert np.array_equal(ds.load_idx_images(gz), images)

    def test_wrong_magic(self, idx_files):
        _, _, img_path, lbl_path = idx_files
        with pytest.raises(ds.IdxDecodeError, match="magic"):
            ds.load_idx_images(lbl_path)
        with pytest.raises(ds.IdxDecodeError, match="magic"):
            ds.load_idx_labels(img_path)

    def test_truncated(self, idx_files, tmp_path):
        _, _, img_path, _ = idx_files
        cut = tmp_path / "cut"
        cut.write_bytes(img_path.read_bytes()[:-10])
        with pytest.raises(ds.IdxDecodeError):
            ds.load_idx_images(cut)

    def test_empty(self, tmp_path):
        empty = tmp_path / "empty"
        empty.write_bytes(b"")
        with pytest.raises(ds.IdxDecodeError):
            ds.load_idx_labels(empty)

    def test_out_of_range_label(self, tmp_path):
        bad = tmp_path / "bad-labels"
        bad.write_bytes(ds.encode_idx_labels(np.array([0, 1], dtype=np.uint8))[:-1] + b"\x0b")
        with pytest.raises(ds.IdxDecodeError, match="out of range"):
            ds.load_idx_labels(bad)


class TestNormalize:
    def test_range(self):
        raw = np.array([[[0, 128, 255]]], dtype=np.uint8)
        flat = ds.normalize_and_flatten(raw)
        assert flat[0, 0] == 0.0
        assert flat[0, 1] == pytest.approx(128 / 255)
        assert flat[0, 2] == 1.0

    def test_flatten_row_major(self):
        raw = np.arange(4, dtype=np.uint8).reshape(1, 2, 2)
        flat = ds.normalize_and_flatten(raw)
        assert np.allclose(flat[0] * 255, [0, 1, 2, 3])


class TestBatching:
    def make(self, n=10):
        return ds.ImageDataset(np.arange(n * 2, dtype=float).reshape(n, 2),
                               np.arange(n) % 3)

    def test_batch_sizes(self):
        batches = list(ds.batch_iter(self.make(10), 3, seed=0, epoch=0))
        assert [len(b[1]) for b in batches] == [3, 3, 3, 1]

    def test_same_key_same_order(self):
        a = [b[1].tolist() for b in ds.batch_iter(self.make(), 4, seed=1, epoch=2)]
        b = [b[1].tolist() for b in ds.batch_iter(self.make(), 4, seed=1, epoch=2)]
        assert a == b

    def test_different_epochs_differ(self):
        data = ds.ImageDataset(np.zeros((1000, 1)), np.arange(1000))
        a = np.concatenate([b[1] for b in ds.batch_iter(data, 100, seed=0, epoch=0)])
        b = np.concatenate([b[1] for b in ds.batch_iter(data, 100, seed=0, epoch=1)])
        assert not np.array_equal(a, b)

    def test_empty_rejected(self):
        empty = ds.ImageDataset(np.zeros((0, 2)), np.zeros(0, dtype=int))
        with pytest.raises(ValueError):
            next(ds.batch_iter(empty, 4, seed=0, epoch=0))

    def test_misaligned_rejected(self):
        with pytest.raises(ValueError):
            ds.ImageDataset(np.zeros((3, 2)), np.zeros(2, dtype=int))


class TestSynthetic:
    def test_deterministic(self):
        a = ds.synthetic_onehot_dataset(100, 10, seed=4)
        b = ds.synthetic_onehot_dataset(100, 10, seed=4)
        assert np.array_equal(a.images, b.images)
        assert np.array_equal(a.labels, b.labels)

    def test_label_balance(self):
        data = ds.synthetic_onehot_dataset(5000, 10, seed=0)
        counts = np.bincount(data.labels, minlength=10) / 5000
        assert np.all(np.abs(counts - 0.1) < 0.05)

    def test_pixel_range(self):
        data = ds.synthetic_onehot_dataset(50, 10, seed=0)
        assert data.images.min() >= 0.0 and data.images.max() <= 1.0

    def test_class_ceiling(self):
        with pytest.raises(ValueError):
            ds.synthetic_onehot_dataset(10, 785, seed=0)


def test_one_hot_labels():
    out = ds.one_hot_labels(np.array([0, 3]), 4)
    assert np.array_equal(out, [[1, 0, 0, 0], [0, 0, 0, 1]])
