import struct

import numpy as np
import pytest

from semprivacy.dataset import (H_ALPHABET, IdxError, ImageSet, build_experiment_joint,
                                encode_idx, histogram_ratio, histogram_ratios,
                                interval_label, interval_labels, load_mnist, parse_idx)
from semprivacy.probcore import conditional_entropy, conditional_mutual_information

from conftest import synthetic_images, write_idx_dir


def two_images():
    pixels = np.arange(2 * 28 * 28, dtype=np.uint32).reshape(2, 28, 28) % 256
    return ImageSet(pixels.astype(np.uint8), np.array([3, 5], dtype=np.uint8))


def uniform_ratio_set(white: int, n=10) -> ImageSet:
    pixels = np.zeros((n, 28, 28), dtype=np.uint8)
    pixels.reshape(n, -1)[:, :white] = 200
    return ImageSet(pixels, np.arange(n, dtype=np.uint8) % 10)


class TestParseIdx:
    def test_round_trip(self):
        imgs = two_images()
        back = parse_idx(*encode_idx(imgs))
        assert back.count == 2 and (back.rows, back.cols) == (28, 28)
        np.testing.assert_array_equal(back.pixels, imgs.pixels)
        np.testing.assert_array_equal(back.labels, imgs.labels)

    def test_header_bytes(self):
        images, labels = encode_idx(two_images())
        assert images[:4] == b"\x00\x00\x08\x03"
        assert labels[:4] == b"\x00\x00\x08\x01"
        assert struct.unpack(">3I", images[4:16]) == (2, 28, 28)

    def test_labels_with_image_magic(self):
        images, labels = encode_idx(two_images())
        bad = struct.pack(">I", 2051) + labels[4:]
        with pytest.raises(IdxError) as info:
            parse_idx(images, bad)
        assert info.value.kind == "magic"

    def test_truncated_pixels(self):
        images, labels = encode_idx(two_images())
        with pytest.raises(IdxError) as info:
            parse_idx(images[:-1], labels)
        assert info.value.kind == "truncated"

    def test_truncated_header(self):
        with pytest.raises(IdxError) as info:
            parse_idx(b"\x00\x00", b"")
        assert info.value.kind == "truncated"

    def test_count_mismatch(self):
        images, _ = encode_idx(two_images())
        labels = struct.pack(">2I", 2049, 3) + bytes([1, 2, 3])
        with pytest.raises(IdxError) as info:
            parse_idx(images, labels)
        assert info.value.kind == "count-mismatch"

    def test_label_range(self):
        imgs = ImageSet(two_images().pixels, np.array([3, 12], dtype=np.uint8))
        with pytest.raises(IdxError) as info:
            parse_idx(*encode_idx(imgs))
        assert info.value.kind == "label-range"

    @pytest.mark.parametrize("gz", [False, True])
    def test_load_directory(self, tmp_path, gz):
        imgs = synthetic_images()
        back = load_mnist(write_idx_dir(tmp_path / "d", imgs, gz=gz))
        np.testing.assert_array_equal(back.pixels, imgs.pixels)

    def test_env_fallback(self, tmp_path, monkeypatch):
        path = write_idx_dir(tmp_path / "env", synthetic_images())
        monkeypatch.setenv("MNIST_DIR", str(path))
        assert load_mnist().count == 30

    def test_missing_directory(self, tmp_path, monkeypatch):
        monkeypatch.delenv("MNIST_DIR", raising=False)
        with pytest.raises(FileNotFoundError):
            load_mnist()
        with pytest.raises(FileNotFoundError, match="train-images"):
            load_mnist(tmp_path)


class TestRatio:
    def test_black(self):
        assert histogram_ratio(np.zeros((28, 28), np.uint8)) == 0.0

    def test_white(self):
        assert histogram_ratio(np.full((28, 28), 255, np.uint8), 128) == 1.0

    def test_half(self):
        img = np.zeros((28, 28), np.uint8)
        img[:14] = 255
        assert histogram_ratio(img) == 0.5

    def test_threshold_inclusive(self):
        img = np.full((2, 2), 128, np.uint8)
        assert histogram_ratio(img, 128) == 1.0
        assert histogram_ratio(img, 129) == 0.0

    def test_vectorized_agrees(self):
        imgs = synthetic_images()
        expected = [histogram_ratio(p) for p in imgs.pixels]
        np.testing.assert_array_equal(histogram_ratios(imgs.pixels), expected)


class TestIntervals:
    @pytest.mark.parametrize("ratio,label", [
        (0.0, 1), (0.0999, 1), (0.1, 2), (0.12, 2), (0.15, 3), (0.2, 4),
        (0.25, 5), (0.3, 6), (0.349, 6), (0.35, 7), (1.0, 7)])
    def test_labels(self, ratio, label):
        assert interval_label(ratio) == label

    @pytest.mark.parametrize("ratio", [-0.01, 1.01, float("nan")])
    def test_out_of_range(self, ratio):
        with pytest.raises(ValueError):
            interval_label(ratio)

    def test_monotone_partition(self):
        grid = np.linspace(0, 1, 10001)
        labels = interval_labels(grid)
        assert np.all(np.diff(labels) >= 0)
        assert set(labels.tolist()) == set(H_ALPHABET)
        assert [interval_label(x) for x in grid[::97]] == labels[::97].tolist()


class TestExperimentJoint:
    def test_ten_image_fixture(self):
        exp = build_experiment_joint(uniform_ratio_set(white=94))   # 94/784 ~ 0.12
        assert exp.joint.pmf("H")[2] == pytest.approx(1.0, abs=1e-15)
        assert exp.counts[:, :, 1].sum() == 10
        assert exp.joint.pmf("S")[1] == pytest.approx(0.1, abs=1e-15)
        assert exp.total == 10

    def test_invariants(self):
        exp = build_experiment_joint(synthetic_images())
        j = exp.joint
        assert j.names == ("S", "Z", "H")
        assert conditional_entropy(j, "S", "Z") == 0.0
        assert conditional_mutual_information(j, "S", "H", "Z") <= 1e-10
        np.testing.assert_array_equal(j.cells, exp.counts / exp.counts.sum())
        s_given_z = exp.counts.sum(axis=2)
        assert s_given_z[1, 5] > 0 and s_given_z[0, 5] == 0
        assert s_given_z[1, np.arange(10) != 5].sum() == 0

    def test_kernels(self):
        exp = build_experiment_joint(synthetic_images())
        np.testing.assert_allclose(exp.kernel_h_given_z().sum(axis=1), 1.0, atol=1e-15)
        k = exp.kernel_s_given_h()
        used = exp.counts.sum(axis=(0, 1)) > 0
        np.testing.assert_allclose(k[used].sum(axis=1), 1.0, atol=1e-15)

    def test_permutation_invariant(self, rng):
        imgs = synthetic_images()
        perm = rng.permutation(imgs.count)
        shuffled = ImageSet(imgs.pixels[perm], imgs.labels[perm])
        a, b = build_experiment_joint(imgs), build_experiment_joint(shuffled)
        np.testing.assert_array_equal(a.counts, b.counts)

    def test_empty(self):
        with pytest.raises(ValueError):
            build_experiment_joint(ImageSet(np.zeros((0, 28, 28), np.uint8),
                                            np.zeros(0, np.uint8)))


@pytest.fixture(scope="module")
def official(mnist_path):
    return build_experiment_joint(load_mnist(mnist_path))


class TestOfficialTrainingSplit:
    def test_count(self, official):
        assert official.total == 60000

    def test_private_share(self, official):
        fives = int(official.counts[1].sum())
        assert fives == 5421
        assert official.joint.pmf("S")[1] == pytest.approx(fives / 60000, abs=1e-15)

    def test_markov(self, official):
        assert conditional_mutual_information(official.joint, "S", "H", "Z") <= 1e-10
        assert conditional_entropy(official.joint, "S", "Z") == 0.0
