"""MNIST ingestion and the empirical (S, Z, H) joint built from it.

``Z`` is the digit label (the semantic), ``H`` the quantized white-pixel
ratio of the binarized image (the task, labels 1..7) and ``S`` flags the
digit 5 (the private attribute). Files are read from a local directory;
nothing here touches the network.
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .probcore import JointTable

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
MNIST_DIR_ENV = "MNIST_DIR"

DEFAULT_THRESHOLD = 128
# Right edges of intervals 1..6; interval 7 is [0.35, 1].
INTERVAL_EDGES = (0.1, 0.15, 0.2, 0.25, 0.3, 0.35)
PRIVATE_DIGIT = 5

S_ALPHABET = (0, 1)
Z_ALPHABET = tuple(range(10))
H_ALPHABET = tuple(range(1, len(INTERVAL_EDGES) + 2))


class IdxError(ValueError):
    """Malformed IDX payload. ``kind`` is one of
    ``"magic"``, ``"truncated"``, ``"count-mismatch"``, ``"label-range"``."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class ImageSet:
    pixels: np.ndarray      # (count, rows, cols) uint8
    labels: np.ndarray      # (count,) uint8

    @property
    def count(self) -> int:
        return len(self.labels)

    @property
    def rows(self) -> int:
        return self.pixels.shape[1]

    @property
    def cols(self) -> int:
        return self.pixels.shape[2]


def _header(data: bytes, magic: int, ndims: int, what: str):
    size = 4 * (1 + ndims)
    if len(data) < size:
        raise IdxError("truncated", f"{what}: header needs {size} bytes, got {len(data)}")
    found, *dims = struct.unpack(f">{1 + ndims}I", data[:size])
    if found != magic:
        raise IdxError("magic", f"{what}: magic {found} (0x{found:08x}), expected {magic}")
    return dims, data[size:]


def parse_idx(images: bytes, labels: bytes) -> ImageSet:
    """Decode an IDX image file and its label file (raw, not gzipped)."""
    (n_img, rows, cols), payload = _header(images, IMAGES_MAGIC, 3, "images")
    (n_lab,), lab_payload = _header(labels, LABELS_MAGIC, 1, "labels")
    if n_img != n_lab:
        raise IdxError("count-mismatch", f"{n_img} images but {n_lab} labels")
    need = n_img * rows * cols
    if len(payload) < need:
        raise IdxError("truncated", f"images: need {need} pixel bytes, got {len(payload)}")
    if len(lab_payload) < n_lab:
        raise IdxError("truncated", f"labels: need {n_lab} bytes, got {len(lab_payload)}")
    pixels = np.frombuffer(payload, dtype=np.uint8, count=need).reshape(n_img, rows, cols)
    lab = np.frombuffer(lab_payload, dtype=np.uint8, count=n_lab)
    if lab.size and lab.max() > 9:
        raise IdxError("label-range", f"label {int(lab.max())} outside 0..9")
    return ImageSet(pixels, lab)


def encode_idx(imgs: ImageSet) -> tuple:
    """Inverse of :func:`parse_idx`; handy for fixtures."""
    n, r, c = imgs.pixels.shape
    images = struct.pack(">4I", IMAGES_MAGIC, n, r, c) + imgs.pixels.astype(np.uint8).tobytes()
    labels = struct.pack(">2I", LABELS_MAGIC, n) + imgs.labels.astype(np.uint8).tobytes()
    return images, labels


def _read_maybe_gz(directory: Path, stem: str) -> bytes:
    for name in (stem, stem + ".gz"):
        path = directory / name
        if path.exists():
            opener = gzip.open if name.endswith(".gz") else open
            with opener(path, "rb") as fh:
                return fh.read()
    raise FileNotFoundError(f"missing {directory / stem}[.gz]")


def resolve_mnist_dir(path=None) -> Path:
    if path is None:
        path = os.environ.get(MNIST_DIR_ENV)
    if path is None:
        raise FileNotFoundError(f"no MNIST directory given and ${MNIST_DIR_ENV} unset")
    return Path(path)


def load_mnist(directory=None) -> ImageSet:
    """Load the 60000-image training split from ``directory``.

    Both raw and ``.gz`` file names are accepted. Falls back to the
    ``MNIST_DIR`` environment variable.
    """
    directory = resolve_mnist_dir(directory)
    return parse_idx(_read_maybe_gz(directory, TRAIN_IMAGES),
                     _read_maybe_gz(directory, TRAIN_LABELS))


def histogram_ratio(image: np.ndarray, threshold: int = DEFAULT_THRESHOLD) -> float:
    """Fraction of pixels that are white (>= threshold) after binarization."""
    image = np.asarray(image)
    return float(np.count_nonzero(image >= threshold)) / image.size


def histogram_ratios(pixels: np.ndarray, threshold: int = DEFAULT_THRESHOLD) -> np.ndarray:
    n = len(pixels)
    flat = pixels.reshape(n, -1)
    return np.count_nonzero(flat >= threshold, axis=1) / flat.shape[1]


def interval_label(ratio) -> int:
    """Quantize a white-pixel ratio into interval labels 1..7."""
    ratio = float(ratio)
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio {ratio} outside [0, 1]")
    return int(np.searchsorted(INTERVAL_EDGES, ratio, side="right")) + 1


def interval_labels(ratios: np.ndarray) -> np.ndarray:
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.size and (ratios.min() < 0 or ratios.max() > 1):
        raise ValueError("ratios must lie in [0, 1]")
    return np.searchsorted(INTERVAL_EDGES, ratios, side="right") + 1


@dataclass(frozen=True)
class ExperimentJoint:
    counts: np.ndarray      # (2, 10, 7) integer counts over (S, Z, H)
    joint: JointTable

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def kernel_h_given_z(self) -> np.ndarray:
        """P(H | Z) as a (10, 7) array; rows of absent digits are zero."""
        czh = self.counts.sum(axis=0).astype(np.float64)
        n_z = czh.sum(axis=1, keepdims=True)
        return np.divide(czh, n_z, out=np.zeros_like(czh), where=n_z > 0)

    def kernel_s_given_h(self) -> np.ndarray:
        """P(S | H) as a (7, 2) array."""
        csh = self.counts.sum(axis=1).T.astype(np.float64)
        n_h = csh.sum(axis=1, keepdims=True)
        return np.divide(csh, n_h, out=np.zeros_like(csh), where=n_h > 0)


def build_experiment_joint(imgs: ImageSet, threshold: int = DEFAULT_THRESHOLD) -> ExperimentJoint:
    if imgs.count == 0:
        raise ValueError("empty image set")
    z = imgs.labels.astype(np.intp)
    h = interval_labels(histogram_ratios(imgs.pixels, threshold))
    s = (z == PRIVATE_DIGIT).astype(np.intp)
    counts = np.zeros((2, 10, len(H_ALPHABET)), dtype=np.int64)
    np.add.at(counts, (s, z, h - 1), 1)
    joint = JointTable((("S", S_ALPHABET), ("Z", Z_ALPHABET), ("H", H_ALPHABET)),
                       counts / counts.sum())
    return ExperimentJoint(counts, joint)
