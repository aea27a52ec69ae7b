"""Shared fixtures: random joints, synthetic IDX directories, MNIST location."""

from __future__ import annotations

import gzip
import json
import os
import sys
from pathlib import Path

import numpy as np
import pytest

from semprivacy.dataset import TRAIN_IMAGES, TRAIN_LABELS, ImageSet, encode_idx
from semprivacy.probcore import JointTable

ROOT = Path(__file__).resolve().parents[1]
SCHEMA_DIR = ROOT / "src" / "semprivacy" / "schemas"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"
DEFAULT_MNIST = ROOT / "data" / "mnist"


def random_joint(rng, shape, names=("S", "F"), concentration=1.0, sparsity=0.0):
    """Dirichlet-distributed joint table; ``sparsity`` zeroes a share of cells."""
    cells = rng.dirichlet(np.full(int(np.prod(shape)), concentration))
    if sparsity:
        mask = rng.random(cells.size) < sparsity
        mask[rng.integers(cells.size)] = False
        cells = np.where(mask, 0.0, cells)
        cells /= cells.sum()
    return JointTable.from_array(cells.reshape(shape), names)


def deterministic_s_joint(rng, n_s, n_f):
    """(S, F) joint in which S is a function of F, every S symbol used."""
    owner = np.concatenate([np.arange(n_s), rng.integers(n_s, size=n_f - n_s)])
    rng.shuffle(owner)
    cells = np.zeros((n_s, n_f))
    cells[owner, np.arange(n_f)] = rng.dirichlet(np.ones(n_f))
    return JointTable.from_array(cells, ("S", "F"))


def write_joint(path: Path, cells, names, alphabets=None) -> Path:
    path.write_text(JointTable.from_array(np.asarray(cells, float), names, alphabets).to_json())
    return path


# White-pixel counts out of 784 for the synthetic experiment images.
SYNTHETIC_WHITE = (0, 60, 94, 118, 130, 157, 170, 200, 240, 275, 300, 520)


def synthetic_images(n=30) -> ImageSet:
    pixels = np.zeros((n, 28, 28), dtype=np.uint8)
    labels = np.arange(n, dtype=np.uint8) % 10
    for i in range(n):
        white = SYNTHETIC_WHITE[(3 * i + i // 10) % len(SYNTHETIC_WHITE)]
        flat = pixels[i].reshape(-1)
        flat[:white] = 255
        flat[white:white + 40] = 127  # just below the default threshold
    return ImageSet(pixels, labels)


def write_idx_dir(directory: Path, imgs: ImageSet, gz=False) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    images, labels = encode_idx(imgs)
    for stem, payload in ((TRAIN_IMAGES, images), (TRAIN_LABELS, labels)):
        if gz:
            with gzip.GzipFile(directory / (stem + ".gz"), "wb", mtime=0) as fh:
                fh.write(payload)
        else:
            (directory / stem).write_bytes(payload)
    return directory


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def synthetic_dir(tmp_path) -> Path:
    return write_idx_dir(tmp_path / "synthetic", synthetic_images())


def mnist_dir():
    """Directory holding the official training files, or ``None``."""
    candidate = Path(os.environ.get("MNIST_DIR", DEFAULT_MNIST))
    if any((candidate / (TRAIN_IMAGES + ext)).exists() for ext in ("", ".gz")):
        return candidate
    return None


@pytest.fixture(scope="session")
def mnist_path():
    path = mnist_dir()
    if path is None:
        pytest.skip("MNIST training files not available")
    return path


def load_schema(name: str) -> dict:
    return json.loads((SCHEMA_DIR / f"{name}.schema.json").read_text())


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        terminalreporter.write_line(verdicts[number])
