import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from tinysnn.dataio import write_idx

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def mnist_dir():
    return Path(os.environ.get("TINYSNN_MNIST_DIR", "/root/data/mnist"))


def mnist_paths():
    """Paths of the four MNIST files (plain or .gz), or None if any is missing."""
    base = mnist_dir()
    found = {}
    for key, name in MNIST_FILES.items():
        for candidate in (base / name, base / f"{name}.gz"):
            if candidate.exists():
                found[key] = str(candidate)
                break
        else:
            return None
    return found


@pytest.fixture(scope="session")
def mnist():
    paths = mnist_paths()
    if paths is None:
        pytest.skip(f"MNIST IDX files not found in {mnist_dir()} (set TINYSNN_MNIST_DIR)")
    return paths


def striped_digits(n, seed, side=8):
    """Toy images: class c lights a horizontal band starting at row c % side, plus noise."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 10
    rng.shuffle(labels)
    images = (rng.random((n, side, side)) < 0.05).astype(np.uint8) * 60
    for i, c in enumerate(labels):
        rows = [(c + k) % side for k in range(2)]
        cols = slice(0, side // 2) if c < side else slice(side // 2, side)
        for r in rows:
            images[i, r, cols] = 255
    return images, labels.astype(np.uint8)


@pytest.fixture(scope="session")
def toy_idx(tmp_path_factory):
    """A small synthetic IDX dataset (8x8 images) for hermetic pipeline tests."""
    d = tmp_path_factory.mktemp("toy_idx")
    paths = {}
    for split, n, seed in (("train", 300, 1), ("test", 100, 2)):
        images, labels = striped_digits(n, seed)
        paths[f"{split}_images"] = str(d / f"{split}-images")
        paths[f"{split}_labels"] = str(d / f"{split}-labels")
        write_idx(images, labels, paths[f"{split}_images"], paths[f"{split}_labels"])
    return paths


def write_config(path, paths, **values):
    lines = [f'{k} = "{v}"' for k, v in paths.items()]
    for k, v in values.items():
        if isinstance(v, str):
            lines.append(f'{k} = "{v}"')
        elif isinstance(v, bool):
            lines.append(f"{k} = {'true' if v else 'false'}")
        elif isinstance(v, list):
            items = ", ".join(f'"{x}"' if isinstance(x, str) else repr(x) for x in v)
            lines.append(f"{k} = [{items}]")
        else:
            lines.append(f"{k} = {v!r}")
    Path(path).write_text("\n".join(lines) + "\n")
    return str(path)


TOY_SETTINGS = dict(num_inputs=64, num_excitatory=12, num_train=120, num_label=200, num_test=100,
                    num_calibration=50, num_steps=60, rate_scale=0.2, v_thresh_base=4.0, w_inh=8.0,
                    norm_target=8.0, eta_post=0.01)


# criterion number -> (status, description, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"{status} criterion {num:>2} ({title}): {detail}")
