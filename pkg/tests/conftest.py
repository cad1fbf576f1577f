from pathlib import Path

import numpy as np
import pytest

from camscene import csdm
from camscene.image import load_image, preprocess
from camscene.evalbench import load_dataset

import make_fixtures

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def tiny_model():
    return make_fixtures.build_tiny_generic()


@pytest.fixture(scope="session")
def tiny_model_bytes(tiny_model):
    return csdm.save_model(tiny_model)


@pytest.fixture(scope="session")
def toy_model():
    return make_fixtures.build_toy_color_model()


@pytest.fixture(scope="session")
def toy_dataset_dir(tmp_path_factory):
    """60-image toy calibration/eval tree (2 per category)."""
    root = tmp_path_factory.mktemp("toy_data")
    make_fixtures.write_toy_dataset(root, per_class=2, seed=0)
    return root


@pytest.fixture(scope="session")
def toy_dataset(toy_dataset_dir):
    return load_dataset(toy_dataset_dir)


@pytest.fixture(scope="session")
def toy_inputs(toy_model, toy_dataset):
    """Preprocessed tensors for every toy dataset image, in dataset order."""
    return [preprocess(load_image(path), toy_model.input_h, toy_model.input_w)
            for path, _ in toy_dataset.items]


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
