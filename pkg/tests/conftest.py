from pathlib import Path

import pytest

from adaptaug import synthetic_image

DATA_DIR = Path(__file__).parent / "data"
CONFIG_DIR = Path(__file__).parents[1] / "configs"


@pytest.fixture
def small_image():
    return synthetic_image(16, 16, seed=5)


@pytest.fixture
def image64():
    return synthetic_image(64, 64, seed=3)


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def config_dir():
    return CONFIG_DIR
