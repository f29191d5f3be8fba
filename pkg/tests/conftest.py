from pathlib import Path

import numpy as np
import pytest

from ordinal_qwk.config_store import build_config


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="запускать длительные прогоны обучения")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: длительные прогоны обучения (нужен --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="нужен --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


SMALL_VALUES = {
    "n": "240",
    "d": "4",
    "k": "3",
    "proportions": "auto",
    "hidden": "8",
    "epochs": "3",
    "batch_size": "32",
}


@pytest.fixture
def small_values(tmp_path: Path):
    """Маленький синтетический эксперимент на несколько секунд."""
    def make(run_name: str = "run", **changes):
        values = dict(SMALL_VALUES, output_dir=str(tmp_path / run_name))
        values.update({k: str(v) for k, v in changes.items()})
        return values
    return make


@pytest.fixture
def small_config(small_values):
    def make(run_name: str = "run", **changes):
        return build_config(small_values(run_name, **changes))
    return make
