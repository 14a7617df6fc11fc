import numpy as np
import pytest

from fedgate.dataset import ClientDataset, Dataset
from fedgate.registry import data_dir


@pytest.fixture(autouse=True)
def _bundled_data_only(monkeypatch):
    """Keep tests pinned to the bundled copies regardless of the host env."""
    monkeypatch.delenv("FEDGATE_DATA_DIR", raising=False)


@pytest.fixture(scope="session")
def bundled():
    return data_dir()


def make_dataset(values, columns=None, name="test"):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if columns is None:
        columns = tuple(f"c{i}" for i in range(values.shape[1]))
    return Dataset(name, tuple(columns), values)


def make_client(x, y, client_id=0):
    x = np.asarray(x, dtype=float)
    return ClientDataset(client_id=client_id, features=x.reshape(-1, 1),
                         targets=np.asarray(y, dtype=float))


@pytest.fixture
def line_client():
    """Ten points on y = 3x + 1 with a deterministic wiggle."""
    rng = np.random.default_rng(7)
    x = np.linspace(-1, 1, 10)
    y = 3 * x + 1 + rng.normal(0, 0.1, 10)
    return make_client(x, y)
