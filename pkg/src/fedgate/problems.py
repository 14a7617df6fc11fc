"""Problem builders: turn a problem description into client datasets.

Each builder returns the client list plus a reference weight vector,
the closed-form least-squares optimum of the objective the fleet is
SUPPOSED to solve.  For the corrupted fleet that reference comes from
the clean clients only, so distance-to-reference measures how well an
algorithm resisted the corrupted devices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ClientDataset, PartitionSpec, load_csv, partition
from .errors import ConfigError
from .model import WeightVector, fit_line
from .registry import resolve


@dataclass(frozen=True)
class LinearFleetSpec:
    """IID fleet drawing y = slope * x + intercept + N(0, noise_std^2)."""

    n_clients: int = 10
    samples_per_client: int = 50
    slope: float = 2.0
    intercept: float = 1.0
    noise_std: float = 0.5
    x_low: float = -1.0
    x_high: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_clients < 1:
            raise ConfigError("n_clients must be >= 1")
        if self.samples_per_client < 2:
            raise ConfigError("samples_per_client must be >= 2")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if not self.x_low < self.x_high:
            raise ConfigError("x_low must be < x_high")


@dataclass(frozen=True)
class CorruptedFleetSpec:
    """Linear fleet where some clients' targets are shifted by a constant."""

    n_clients: int = 20
    n_corrupted: int = 4
    samples_per_client: int = 50
    slope: float = 2.0
    intercept: float = 1.0
    noise_std: float = 0.5
    corruption_offset: float = 50.0
    x_low: float = -1.0
    x_high: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_clients < 1:
            raise ConfigError("n_clients must be >= 1")
        if not 0 <= self.n_corrupted <= self.n_clients:
            raise ConfigError("n_corrupted must lie in [0, n_clients]")
        if self.samples_per_client < 2:
            raise ConfigError("samples_per_client must be >= 2")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if not self.x_low < self.x_high:
            raise ConfigError("x_low must be < x_high")


@dataclass(frozen=True)
class DatasetProblemSpec:
    """Regression of one dataset column on another, split across clients."""

    source: str  # registry key or CSV path
    x_col: str
    y_col: str
    partition: PartitionSpec

    def __post_init__(self):
        if not self.source:
            raise ConfigError("dataset problem needs a source")


def _client_rng(seed: int, client_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, client_id])


def _draw_client(
    spec: LinearFleetSpec | CorruptedFleetSpec, client_id: int, y_offset: float
) -> ClientDataset:
    rng = _client_rng(spec.seed, client_id)
    x = rng.uniform(spec.x_low, spec.x_high, spec.samples_per_client)
    noise = rng.normal(0.0, spec.noise_std, spec.samples_per_client)
    y = spec.slope * x + spec.intercept + noise + y_offset
    return ClientDataset(client_id=client_id, features=x.reshape(-1, 1), targets=y)


def _pooled_reference(clients: list[ClientDataset]) -> WeightVector:
    x = np.concatenate([c.features[:, 0] for c in clients])
    y = np.concatenate([c.targets for c in clients])
    return fit_line(x, y)


def build_linear_fleet(spec: LinearFleetSpec) -> tuple[list[ClientDataset], WeightVector]:
    clients = [_draw_client(spec, cid, 0.0) for cid in range(spec.n_clients)]
    return clients, _pooled_reference(clients)


def build_corrupted_fleet(spec: CorruptedFleetSpec) -> tuple[list[ClientDataset], WeightVector]:
    """Corrupts the first n_corrupted client ids; reference uses the rest."""
    clients = [
        _draw_client(spec, cid, spec.corruption_offset if cid < spec.n_corrupted else 0.0)
        for cid in range(spec.n_clients)
    ]
    clean = clients[spec.n_corrupted:]
    reference = _pooled_reference(clean if clean else clients)
    return clients, reference


def build_dataset_problem(spec: DatasetProblemSpec) -> tuple[list[ClientDataset], WeightVector]:
    _, path = resolve(spec.source)
    data = load_csv(path, [spec.x_col, spec.y_col])
    clients = partition(data, spec.partition, spec.x_col, spec.y_col)
    return clients, _pooled_reference(clients)


def build_problem(spec) -> tuple[list[ClientDataset], WeightVector]:
    if isinstance(spec, LinearFleetSpec):
        return build_linear_fleet(spec)
    if isinstance(spec, CorruptedFleetSpec):
        return build_corrupted_fleet(spec)
    if isinstance(spec, DatasetProblemSpec):
        return build_dataset_problem(spec)
    raise ConfigError(f"unknown problem spec type {type(spec).__name__}")
