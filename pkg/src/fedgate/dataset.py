"""CSV ingestion, descriptive statistics, two-sigma filtering, and
partitioning of a dataset across simulated clients.

All functions here are pure: they never mutate their inputs and are safe
to call concurrently.  Standard deviations use the population convention
(divide by n) throughout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DegenerateScaleError

PARTITION_STRATEGIES = ("iid", "quantity_skew", "feature_sort_shard")


@dataclass(frozen=True)
class Dataset:
    """A named table of finite numeric values, one row per record."""

    name: str
    columns: tuple[str, ...]
    values: np.ndarray  # shape (row_count, len(columns))

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != len(self.columns):
            raise DataError(
                f"dataset {self.name!r}: value matrix shape {vals.shape} does not "
                f"match {len(self.columns)} columns"
            )
        if vals.size and not np.all(np.isfinite(vals)):
            raise DataError(f"dataset {self.name!r} contains non-finite values")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def row_count(self) -> int:
        return self.values.shape[0]

    def column_index(self, column: str) -> int:
        try:
            return self.columns.index(column)
        except ValueError:
            raise DataError(
                f"dataset {self.name!r} has no column {column!r}; "
                f"available: {list(self.columns)}"
            ) from None

    def column(self, column: str) -> np.ndarray:
        return self.values[:, self.column_index(column)]

    def take(self, row_indices: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(name or self.name, self.columns, self.values[row_indices])


@dataclass(frozen=True)
class ColumnStats:
    """Location/scale summary of one column (population std)."""

    mean: float
    std: float
    min: float
    max: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DataError("column stats need at least one value")
        if not (self.min <= self.mean <= self.max):
            raise DataError("inconsistent column stats: mean outside [min, max]")


@dataclass(frozen=True)
class ClientDataset:
    """One simulated device's local feature/target table."""

    client_id: int
    features: np.ndarray  # shape (n_k, d)
    targets: np.ndarray  # shape (n_k,)

    def __post_init__(self):
        feats = np.atleast_2d(np.asarray(self.features, dtype=float))
        targs = np.asarray(self.targets, dtype=float)
        if feats.shape[0] != targs.shape[0]:
            raise DataError(
                f"client {self.client_id}: {feats.shape[0]} feature rows vs "
                f"{targs.shape[0]} targets"
            )
        if feats.shape[0] == 0:
            raise DataError(f"client {self.client_id}: empty dataset")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "targets", targs)

    @property
    def n_k(self) -> int:
        return self.targets.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PartitionSpec:
    """How to split one dataset across simulated clients."""

    n_clients: int
    strategy: str = "iid"
    skew: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_clients < 1:
            raise DataError("n_clients must be >= 1")
        if self.strategy not in PARTITION_STRATEGIES:
            raise DataError(
                f"unknown partition strategy {self.strategy!r}; "
                f"expected one of {PARTITION_STRATEGIES}"
            )
        if not 0.0 <= self.skew <= 1.0:
            raise DataError("skew must lie in [0, 1]")


def load_csv(path: str | Path, selected_columns: list[str]) -> Dataset:
    """Load the named columns of a comma-separated file, in file order.

    The first row is the header.  Fields may be quoted; surrounding
    whitespace is trimmed.  A missing or unparseable selected cell is a
    hard error reported with its row and column; a header-only file
    yields an empty dataset.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty, expected a header row") from None
        indices = []
        for col in selected_columns:
            if col not in header:
                raise DataError(f"{path}: column {col!r} not in header {header}")
            indices.append(header.index(col))
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            parsed = []
            for col, idx in zip(selected_columns, indices):
                if idx >= len(record) or record[idx].strip() == "":
                    raise DataError(f"{path}: row {lineno}, column {col!r}: missing value")
                cell = record[idx].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}, column {col!r}: "
                        f"cannot parse {cell!r} as a number"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(
                        f"{path}: row {lineno}, column {col!r}: non-finite value {cell!r}"
                    )
                parsed.append(value)
            rows.append(parsed)
    values = np.array(rows, dtype=float) if rows else np.empty((0, len(selected_columns)))
    return Dataset(path.stem, tuple(selected_columns), values)


def save_csv(dataset: Dataset, path: str | Path) -> Path:
    """Write a dataset back to CSV with its header order preserved."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.columns)
        for row in dataset.values:
            writer.writerow([repr(float(v)) for v in row])
    return path


def column_stats(dataset: Dataset, column: str) -> ColumnStats:
    """Mean, population std, and extrema of one column."""
    if dataset.row_count < 1:
        raise DataError(f"dataset {dataset.name!r} is empty")
    x = dataset.column(column)
    return ColumnStats(
        mean=float(x.mean()),
        std=float(x.std()),
        min=float(x.min()),
        max=float(x.max()),
        n=int(x.size),
    )


def zscore(x: float, stats: ColumnStats) -> float:
    """Standardize a value against a column's location and scale."""
    if stats.std <= 0:
        raise DegenerateScaleError("zscore undefined for a zero-spread column")
    return (x - stats.mean) / stats.std


def filter_2sigma(dataset: Dataset, columns: list[str], width: float = 2.0) -> Dataset:
    """Keep the rows lying strictly inside every named column's window
    (mean - width*std, mean + width*std).

    Window statistics come from the unfiltered dataset; boundary values
    are rejected.  A zero-spread column keeps exactly the rows equal to
    its mean.  Pass width = inf to disable filtering.
    """
    if width <= 0:
        raise DataError("filter width must be positive")
    keep = np.ones(dataset.row_count, dtype=bool)
    for col in columns:
        x = dataset.column(col)
        mean, std = x.mean(), x.std()
        if std == 0:
            keep &= x == mean
        elif math.isinf(width):
            continue
        else:
            keep &= (x > mean - width * std) & (x < mean + width * std)
    return dataset.take(np.flatnonzero(keep))


def _quantity_skew_sizes(n_rows: int, spec: PartitionSpec, rng: np.random.Generator) -> list[int]:
    if spec.skew == 0.0:
        base, extra = divmod(n_rows, spec.n_clients)
        return [base + (1 if i < extra else 0) for i in range(spec.n_clients)]
    # power-law client weights; shape grows as skew shrinks, so sizes
    # approach equality in the skew -> 0 limit
    shape = 1.0 / spec.skew
    weights = 1.0 + rng.pareto(shape, size=spec.n_clients)
    raw = weights / weights.sum() * n_rows
    sizes = np.floor(raw).astype(int)
    remainder = n_rows - int(sizes.sum())
    for idx in np.argsort(-(raw - sizes))[:remainder]:
        sizes[idx] += 1
    # every client must own at least one row
    while sizes.min() == 0:
        sizes[np.argmax(sizes)] -= 1
        sizes[np.argmin(sizes)] += 1
    return sizes.tolist()


def partition(
    dataset: Dataset,
    spec: PartitionSpec,
    feature_col: str,
    target_col: str,
) -> list[ClientDataset]:
    """Split a dataset into per-client feature/target tables.

    iid shuffles then deals round-robin; quantity_skew draws client sizes
    from a power law controlled by `skew`; feature_sort_shard sorts by the
    feature column and deals contiguous shards.  Deterministic given the
    spec seed; client sizes always sum to the dataset row count.
    """
    n = dataset.row_count
    if spec.n_clients > n:
        raise DataError(f"cannot split {n} rows across {spec.n_clients} clients")
    x = dataset.column(feature_col)
    y = dataset.column(target_col)
    rng = np.random.default_rng(spec.seed)

    if spec.strategy == "iid":
        order = rng.permutation(n)
        groups = [order[i :: spec.n_clients] for i in range(spec.n_clients)]
    elif spec.strategy == "quantity_skew":
        sizes = _quantity_skew_sizes(n, spec, rng)
        order = rng.permutation(n)
        bounds = np.cumsum([0] + sizes)
        groups = [order[bounds[i] : bounds[i + 1]] for i in range(spec.n_clients)]
    else:  # feature_sort_shard: maximal statistical heterogeneity
        order = np.argsort(x, kind="stable")
        base, extra = divmod(n, spec.n_clients)
        sizes = [base + (1 if i < extra else 0) for i in range(spec.n_clients)]
        bounds = np.cumsum([0] + sizes)
        groups = [order[bounds[i] : bounds[i + 1]] for i in range(spec.n_clients)]

    return [
        ClientDataset(client_id=i, features=x[idx].reshape(-1, 1), targets=y[idx])
        for i, idx in enumerate(groups)
    ]
