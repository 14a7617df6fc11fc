"""Well-known dataset names, pinned fingerprints, and file resolution.

Datasets can be referenced by registry key (resolved inside the data
directory, overridable with the FEDGATE_DATA_DIR environment variable)
or by an ordinary filesystem path.  Each registry entry pins the exact
bundled copy by row count and sha256 so results are tied to one specific
file; entries also record where the original public data lives.

The bundled copies are deterministic reconstructions normalized to one
numeric schema, calibrated to match the originals' published row counts
and summary statistics.  Use `fetch` or the source URLs to obtain the
raw originals.
"""

from __future__ import annotations

import hashlib
import os
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError

DATA_DIR_ENV = "FEDGATE_DATA_DIR"


@dataclass(frozen=True)
class DatasetSpec:
    key: str
    filename: str
    columns: tuple[str, ...]  # numeric columns, in file order
    default_pair: tuple[str, str]  # (x, y) used when none given
    row_count: int
    sha256: str
    source_url: str
    fetch_url: str | None = None  # direct raw download when one exists
    notes: str = ""


REGISTRY: dict[str, DatasetSpec] = {
    spec.key: spec
    for spec in [
        DatasetSpec(
            key="socr-heightweight",
            filename="socr_heightweight.csv",
            columns=("Index", "Height(Inches)", "Weight(Pounds)"),
            default_pair=("Height(Inches)", "Weight(Pounds)"),
            row_count=25000,
            sha256="079b3f5c2ca121a226e71bc03c477ab84c601201017501ed5fd14294b11fd5dc",
            source_url="http://wiki.stat.ucla.edu/socr/index.php/SOCR_Data_Dinov_020108_HeightsWeights",
            fetch_url="https://people.sc.fsu.edu/~jburkardt/data/csv/hw_25000.csv",
            notes="25000 simulated 18-year-olds; height in inches, weight in pounds.",
        ),
        DatasetSpec(
            key="iris",
            filename="iris.csv",
            columns=("sepal length", "sepal width", "petal length", "petal width", "target"),
            default_pair=("sepal width", "petal length"),
            row_count=150,
            sha256="7f7d6ab011c39e4afb23d4fbc41716aa24d59109a788c7d8659990ca03fa282f",
            source_url="https://archive.ics.uci.edu/dataset/53/iris",
            fetch_url="https://archive.ics.uci.edu/ml/machine-learning-databases/iris/iris.data",
            notes="Canonical measurements with species coded 0/1/2.",
        ),
        DatasetSpec(
            key="heart-disease",
            filename="heart.csv",
            columns=("age", "sex", "chest pain type", "target"),
            default_pair=("sex", "chest pain type"),
            row_count=1190,
            sha256="2497785eafd009c4419d3161cbb13a70b911f4b64789afd180d6155adca3fbfb",
            source_url="https://www.kaggle.com/datasets/sid321axn/heart-statlog-cleveland-hungary-final",
            notes="1190-row merge of five heart-disease cohorts; chest pain type coded 1-4.",
        ),
    ]
}


def data_dir() -> Path:
    """Directory searched for registry datasets."""
    override = os.environ.get(DATA_DIR_ENV)
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "data"


def fingerprint(path: str | Path) -> dict:
    """Row count (excluding header) and sha256 of one CSV file."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    digest = hashlib.sha256()
    rows = 0
    with open(path, "rb") as fh:
        for line in fh:
            digest.update(line)
            rows += 1
    return {"path": path.name, "row_count": max(rows - 1, 0), "sha256": digest.hexdigest()}


def resolve(name_or_path: str) -> tuple[DatasetSpec | None, Path]:
    """Map a registry key or a filesystem path to a concrete file."""
    if name_or_path in REGISTRY:
        spec = REGISTRY[name_or_path]
        path = data_dir() / spec.filename
        if not path.is_file():
            raise DataError(
                f"registered dataset {name_or_path!r} not found at {path}; "
                f"set {DATA_DIR_ENV} or run `fedgate fetch {name_or_path}`"
            )
        return spec, path
    path = Path(name_or_path)
    if not path.is_file():
        raise DataError(
            f"{name_or_path!r} is neither a registered dataset "
            f"({', '.join(sorted(REGISTRY))}) nor an existing file"
        )
    return None, path


def verify(spec: DatasetSpec, path: str | Path) -> tuple[bool, dict]:
    """Compare a file against its pinned fingerprint."""
    actual = fingerprint(path)
    ok = actual["row_count"] == spec.row_count and actual["sha256"] == spec.sha256
    return ok, actual


def fetch(key: str, out_path: str | Path | None = None) -> Path:
    """Download a dataset's raw original; never called by the test suite.

    Raw originals use their upstream schema, which may differ from the
    bundled normalized copies (and will then fail fingerprint checks).
    """
    if key not in REGISTRY:
        raise DataError(f"unknown dataset {key!r}; known: {', '.join(sorted(REGISTRY))}")
    spec = REGISTRY[key]
    if spec.fetch_url is None:
        raise DataError(
            f"{key} has no direct download; obtain it manually from {spec.source_url}"
        )
    target = Path(out_path) if out_path else data_dir() / f"{spec.key}.download.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    with urllib.request.urlopen(spec.fetch_url) as response, open(target, "wb") as fh:
        fh.write(response.read())
    return target
