"""Two-sigma filtering experiments and their deviation tables.

For one attribute the pipeline produces three location estimates:

actual     mean of the raw column
normal     midrange (min + max) / 2 of the raw column, the center of a
           regression line drawn across the column's full extent
optimized  midrange of the column after dropping values outside the
           strict window (mean - 2 std, mean + 2 std)

and four signed percentage deviations between them.  NTA compares
normal to actual, OTA optimized to actual, OTN optimized to normal, and
improvement = (NTA - OTA) / NTA * 100 measures how much of the
normal-vs-actual gap the filtering removed.  Zero denominators yield
None fields rather than errors.

Filtering for the per-attribute numbers is independent per column; the
scatter/regression artifacts use the joint filter (rows inside both
windows) because a line needs paired coordinates.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, column_stats, filter_2sigma
from .errors import DataError
from .model import WeightVector, fit_line

SCHEMA_VERSION = 1

DEFAULT_WIDTH = 2.0


@dataclass(frozen=True)
class AttributeObservation:
    """The three location estimates for one attribute."""

    attribute: str
    actual: float
    normal: float
    optimized: float

    def __post_init__(self):
        for name in ("actual", "normal", "optimized"):
            if not np.isfinite(getattr(self, name)):
                raise DataError(f"{self.attribute}: non-finite {name} value")


@dataclass(frozen=True)
class DeviationReport:
    """Signed percentage deviations; None marks an undefined ratio."""

    attribute: str
    nta: float | None
    ota: float | None
    otn: float | None
    improvement: float | None


@dataclass(frozen=True)
class ExperimentResult:
    dataset_name: str
    x_col: str
    y_col: str
    width: float
    observations: tuple[AttributeObservation, ...]
    deviations: tuple[DeviationReport, ...]
    filtered_counts: dict[str, int]
    x: np.ndarray
    y: np.ndarray
    joint_mask: np.ndarray  # rows inside both windows
    raw_line: WeightVector | None
    filtered_line: WeightVector | None

    def __post_init__(self):
        obs_names = [o.attribute for o in self.observations]
        dev_names = [d.attribute for d in self.deviations]
        if obs_names != dev_names:
            raise DataError("observation and deviation attributes do not match")


def expected_midrange(dataset: Dataset, column: str) -> float:
    """Center of the column's full extent: (min + max) / 2."""
    x = dataset.column(column)
    if x.size == 0:
        raise DataError(f"column {column!r} is empty")
    return (float(x.min()) + float(x.max())) / 2.0


def _percent(numerator: float, denominator: float) -> float | None:
    if denominator == 0:
        return None
    return numerator / denominator * 100.0


def deviation_matrix(obs: AttributeObservation) -> DeviationReport:
    """Signed percentage deviations between the three estimates."""
    nta = _percent(obs.actual - obs.normal, obs.actual)
    ota = _percent(obs.actual - obs.optimized, obs.actual)
    otn = _percent(obs.optimized - obs.normal, obs.normal)
    if nta is None or ota is None or nta == 0:
        improvement = None
    else:
        improvement = (nta - ota) / nta * 100.0
    return DeviationReport(obs.attribute, nta, ota, otn, improvement)


def _safe_fit(x: np.ndarray, y: np.ndarray) -> WeightVector | None:
    if x.size < 2:
        return None
    try:
        return fit_line(x, y)
    except DataError:
        return None


def run_filter_experiment(
    dataset: Dataset,
    x_col: str,
    y_col: str,
    width: float = DEFAULT_WIDTH,
) -> ExperimentResult:
    """Run the filtering experiment over one (x, y) attribute pair."""
    observations = []
    counts = {}
    for col in (x_col, y_col):
        stats = column_stats(dataset, col)
        filtered = filter_2sigma(dataset, [col], width=width)
        counts[col] = filtered.row_count
        observations.append(AttributeObservation(
            attribute=col,
            actual=stats.mean,
            normal=expected_midrange(dataset, col),
            optimized=expected_midrange(filtered, col),
        ))
    x = dataset.column(x_col)
    y = dataset.column(y_col)
    joint_mask = np.ones(dataset.row_count, dtype=bool)
    for col in (x_col, y_col):
        vals = dataset.column(col)
        mean, std = vals.mean(), vals.std()
        if std == 0:
            joint_mask &= vals == mean
        elif not np.isinf(width):
            joint_mask &= (vals > mean - width * std) & (vals < mean + width * std)
    return ExperimentResult(
        dataset_name=dataset.name,
        x_col=x_col,
        y_col=y_col,
        width=float(width),
        observations=tuple(observations),
        deviations=tuple(deviation_matrix(o) for o in observations),
        filtered_counts=counts,
        x=x,
        y=y,
        joint_mask=joint_mask,
        raw_line=_safe_fit(x, y),
        filtered_line=_safe_fit(x[joint_mask], y[joint_mask]),
    )


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_") or "dataset"


def _write_xy(path: Path, xs: np.ndarray, ys: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for xv, yv in zip(xs, ys):
            writer.writerow([repr(float(xv)), repr(float(yv))])


def _line_segment(line: WeightVector | None, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if line is None or xs.size == 0:
        return np.empty(0), np.empty(0)
    ends = np.array([float(xs.min()), float(xs.max())])
    return ends, line.coefficients[0] * ends + line.bias


def emit_plot_data(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """Write scatter points and regression segments as x,y CSV files.

    Produces <name>_raw_points.csv, <name>_raw_line.csv and the same
    pair for the jointly filtered rows; line files hold the two segment
    endpoints.  Empty selections produce header-only files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    slug = _slug(result.dataset_name)
    fx = result.x[result.joint_mask]
    fy = result.y[result.joint_mask]
    parts = {
        f"{slug}_raw_points.csv": (result.x, result.y),
        f"{slug}_raw_line.csv": _line_segment(result.raw_line, result.x),
        f"{slug}_filtered_points.csv": (fx, fy),
        f"{slug}_filtered_line.csv": _line_segment(result.filtered_line, fx),
    }
    written = []
    for fname, (xs, ys) in parts.items():
        path = out / fname
        _write_xy(path, xs, ys)
        written.append(path)
    return written


def experiment_to_dict(result: ExperimentResult) -> dict:
    """JSON-ready view of an experiment (no arrays, stable key order)."""
    return {
        "schema_version": SCHEMA_VERSION,
        "dataset": result.dataset_name,
        "x_col": result.x_col,
        "y_col": result.y_col,
        "width": result.width,
        "row_count": int(result.x.size),
        "filtered_counts": {k: int(v) for k, v in result.filtered_counts.items()},
        "joint_filtered_count": int(result.joint_mask.sum()),
        "observations": [
            {
                "attribute": o.attribute,
                "actual": o.actual,
                "normal": o.normal,
                "optimized": o.optimized,
            }
            for o in result.observations
        ],
        "deviations": [
            {
                "attribute": d.attribute,
                "nta": d.nta,
                "ota": d.ota,
                "otn": d.otn,
                "improvement": d.improvement,
            }
            for d in result.deviations
        ],
    }
