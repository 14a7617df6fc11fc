"""Deterministic federated-optimization simulator with a Gaussian update gate.

Three algorithms over simulated clients (plain averaging, proximal local
solves, and proximal solves behind a 2-sigma acceptance gate), plus the
2-sigma filtering analysis pipeline for tabular datasets.
"""

from .analysis import (
    AttributeObservation,
    DeviationReport,
    ExperimentResult,
    deviation_matrix,
    expected_midrange,
    run_filter_experiment,
)
from .dataset import (
    ClientDataset,
    ColumnStats,
    Dataset,
    PartitionSpec,
    column_stats,
    filter_2sigma,
    load_csv,
    partition,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateScaleError,
    DivergenceError,
    FedgateError,
)
from .federation import (
    FederationConfig,
    RoundReport,
    RunHistory,
    aggregate,
    run,
)
from .gkernel import (
    GateConfig,
    GateDecision,
    KernelTelemetry,
    ServerStats,
    classify_tailedness,
    gate,
    kurtosis,
)
from .model import (
    InexactnessReport,
    LocalSolveConfig,
    WeightVector,
    fit_line,
    gradient,
    local_loss,
    measure_inexactness,
    prox_local,
    sgd_local,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeObservation",
    "ClientDataset",
    "ColumnStats",
    "ConfigError",
    "DataError",
    "Dataset",
    "DegenerateScaleError",
    "DeviationReport",
    "DivergenceError",
    "ExperimentResult",
    "FederationConfig",
    "FedgateError",
    "GateConfig",
    "GateDecision",
    "InexactnessReport",
    "KernelTelemetry",
    "LocalSolveConfig",
    "PartitionSpec",
    "RoundReport",
    "RunHistory",
    "ServerStats",
    "WeightVector",
    "aggregate",
    "classify_tailedness",
    "column_stats",
    "deviation_matrix",
    "expected_midrange",
    "filter_2sigma",
    "fit_line",
    "gate",
    "gradient",
    "kurtosis",
    "load_csv",
    "local_loss",
    "measure_inexactness",
    "partition",
    "prox_local",
    "run",
    "run_filter_experiment",
    "sgd_local",
    "__version__",
]
