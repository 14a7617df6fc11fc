"""Gaussian acceptance gate for client updates, plus its telemetry.

The server keeps per-coordinate mean/std statistics over the updates it
received in the previous round.  An incoming update passes only if every
coordinate lies strictly inside (mean - width*std, mean + width*std); the
default width of 2 corresponds to a two-tailed 5% rejection mass.  An
accepted update carries a positive gate value (the mean of its halved
coordinate densities) which scales that client's next proximal term; a
rejected update carries gate value 0 and is excluded from aggregation.

Telemetry tracks the rejection ratio n0 in [0, 1] (0 = ideal contributor,
1 = fully faulty) and a kurtosis diagnostic of the accepted-update
history.  The raw-kurtosis-to-3*n0 ratio is reported, never asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, DegenerateScaleError
from .model import WeightVector

GATE_MODES = ("gated", "passthrough", "disabled")

LEPTOKURTIC = "Leptokurtic"
MESOKURTIC = "Mesokurtic"
PLATYKURTIC = "Platykurtic"

_MESO_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ServerStats:
    """Per-coordinate mean/std of previously received updates."""

    mean: np.ndarray
    std: np.ndarray
    n_observed: int

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        std = np.atleast_1d(np.asarray(self.std, dtype=float))
        if mean.shape != std.shape:
            raise DataError("server stats mean/std shapes differ")
        if np.any(std < 0):
            raise DataError("server stats std must be >= 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


@dataclass(frozen=True)
class GateConfig:
    width: float = 2.0
    mode: str = "gated"
    stats_include_rejected: bool = False
    # single-valued knobs kept explicit so the contract is visible
    aggregation_of_coordinates: str = "all_must_pass"
    scalar_rule: str = "mean_of_density_halves"

    def __post_init__(self):
        if self.width <= 0:
            raise DataError("gate width must be > 0")
        if self.mode not in GATE_MODES:
            raise DataError(f"gate mode must be one of {GATE_MODES}")
        if self.aggregation_of_coordinates != "all_must_pass":
            raise DataError("only all_must_pass coordinate aggregation is supported")
        if self.scalar_rule != "mean_of_density_halves":
            raise DataError("only mean_of_density_halves scalar rule is supported")


@dataclass(frozen=True)
class GateDecision:
    accepted: bool
    g_value: float
    offending_coordinates: tuple[int, ...] = ()


PASSTHROUGH_DECISION = GateDecision(accepted=True, g_value=0.5)


@dataclass(frozen=True)
class KernelTelemetry:
    """Running gate statistics; immutable, updated by replacement."""

    total_seen: int = 0
    total_rejected: int = 0
    n0: float = 0.0
    kurtosis_raw: float | None = None
    kurtosis_excess: float | None = None
    tail_class: str | None = None
    ratio_raw_to_3n0: float | None = None


def gaussian_pdf(x: float, mean: float, std: float) -> float:
    """Normal density at x; strictly positive for std > 0."""
    if std <= 0:
        raise DegenerateScaleError("gaussian_pdf needs std > 0")
    z = (x - mean) / std
    return math.exp(-0.5 * z * z) / (std * math.sqrt(2.0 * math.pi))


def update_server_stats(updates: list[WeightVector]) -> ServerStats:
    """Per-coordinate population mean/std over a batch of updates."""
    if not updates:
        raise DataError("cannot summarize an empty update list")
    dims = {u.dim for u in updates}
    if len(dims) != 1:
        raise DataError(f"updates have mixed dimensions: {sorted(dims)}")
    stacked = np.stack([u.as_array() for u in updates])
    return ServerStats(
        mean=stacked.mean(axis=0),
        std=stacked.std(axis=0),
        n_observed=len(updates),
    )


def gate(update: WeightVector, stats: ServerStats, cfg: GateConfig) -> GateDecision:
    """Decide whether one update falls inside the acceptance window.

    gated mode: coordinate j passes iff it lies strictly inside
    (mean_j - width*std_j, mean_j + width*std_j); a zero-spread
    coordinate passes only on exact equality and contributes 1/2 to the
    gate value.  The update is accepted iff every coordinate passes, with
    gate value = mean over coordinates of density/2; otherwise gate value
    is 0 and the offending coordinates are listed.  passthrough and
    disabled modes accept unconditionally with gate value 1/2.
    """
    if cfg.mode in ("passthrough", "disabled"):
        return PASSTHROUGH_DECISION
    w = update.as_array()
    if w.shape != stats.mean.shape:
        raise DataError(
            f"update dimension {w.shape[0]} does not match stats dimension "
            f"{stats.mean.shape[0]}"
        )
    offending: list[int] = []
    halves: list[float] = []
    for j, (x, m, s) in enumerate(zip(w, stats.mean, stats.std)):
        if s == 0.0:
            if x == m:
                halves.append(0.5)
            else:
                offending.append(j)
        elif m - cfg.width * s < x < m + cfg.width * s:
            halves.append(gaussian_pdf(x, m, s) / 2.0)
        else:
            offending.append(j)
    if offending:
        return GateDecision(accepted=False, g_value=0.0,
                            offending_coordinates=tuple(offending))
    return GateDecision(accepted=True, g_value=float(np.mean(halves)))


def record_decision(telemetry: KernelTelemetry, decision: GateDecision) -> KernelTelemetry:
    """Fold one gate decision into the running counters."""
    seen = telemetry.total_seen + 1
    rejected = telemetry.total_rejected + (0 if decision.accepted else 1)
    return replace(telemetry, total_seen=seen, total_rejected=rejected,
                   n0=rejected / seen)


def kurtosis(samples: list[float] | np.ndarray) -> tuple[float, float]:
    """Bias-corrected sample kurtosis of a scalar sample.

    Returns (raw, excess) where raw = excess + 3.  Needs at least four
    samples and nonzero variance.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 4:
        raise DataError("kurtosis needs at least 4 samples")
    s = x.std(ddof=1)
    if s == 0.0:
        raise DegenerateScaleError("kurtosis undefined for zero variance")
    z4 = np.sum(((x - x.mean()) / s) ** 4)
    excess = (n * (n + 1)) / ((n - 1) * (n - 2) * (n - 3)) * z4 \
        - 3.0 * (n - 1) ** 2 / ((n - 2) * (n - 3))
    return float(excess + 3.0), float(excess)


def classify_tailedness(kurtosis_raw: float) -> str:
    """Tail class from raw kurtosis: heavy > 3, moderate = 3, light < 3."""
    if abs(kurtosis_raw - 3.0) <= _MESO_TOLERANCE:
        return MESOKURTIC
    return LEPTOKURTIC if kurtosis_raw > 3.0 else PLATYKURTIC


def kernel_report(
    telemetry: KernelTelemetry,
    recent_updates: list[float] | np.ndarray,
) -> KernelTelemetry:
    """Fill the kurtosis diagnostics from recent accepted-update scalars.

    With fewer than four samples or zero variance the kurtosis fields stay
    unavailable (None).  The raw/(3*n0) ratio is only defined for n0 > 0.
    """
    try:
        raw, excess = kurtosis(recent_updates)
    except DataError:
        return replace(telemetry, kurtosis_raw=None, kurtosis_excess=None,
                       tail_class=None, ratio_raw_to_3n0=None)
    ratio = raw / (3.0 * telemetry.n0) if telemetry.n0 > 0 else None
    return replace(telemetry, kurtosis_raw=raw, kurtosis_excess=excess,
                   tail_class=classify_tailedness(raw), ratio_raw_to_3n0=ratio)
