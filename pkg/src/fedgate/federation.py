"""Round-based orchestration of the three federated optimizers.

Each round: sample devices, assign local work (stragglers do fewer
epochs), run the seeded local solver from the current global weights,
optionally gate the returned updates, and aggregate the survivors.

fedavg    plain SGD locally, stragglers dropped from aggregation
fedprox   proximal SGD locally, partial straggler solutions kept
gfedprox  fedprox plus the Gaussian acceptance gate; a rejected update
          is excluded from aggregation, counted into that client's n0,
          and zeroes the client's proximal scale for its next solve

Randomness is keyed per (run seed, round, client id, purpose), so a
client's sampling clock, straggler draw, and solve stream travel with
the client: relabeling clients (with their sampling probabilities)
leaves the trajectory unchanged, and trajectories are bit-identical
across repeated runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import ClientDataset
from .errors import ConfigError, DataError, DivergenceError
from .gkernel import (
    PASSTHROUGH_DECISION,
    GateConfig,
    KernelTelemetry,
    ServerStats,
    gate,
    kernel_report,
    record_decision,
    update_server_stats,
)
from .model import (
    LocalSolveConfig,
    WeightVector,
    local_loss,
    measure_inexactness,
    prox_local,
    sgd_local,
)

ALGORITHMS = ("fedavg", "fedprox", "gfedprox")
WEIGHTINGS = ("uniform", "by_samples")
STRAGGLER_POLICIES = ("drop", "partial")

# purpose tags for the per-(round, client) substreams
_SAMPLING = 0
_STRAGGLER = 1
_SOLVE = 2

_BOOTSTRAP_G = 0.5


@dataclass(frozen=True)
class FederationConfig:
    """Full description of one federated run."""

    algorithm: str
    n_devices: int
    devices_per_round: int
    rounds: int
    solve: LocalSolveConfig
    sampling_probs: np.ndarray | None = None
    gate: GateConfig = field(default_factory=GateConfig)
    straggler_fraction: float = 0.0
    straggler_policy: str | None = None
    aggregation_weighting: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        problems = []
        if self.algorithm not in ALGORITHMS:
            problems.append(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.n_devices < 1:
            problems.append("n_devices must be >= 1")
        if not 1 <= self.devices_per_round <= max(self.n_devices, 1):
            problems.append("devices_per_round must satisfy 1 <= K <= n_devices")
        if self.rounds < 1:
            problems.append("rounds must be >= 1")
        if not 0.0 <= self.straggler_fraction <= 1.0:
            problems.append("straggler_fraction must lie in [0, 1]")
        if self.aggregation_weighting not in WEIGHTINGS:
            problems.append(f"aggregation_weighting must be one of {WEIGHTINGS}")
        if self.straggler_policy is None:
            # canonical pairing: fedavg drops, the proximal methods keep partial work
            policy = "drop" if self.algorithm == "fedavg" else "partial"
            object.__setattr__(self, "straggler_policy", policy)
        elif self.straggler_policy not in STRAGGLER_POLICIES:
            problems.append(f"straggler_policy must be one of {STRAGGLER_POLICIES}")
        if self.sampling_probs is None:
            if self.n_devices >= 1:
                object.__setattr__(
                    self, "sampling_probs", np.full(self.n_devices, 1.0 / self.n_devices)
                )
        else:
            probs = np.asarray(self.sampling_probs, dtype=float)
            object.__setattr__(self, "sampling_probs", probs)
            if probs.shape != (self.n_devices,):
                problems.append(
                    f"sampling_probs has length {probs.size}, expected {self.n_devices}"
                )
            elif np.any(probs < 0):
                problems.append("sampling_probs must be >= 0")
            elif abs(probs.sum() - 1.0) > 1e-9:
                problems.append(f"sampling_probs sum to {probs.sum():.12f}, expected 1")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class RoundReport:
    """What one round did: who was picked, who survived, where weights went."""

    round: int
    selected: tuple[int, ...]
    accepted: tuple[int, ...]
    rejected: tuple[int, ...]
    global_weights: WeightVector
    global_loss: float
    mean_beta: float
    telemetry: KernelTelemetry
    empty_aggregation: bool = False


@dataclass(frozen=True)
class RunHistory:
    config: FederationConfig
    rounds: tuple[RoundReport, ...]
    client_ids: tuple[int, ...]
    final_n0: np.ndarray  # aligned with client_ids
    participated: np.ndarray  # bool per client; False = never reached the server

    @property
    def final_weights(self) -> WeightVector:
        return self.rounds[-1].global_weights

    def trajectory(self) -> np.ndarray:
        """Global weights after each round, one row per round."""
        return np.stack([r.global_weights.as_array() for r in self.rounds])


def _stream(seed: int, round_index: int, client_id: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng([seed, round_index, client_id, purpose])


def _solve_seed(seed: int, round_index: int, client_id: int) -> int:
    ss = np.random.SeedSequence([seed, round_index, client_id, _SOLVE])
    return int(ss.generate_state(1, np.uint64)[0])


def sample_devices(
    ids: list[int],
    probs: np.ndarray,
    k: int,
    seed: int,
    round_index: int,
) -> list[int]:
    """Pick k distinct devices, each weighted by its sampling probability.

    Runs an exponential race: device i draws a clock from its own stream
    and the k smallest clocks scaled by 1/p_i win, which is exactly
    probability-proportional sampling without replacement.  A device with
    p_i = 0 never wins.  Returned ids are sorted ascending.
    """
    probs = np.asarray(probs, dtype=float)
    feasible = int(np.count_nonzero(probs > 0))
    if k > feasible:
        raise ConfigError(
            f"cannot select {k} devices: only {feasible} have positive probability"
        )
    scores = []
    for cid, p in zip(ids, probs):
        if p <= 0:
            continue
        u = _stream(seed, round_index, cid, _SAMPLING).exponential()
        scores.append((u / p, cid))
    scores.sort()
    return sorted(cid for _, cid in scores[:k])


def assign_straggler_epochs(
    selected: list[int],
    straggler_fraction: float,
    epochs: int,
    seed: int,
    round_index: int,
) -> dict[int, int]:
    """Decide how many local epochs each selected device completes.

    Each device independently stalls with probability straggler_fraction;
    a stalled device finishes a uniform number of epochs in {1, ..., E-1}
    (or the single epoch when E = 1 leaves no room to fall short).
    """
    out = {}
    for cid in selected:
        rng = _stream(seed, round_index, cid, _STRAGGLER)
        if rng.random() < straggler_fraction and epochs > 1:
            out[cid] = int(rng.integers(1, epochs))
        else:
            out[cid] = epochs
    return out


def aggregate(updates: list[tuple[WeightVector, int]], weighting: str = "uniform") -> WeightVector:
    """Combine client weight vectors into the next global model.

    uniform takes the plain mean; by_samples weights each update by its
    client's sample count.
    """
    if not updates:
        raise DataError("cannot aggregate an empty update list")
    if weighting not in WEIGHTINGS:
        raise ConfigError(f"aggregation weighting must be one of {WEIGHTINGS}")
    dims = {w.dim for w, _ in updates}
    if len(dims) != 1:
        raise DataError(f"updates have mixed dimensions: {sorted(dims)}")
    stacked = np.stack([w.as_array() for w, _ in updates])
    if weighting == "uniform":
        return WeightVector.from_array(stacked.mean(axis=0))
    counts = np.array([float(n) for _, n in updates])
    return WeightVector.from_array((counts[:, None] * stacked).sum(axis=0) / counts.sum())


def run(config: FederationConfig, clients: list[ClientDataset], w0: WeightVector) -> RunHistory:
    """Execute the configured number of federated rounds from w0."""
    if len(clients) != config.n_devices:
        raise ConfigError(
            f"config declares {config.n_devices} devices but {len(clients)} datasets given"
        )
    ids = [c.client_id for c in clients]
    if len(set(ids)) != len(ids):
        raise ConfigError("client ids must be unique")
    for c in clients:
        if c.dim != w0.dim:
            raise ConfigError(
                f"client {c.client_id} has feature dim {c.dim}, model expects {w0.dim}"
            )
    by_id = {c.client_id: c for c in clients}
    prob_of = dict(zip(ids, config.sampling_probs))
    total_samples = sum(c.n_k for c in clients)
    gated = config.algorithm == "gfedprox"

    g_scale = {cid: _BOOTSTRAP_G for cid in ids}
    gate_seen = {cid: 0 for cid in ids}
    gate_rejected = {cid: 0 for cid in ids}
    participated = {cid: False for cid in ids}
    telemetry = KernelTelemetry()
    accepted_scalars: list[float] = []  # first coordinate of each accepted update
    stats: ServerStats | None = None

    w_t = w0
    reports = []
    for t in range(config.rounds):
        selected = sample_devices(
            ids, [prob_of[cid] for cid in ids], config.devices_per_round, config.seed, t
        )
        epochs_map = assign_straggler_epochs(
            selected, config.straggler_fraction, config.solve.epochs, config.seed, t
        )
        accepted: list[int] = []
        rejected: list[int] = []
        contributions: list[tuple[WeightVector, int]] = []
        received: list[WeightVector] = []
        betas: list[float] = []
        for cid in selected:
            epochs_k = epochs_map[cid]
            if config.straggler_policy == "drop" and epochs_k < config.solve.epochs:
                continue
            data = by_id[cid]
            cfg_k = replace(config.solve, epochs=epochs_k,
                            seed=_solve_seed(config.seed, t, cid))
            scale_k = g_scale[cid] if gated else _BOOTSTRAP_G
            try:
                if config.algorithm == "fedavg":
                    w_k = sgd_local(w_t, data, cfg_k)
                else:
                    w_k = prox_local(w_t, data, cfg_k, g_scale=scale_k)
            except DivergenceError as err:
                raise DivergenceError(
                    f"client {cid} diverged in round {t}: {err}",
                    epoch=err.epoch, round_index=t, client_id=cid,
                ) from err
            participated[cid] = True
            mu_k = 0.0 if config.algorithm == "fedavg" else config.solve.mu
            betas.append(measure_inexactness(w_k, w_t, data, mu_k, scale_k).beta)
            received.append(w_k)
            if gated:
                # no stats exist before the first aggregation, so round 0
                # bootstraps every update through
                if stats is None:
                    decision = PASSTHROUGH_DECISION
                else:
                    decision = gate(w_k, stats, config.gate)
                telemetry = record_decision(telemetry, decision)
                gate_seen[cid] += 1
                g_scale[cid] = decision.g_value
                if not decision.accepted:
                    gate_rejected[cid] += 1
                    rejected.append(cid)
                    continue
            accepted.append(cid)
            contributions.append((w_k, data.n_k))
            accepted_scalars.append(float(w_k.as_array()[0]))

        empty = not contributions
        w_next = w_t if empty else aggregate(contributions, config.aggregation_weighting)
        if gated:
            pool = received if config.gate.stats_include_rejected else [w for w, _ in contributions]
            if pool:
                stats = update_server_stats(pool)
            telemetry = kernel_report(telemetry, accepted_scalars)
        loss = sum(
            (c.n_k / total_samples) * local_loss(w_next, c) for c in clients
        )
        reports.append(RoundReport(
            round=t,
            selected=tuple(selected),
            accepted=tuple(accepted),
            rejected=tuple(rejected),
            global_weights=w_next,
            global_loss=float(loss),
            mean_beta=float(np.mean(betas)) if betas else float("nan"),
            telemetry=telemetry,
            empty_aggregation=empty,
        ))
        w_t = w_next

    n0 = np.array([
        gate_rejected[cid] / gate_seen[cid] if gate_seen[cid] else 0.0 for cid in ids
    ])
    return RunHistory(
        config=config,
        rounds=tuple(reports),
        client_ids=tuple(ids),
        final_n0=n0,
        participated=np.array([participated[cid] for cid in ids]),
    )
