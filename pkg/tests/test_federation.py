import math

import numpy as np
import pytest

from conftest import make_client
from fedgate.errors import ConfigError, DataError, DivergenceError
from fedgate.federation import (
    FederationConfig,
    aggregate,
    assign_straggler_epochs,
    run,
    sample_devices,
)
from fedgate.gkernel import GateConfig
from fedgate.model import LocalSolveConfig, WeightVector
from fedgate.problems import (
    CorruptedFleetSpec,
    DatasetProblemSpec,
    LinearFleetSpec,
    build_corrupted_fleet,
    build_linear_fleet,
    build_problem,
)
from fedgate.dataset import PartitionSpec


def solve_cfg(**kw):
    base = dict(epochs=5, learning_rate=0.1, batch_size=10, mu=0.5)
    base.update(kw)
    return LocalSolveConfig(**base)


def fed_cfg(algorithm, n, k, rounds, **kw):
    base = dict(algorithm=algorithm, n_devices=n, devices_per_round=k,
                rounds=rounds, solve=solve_cfg(), seed=5)
    base.update(kw)
    return FederationConfig(**base)


@pytest.fixture(scope="module")
def small_fleet():
    return build_linear_fleet(LinearFleetSpec(n_clients=6, samples_per_client=30, seed=2))


# --------------------------------------------------- FederationConfig


def test_config_collects_every_violation():
    with pytest.raises(ConfigError) as err:
        FederationConfig(algorithm="sgd", n_devices=2, devices_per_round=5,
                         rounds=0, solve=solve_cfg(), straggler_fraction=2.0)
    assert len(err.value.violations) >= 4


def test_config_default_sampling_is_uniform():
    cfg = fed_cfg("fedavg", 4, 2, 1)
    assert cfg.sampling_probs.tolist() == [0.25] * 4


def test_config_default_straggler_policy_by_algorithm():
    assert fed_cfg("fedavg", 2, 1, 1).straggler_policy == "drop"
    assert fed_cfg("fedprox", 2, 1, 1).straggler_policy == "partial"
    assert fed_cfg("gfedprox", 2, 1, 1).straggler_policy == "partial"


def test_config_explicit_straggler_policy_kept():
    cfg = fed_cfg("fedavg", 2, 1, 1, straggler_policy="partial")
    assert cfg.straggler_policy == "partial"


def test_config_sampling_prob_errors():
    with pytest.raises(ConfigError, match="length"):
        fed_cfg("fedavg", 3, 1, 1, sampling_probs=[0.5, 0.5])
    with pytest.raises(ConfigError, match=">= 0"):
        fed_cfg("fedavg", 2, 1, 1, sampling_probs=[1.5, -0.5])
    with pytest.raises(ConfigError, match="sum"):
        fed_cfg("fedavg", 2, 1, 1, sampling_probs=[0.6, 0.6])


# ------------------------------------------------------- device sampling


def test_sample_returns_sorted_distinct_k():
    out = sample_devices([4, 1, 7, 2], np.full(4, 0.25), 3, seed=0, round_index=0)
    assert len(out) == 3 == len(set(out))
    assert out == sorted(out)


def test_sample_deterministic_per_round():
    ids, probs = list(range(10)), np.full(10, 0.1)
    a = sample_devices(ids, probs, 4, seed=1, round_index=7)
    b = sample_devices(ids, probs, 4, seed=1, round_index=7)
    assert a == b
    picks = {tuple(sample_devices(ids, probs, 4, seed=1, round_index=r)) for r in range(10)}
    assert len(picks) > 1  # rounds draw fresh clocks


def test_sample_zero_probability_never_wins():
    probs = np.array([0.5, 0.5, 0.0])
    for r in range(60):
        assert 2 not in sample_devices([0, 1, 2], probs, 2, seed=3, round_index=r)


def test_sample_infeasible_k():
    with pytest.raises(ConfigError, match="positive probability"):
        sample_devices([0, 1, 2], np.array([1.0, 0.0, 0.0]), 2, seed=0, round_index=0)


def test_sample_relabeling_invariance():
    # each device owns its clock, so listing order cannot matter
    ids = [0, 1, 2, 3]
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    shuffled = [2, 0, 3, 1]
    shuffled_probs = np.array([probs[i] for i in shuffled])
    for r in range(20):
        a = sample_devices(ids, probs, 2, seed=11, round_index=r)
        b = sample_devices(shuffled, shuffled_probs, 2, seed=11, round_index=r)
        assert a == b


def test_sample_marginal_frequencies_track_probabilities():
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    counts = np.zeros(4)
    rounds = 5000
    for r in range(rounds):
        counts[sample_devices([0, 1, 2, 3], probs, 1, seed=99, round_index=r)[0]] += 1
    assert np.max(np.abs(counts / rounds - probs)) < 0.02


# ------------------------------------------------------------ stragglers


def test_stragglers_fraction_zero_full_epochs():
    out = assign_straggler_epochs(list(range(20)), 0.0, 7, seed=0, round_index=0)
    assert all(e == 7 for e in out.values())


def test_stragglers_fraction_one_always_short():
    out = assign_straggler_epochs(list(range(50)), 1.0, 5, seed=0, round_index=0)
    assert all(1 <= e < 5 for e in out.values())


def test_stragglers_single_epoch_cannot_fall_short():
    out = assign_straggler_epochs(list(range(50)), 1.0, 1, seed=0, round_index=0)
    assert all(e == 1 for e in out.values())


def test_straggler_count_matches_binomial():
    # 1000 devices at p = 0.5: the 99% interval is [459, 541]
    out = assign_straggler_epochs(list(range(1000)), 0.5, 10, seed=0, round_index=0)
    short = [e for e in out.values() if e < 10]
    assert 459 <= len(short) <= 541
    assert min(short) >= 1 and max(short) <= 9


def test_stragglers_deterministic():
    a = assign_straggler_epochs([3, 1, 4], 0.5, 6, seed=2, round_index=9)
    b = assign_straggler_epochs([3, 1, 4], 0.5, 6, seed=2, round_index=9)
    assert a == b


# ----------------------------------------------------------- aggregation


def test_aggregate_uniform_mean():
    w = aggregate([(WeightVector.zeros(1), 5), (WeightVector.from_array([2.0, 2.0]), 1)])
    assert w.as_array().tolist() == [1.0, 1.0]


def test_aggregate_by_samples():
    w = aggregate(
        [(WeightVector.zeros(1), 1), (WeightVector.from_array([3.0, 3.0]), 2)],
        weighting="by_samples",
    )
    assert w.as_array().tolist() == [2.0, 2.0]


def test_aggregate_errors():
    with pytest.raises(DataError):
        aggregate([])
    with pytest.raises(ConfigError):
        aggregate([(WeightVector.zeros(1), 1)], weighting="median")
    with pytest.raises(DataError, match="mixed"):
        aggregate([(WeightVector.zeros(1), 1), (WeightVector.zeros(2), 1)])


# ------------------------------------------------------------------- run


def test_run_validates_inputs(small_fleet):
    clients, _ = small_fleet
    cfg = fed_cfg("fedavg", 4, 2, 1)
    with pytest.raises(ConfigError, match="devices"):
        run(cfg, clients, WeightVector.zeros(1))
    dupes = [make_client([1.0, 2.0], [1.0, 2.0], client_id=0) for _ in range(4)]
    with pytest.raises(ConfigError, match="unique"):
        run(cfg, dupes, WeightVector.zeros(1))
    with pytest.raises(ConfigError, match="dim"):
        run(cfg, clients[:4], WeightVector.zeros(2))


def test_run_fedavg_loss_decreases(small_fleet):
    clients, ref = small_fleet
    cfg = fed_cfg("fedavg", 6, 3, 15)
    h = run(cfg, clients, WeightVector.zeros(1))
    assert h.rounds[-1].global_loss < h.rounds[0].global_loss
    assert h.final_weights.distance_to(ref) < 0.5
    assert h.trajectory().shape == (15, 2)
    assert all(len(r.selected) == 3 for r in h.rounds)


def test_run_repeats_are_bit_identical(small_fleet):
    clients, _ = small_fleet
    cfg = fed_cfg("gfedprox", 6, 3, 8, straggler_fraction=0.3)
    a = run(cfg, clients, WeightVector.zeros(1))
    b = run(cfg, clients, WeightVector.zeros(1))
    assert np.array_equal(a.trajectory(), b.trajectory())
    assert np.array_equal(a.final_n0, b.final_n0)


def test_run_client_listing_order_is_irrelevant(small_fleet):
    clients, _ = small_fleet
    probs = np.array([0.05, 0.15, 0.2, 0.25, 0.05, 0.3])
    cfg = fed_cfg("gfedprox", 6, 3, 8, sampling_probs=probs, straggler_fraction=0.2)
    fwd = run(cfg, clients, WeightVector.zeros(1))
    cfg_rev = fed_cfg("gfedprox", 6, 3, 8, sampling_probs=probs[::-1],
                      straggler_fraction=0.2)
    rev = run(cfg_rev, clients[::-1], WeightVector.zeros(1))
    assert np.array_equal(fwd.trajectory(), rev.trajectory())


def test_run_gated_passthrough_matches_fedprox(small_fleet):
    clients, _ = small_fleet
    base = dict(straggler_fraction=0.3)
    gated = fed_cfg("gfedprox", 6, 3, 10, gate=GateConfig(mode="passthrough"), **base)
    prox = fed_cfg("fedprox", 6, 3, 10, **base)
    a = run(gated, clients, WeightVector.zeros(1))
    b = run(prox, clients, WeightVector.zeros(1))
    assert np.array_equal(a.trajectory(), b.trajectory())


def test_run_fedprox_mu_zero_matches_fedavg(small_fleet):
    clients, _ = small_fleet
    prox = fed_cfg("fedprox", 6, 3, 10, solve=solve_cfg(mu=0.0))
    avg = fed_cfg("fedavg", 6, 3, 10, solve=solve_cfg(mu=0.0))
    a = run(prox, clients, WeightVector.zeros(1))
    b = run(avg, clients, WeightVector.zeros(1))
    assert np.array_equal(a.trajectory(), b.trajectory())


def test_run_zero_probability_client_never_participates(small_fleet):
    clients, _ = small_fleet
    probs = np.array([0.4, 0.4, 0.2, 0.0, 0.0, 0.0])
    cfg = fed_cfg("fedavg", 6, 2, 5, sampling_probs=probs)
    h = run(cfg, clients, WeightVector.zeros(1))
    assert h.participated[:3].all()
    assert not h.participated[3:].any()


def test_run_all_stragglers_dropped_freezes_weights(small_fleet):
    clients, _ = small_fleet
    w0 = WeightVector.from_array([0.3, -0.7])
    cfg = fed_cfg("fedavg", 6, 3, 4, straggler_fraction=1.0)
    h = run(cfg, clients, w0)
    assert all(r.empty_aggregation for r in h.rounds)
    assert all(r.global_weights.equals(w0) for r in h.rounds)
    assert all(math.isnan(r.mean_beta) for r in h.rounds)
    assert not h.participated.any()


def test_run_partial_policy_keeps_stragglers(small_fleet):
    clients, _ = small_fleet
    cfg = fed_cfg("fedprox", 6, 3, 4, straggler_fraction=1.0)
    h = run(cfg, clients, WeightVector.zeros(1))
    assert not any(r.empty_aggregation for r in h.rounds)
    # partial policy: every selected device contributes despite stalling
    assert all(r.accepted == r.selected for r in h.rounds)
    assert all(np.isfinite(r.mean_beta) for r in h.rounds)


def test_run_gate_isolates_corrupted_client():
    clients, ref = build_corrupted_fleet(
        CorruptedFleetSpec(n_clients=8, n_corrupted=1, samples_per_client=40, seed=3)
    )
    gate = GateConfig(stats_include_rejected=True)
    cfg = fed_cfg("gfedprox", 8, 8, 10, gate=gate)
    h = run(cfg, clients, WeightVector.zeros(1))
    assert h.final_n0[0] >= 0.8  # the corrupted device
    assert h.final_n0[1:].max() <= 0.2
    assert np.all((0.0 <= h.final_n0) & (h.final_n0 <= 1.0))
    gated_dist = h.final_weights.distance_to(ref)

    prox = fed_cfg("fedprox", 8, 8, 10)
    baseline = run(prox, clients, WeightVector.zeros(1)).final_weights.distance_to(ref)
    assert gated_dist < 0.1 < baseline
    assert gated_dist < baseline


def test_run_ungated_algorithms_report_zero_n0(small_fleet):
    clients, _ = small_fleet
    h = run(fed_cfg("fedavg", 6, 3, 3), clients, WeightVector.zeros(1))
    assert h.final_n0.tolist() == [0.0] * 6
    assert h.rounds[-1].telemetry.total_seen == 0


def test_run_divergence_names_round_and_client():
    client = make_client([10.0, 20.0], [5.0, 7.0], client_id=0)
    cfg = FederationConfig(
        algorithm="fedavg", n_devices=1, devices_per_round=1, rounds=3,
        solve=LocalSolveConfig(epochs=50, learning_rate=1e6, batch_size=2), seed=0,
    )
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(DivergenceError) as err:
            run(cfg, [client], WeightVector.zeros(1))
    assert err.value.round_index == 0
    assert err.value.client_id == 0
    assert err.value.epoch is not None


# -------------------------------------------------------- fleet builders


def test_linear_fleet_shape_and_reference():
    clients, ref = build_linear_fleet(LinearFleetSpec(n_clients=3, samples_per_client=30))
    assert [c.client_id for c in clients] == [0, 1, 2]
    assert all(c.n_k == 30 for c in clients)
    assert ref.coefficients[0] == pytest.approx(2.0, abs=0.3)
    assert ref.bias == pytest.approx(1.0, abs=0.3)


def test_linear_fleet_deterministic():
    a, _ = build_linear_fleet(LinearFleetSpec(seed=4))
    b, _ = build_linear_fleet(LinearFleetSpec(seed=4))
    for ca, cb in zip(a, b):
        assert np.array_equal(ca.features, cb.features)
        assert np.array_equal(ca.targets, cb.targets)


def test_corrupted_fleet_offsets_first_ids():
    spec = CorruptedFleetSpec(n_clients=6, n_corrupted=2, samples_per_client=50,
                              corruption_offset=50.0, seed=1)
    clients, ref = build_corrupted_fleet(spec)
    bad = np.mean([c.targets.mean() for c in clients[:2]])
    good = np.mean([c.targets.mean() for c in clients[2:]])
    assert bad - good == pytest.approx(50.0, abs=1.0)
    # the reference ignores the corrupted devices entirely
    assert ref.bias == pytest.approx(1.0, abs=0.3)


def test_corrupted_fleet_without_corruption_matches_linear():
    spec = CorruptedFleetSpec(n_clients=4, n_corrupted=0, samples_per_client=20, seed=9)
    a, ref_a = build_corrupted_fleet(spec)
    b, ref_b = build_linear_fleet(LinearFleetSpec(n_clients=4, samples_per_client=20, seed=9))
    for ca, cb in zip(a, b):
        assert np.array_equal(ca.targets, cb.targets)
    assert ref_a.equals(ref_b)


def test_dataset_problem_builder(bundled):
    spec = DatasetProblemSpec(
        source="iris", x_col="sepal width", y_col="petal length",
        partition=PartitionSpec(n_clients=5, seed=1),
    )
    clients, ref = build_problem(spec)
    assert sum(c.n_k for c in clients) == 150
    assert ref.dim == 1


def test_build_problem_rejects_unknown_spec():
    with pytest.raises(ConfigError):
        build_problem(object())


def test_fleet_spec_validation():
    with pytest.raises(ConfigError):
        LinearFleetSpec(n_clients=0)
    with pytest.raises(ConfigError):
        LinearFleetSpec(x_low=1.0, x_high=1.0)
    with pytest.raises(ConfigError):
        CorruptedFleetSpec(n_corrupted=30, n_clients=20)
