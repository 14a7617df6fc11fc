import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedgate.errors import DataError, DegenerateScaleError
from fedgate.gkernel import (
    LEPTOKURTIC,
    MESOKURTIC,
    PASSTHROUGH_DECISION,
    PLATYKURTIC,
    GateConfig,
    GateDecision,
    KernelTelemetry,
    ServerStats,
    classify_tailedness,
    gate,
    gaussian_pdf,
    kernel_report,
    kurtosis,
    record_decision,
    update_server_stats,
)
from fedgate.model import WeightVector

HALF_MODE_DENSITY = 0.19947114020071635  # pdf(0; 0, 1) / 2


def wv(*entries):
    return WeightVector.from_array(np.array(entries, dtype=float))


def unit_stats(dim):
    return ServerStats(mean=np.zeros(dim), std=np.ones(dim), n_observed=4)


# --------------------------------------------------------- gaussian_pdf


def test_pdf_standard_normal_mode():
    assert gaussian_pdf(0.0, 0.0, 1.0) == pytest.approx(0.3989422804014327, rel=1e-15)


def test_pdf_one_sigma_out():
    assert gaussian_pdf(1.0, 0.0, 1.0) == pytest.approx(0.24197072451914337, rel=1e-15)


def test_pdf_scales_inversely_with_std():
    assert gaussian_pdf(0.0, 0.0, 0.5) == pytest.approx(2 * 0.3989422804014327, rel=1e-12)


def test_pdf_symmetry():
    assert gaussian_pdf(3.0, 1.0, 2.0) == gaussian_pdf(-1.0, 1.0, 2.0)


def test_pdf_degenerate_scale():
    with pytest.raises(DegenerateScaleError):
        gaussian_pdf(0.0, 0.0, 0.0)


@given(st.floats(-50, 50), st.floats(-10, 10), st.floats(1e-3, 1e3))
def test_pdf_bounded_by_mode(x, mean, std):
    # far tails may underflow to exactly 0, so only non-negativity holds
    assert 0.0 <= gaussian_pdf(x, mean, std) <= gaussian_pdf(mean, mean, std) + 1e-18


# -------------------------------------------------- update_server_stats


def test_stats_two_updates_oracle():
    s = update_server_stats([wv(0.0, 0.0), wv(2.0, 2.0)])
    assert s.mean.tolist() == [1.0, 1.0]
    assert s.std.tolist() == [1.0, 1.0]  # population convention
    assert s.n_observed == 2


def test_stats_single_update_has_zero_spread():
    s = update_server_stats([wv(3.0, -1.0)])
    assert s.mean.tolist() == [3.0, -1.0]
    assert s.std.tolist() == [0.0, 0.0]


def test_stats_empty_rejected():
    with pytest.raises(DataError):
        update_server_stats([])


def test_stats_mixed_dims_rejected():
    with pytest.raises(DataError, match="mixed dimensions"):
        update_server_stats([wv(1.0, 2.0), wv(1.0, 2.0, 3.0)])


def test_server_stats_validation():
    with pytest.raises(DataError):
        ServerStats(mean=np.zeros(2), std=-np.ones(2), n_observed=1)
    with pytest.raises(DataError):
        ServerStats(mean=np.zeros(2), std=np.ones(3), n_observed=1)


# ----------------------------------------------------------------- gate


def test_gate_config_validation():
    with pytest.raises(DataError):
        GateConfig(width=0.0)
    with pytest.raises(DataError):
        GateConfig(mode="open")
    with pytest.raises(DataError):
        GateConfig(aggregation_of_coordinates="any")
    with pytest.raises(DataError):
        GateConfig(scalar_rule="product")


def test_gate_value_at_the_mode():
    decision = gate(wv(0.0), unit_stats(1), GateConfig())
    assert decision.accepted
    assert decision.g_value == pytest.approx(HALF_MODE_DENSITY, rel=1e-15)
    assert decision.offending_coordinates == ()


def test_gate_value_averages_coordinates():
    # coordinate 0 at its mode, coordinate 1 one sigma out
    decision = gate(wv(0.0, 1.0), unit_stats(2), GateConfig())
    expected = (0.3989422804014327 / 2 + 0.24197072451914337 / 2) / 2
    assert decision.accepted
    assert decision.g_value == pytest.approx(expected, rel=1e-14)


def test_gate_boundary_value_rejected():
    # exactly mean + width*std must fall outside the open window
    decision = gate(wv(2.0), unit_stats(1), GateConfig(width=2.0))
    assert not decision.accepted
    assert decision.g_value == 0.0
    assert decision.offending_coordinates == (0,)


def test_gate_just_inside_boundary_accepted():
    decision = gate(wv(2.0 - 1e-9), unit_stats(1), GateConfig(width=2.0))
    assert decision.accepted
    assert decision.g_value > 0.0


def test_gate_one_bad_coordinate_fails_whole_update():
    decision = gate(wv(0.0, 5.0, 0.0), unit_stats(3), GateConfig())
    assert not decision.accepted
    assert decision.offending_coordinates == (1,)


def test_gate_zero_spread_requires_exact_match():
    stats = ServerStats(mean=np.array([5.0]), std=np.array([0.0]), n_observed=3)
    hit = gate(wv(5.0), stats, GateConfig())
    assert hit.accepted and hit.g_value == 0.5
    miss = gate(wv(5.0 + 1e-12), stats, GateConfig())
    assert not miss.accepted and miss.offending_coordinates == (0,)


def test_gate_zero_spread_mixes_into_average():
    stats = ServerStats(mean=np.array([0.0, 5.0]), std=np.array([1.0, 0.0]), n_observed=3)
    decision = gate(wv(0.0, 5.0), stats, GateConfig())
    assert decision.accepted
    assert decision.g_value == pytest.approx((HALF_MODE_DENSITY + 0.5) / 2, rel=1e-14)


@pytest.mark.parametrize("mode", ["passthrough", "disabled"])
def test_gate_bypass_modes(mode):
    decision = gate(wv(1e9), unit_stats(1), GateConfig(mode=mode))
    assert decision is PASSTHROUGH_DECISION
    assert decision.accepted and decision.g_value == 0.5


def test_gate_dimension_mismatch():
    with pytest.raises(DataError):
        gate(wv(0.0, 0.0), unit_stats(1), GateConfig())


def test_gate_wider_window_admits_more():
    update = wv(2.5)
    assert not gate(update, unit_stats(1), GateConfig(width=2.0)).accepted
    assert gate(update, unit_stats(1), GateConfig(width=3.0)).accepted


@settings(max_examples=200)
@given(
    st.lists(st.floats(-10, 10), min_size=1, max_size=4),
    st.floats(0.5, 4.0),
)
def test_gate_acceptance_monotone_in_width(coords, width):
    update = WeightVector.from_array(np.array(coords + [0.0]))
    stats = unit_stats(len(coords) + 1)
    narrow = gate(update, stats, GateConfig(width=width))
    wide = gate(update, stats, GateConfig(width=width * 1.5))
    if narrow.accepted:
        assert wide.accepted


@settings(max_examples=200)
@given(
    st.lists(st.floats(-10, 10), min_size=2, max_size=4),
    st.floats(1e-2, 1e2),
)
def test_gate_value_bounded_by_half_mode_density(coords, std):
    stats = ServerStats(
        mean=np.zeros(len(coords)), std=np.full(len(coords), std), n_observed=4
    )
    decision = gate(WeightVector.from_array(np.array(coords)), stats, GateConfig())
    bound = 1.0 / (2.0 * std * math.sqrt(2.0 * math.pi))
    assert 0.0 <= decision.g_value <= bound * (1 + 1e-12)
    if not decision.accepted:
        assert decision.g_value == 0.0


# ------------------------------------------------------------ telemetry


def test_record_decision_counters():
    t = KernelTelemetry()
    t = record_decision(t, GateDecision(accepted=False, g_value=0.0))
    assert (t.total_seen, t.total_rejected, t.n0) == (1, 1, 1.0)
    t = record_decision(t, GateDecision(accepted=True, g_value=0.3))
    assert (t.total_seen, t.total_rejected, t.n0) == (2, 1, 0.5)


@given(st.lists(st.booleans(), min_size=1, max_size=60))
def test_n0_stays_in_unit_interval(accepts):
    t = KernelTelemetry()
    for a in accepts:
        t = record_decision(t, GateDecision(accepted=a, g_value=0.1 if a else 0.0))
    assert 0.0 <= t.n0 <= 1.0
    assert t.n0 == t.total_rejected / t.total_seen
    assert t.total_seen == len(accepts)


# ------------------------------------------------------------- kurtosis


def test_kurtosis_one_to_five_oracle():
    raw, excess = kurtosis([1.0, 2.0, 3.0, 4.0, 5.0])
    assert excess == pytest.approx(-1.2, rel=1e-12)
    assert raw == pytest.approx(1.8, rel=1e-12)


def test_kurtosis_spike_oracle():
    # nine zeros and one spike work out to excess exactly 10
    raw, excess = kurtosis([0.0] * 9 + [100.0])
    assert excess == pytest.approx(10.0, rel=1e-12)
    assert raw == pytest.approx(13.0, rel=1e-12)
    assert classify_tailedness(raw) == LEPTOKURTIC


def test_kurtosis_standard_normal_sample():
    x = np.random.default_rng(123).standard_normal(100_000)
    raw, _ = kurtosis(x)
    assert raw == pytest.approx(3.0, abs=0.1)


def test_kurtosis_matches_scipy_when_available():
    scipy_stats = pytest.importorskip("scipy.stats")
    x = np.random.default_rng(5).normal(2.0, 3.0, 500)
    _, excess = kurtosis(x)
    ref = scipy_stats.kurtosis(x, fisher=True, bias=False)
    assert excess == pytest.approx(ref, rel=1e-10)


def test_kurtosis_needs_four_samples():
    with pytest.raises(DataError):
        kurtosis([1.0, 2.0, 3.0])


def test_kurtosis_zero_variance():
    with pytest.raises(DegenerateScaleError):
        kurtosis([2.0, 2.0, 2.0, 2.0])


def test_classify_tailedness_table():
    assert classify_tailedness(3.0) == MESOKURTIC
    assert classify_tailedness(3.0 + 1e-10) == MESOKURTIC
    assert classify_tailedness(3.0 + 1e-8) == LEPTOKURTIC
    assert classify_tailedness(4.5) == LEPTOKURTIC
    assert classify_tailedness(1.8) == PLATYKURTIC


# --------------------------------------------------------- kernel_report


def test_report_with_too_few_samples_leaves_fields_unset():
    t = KernelTelemetry(total_seen=5, total_rejected=1, n0=0.2)
    out = kernel_report(t, [0.1, 0.2])
    assert out.kurtosis_raw is None
    assert out.tail_class is None
    assert out.ratio_raw_to_3n0 is None
    assert out.total_seen == 5 and out.n0 == 0.2


def test_report_zero_variance_leaves_fields_unset():
    t = KernelTelemetry(total_seen=4, total_rejected=0, n0=0.0)
    out = kernel_report(t, [1.0, 1.0, 1.0, 1.0])
    assert out.kurtosis_raw is None


def test_report_fills_diagnostics_and_ratio():
    t = KernelTelemetry(total_seen=10, total_rejected=5, n0=0.5)
    out = kernel_report(t, [1.0, 2.0, 3.0, 4.0, 5.0])
    assert out.kurtosis_raw == pytest.approx(1.8, rel=1e-12)
    assert out.kurtosis_excess == pytest.approx(-1.2, rel=1e-12)
    assert out.tail_class == PLATYKURTIC
    assert out.ratio_raw_to_3n0 == pytest.approx(1.8 / 1.5, rel=1e-12)


def test_report_ratio_undefined_without_rejections():
    t = KernelTelemetry(total_seen=10, total_rejected=0, n0=0.0)
    out = kernel_report(t, [1.0, 2.0, 3.0, 4.0, 5.0])
    assert out.kurtosis_raw is not None
    assert out.ratio_raw_to_3n0 is None
