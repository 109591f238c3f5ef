"""Metric oracles: the synthetic two-task lifetime, curve ops, RP/SE."""

from __future__ import annotations

import pytest

from gridcl.eventlog import EpisodeRecord
from gridcl.metrics import (
    STEStore,
    aggregate_reports,
    build_performance_table,
    compute_bt,
    compute_ft,
    compute_lifetime_metrics,
    compute_mep,
    compute_mtp,
    compute_pm,
    compute_rp,
    compute_se,
    report_to_csv,
    saturation,
    smooth_curve,
)
from gridcl.prng import Pcg32


def _rec(block, block_type, task, reward, episode_id, variant="v0"):
    return EpisodeRecord(
        block_num=block,
        block_type=block_type,
        task_name=task,
        variant_name=variant,
        episode_id=episode_id,
        steps=5,
        reward=reward,
        truncated=False,
        env_seed=0,
    )


def _fixture_records():
    """Tasks A and B over blocks [E0, LB(A), E1, LB(B), E2].

    Eval performance: A = (0.0, 0.8, 0.6), B = (0.1, 0.3, 0.9).
    Training rewards: A = (0.2, 0.4), B = (0.5, 0.7).
    """
    rows = [
        (0, "eval", "A", 0.0),
        (0, "eval", "B", 0.1),
        (1, "learn", "A", 0.2),
        (1, "learn", "A", 0.4),
        (2, "eval", "A", 0.8),
        (2, "eval", "B", 0.3),
        (3, "learn", "B", 0.5),
        (3, "learn", "B", 0.7),
        (4, "eval", "A", 0.6),
        (4, "eval", "B", 0.9),
    ]
    return [_rec(b, bt, t, r, episode_id=i) for i, (b, bt, t, r) in enumerate(rows)]


@pytest.fixture
def table():
    return build_performance_table(_fixture_records())


# -- fixture oracles (hand-computed, exact) --------------------------------


def test_fixture_pm_is_minus_point_two(table):
    result = compute_pm(table)
    # Only qualifying term: A at E2 against its reference E1. Bit-exact
    # equality with the same arithmetic; -0.2 is the mathematical value.
    assert result.value == 0.6 - 0.8
    assert result.breakdown == {"A": 0.6 - 0.8}
    assert result.value == pytest.approx(-0.2)


def test_fixture_mep_is_point_45(table):
    result = compute_mep(table)
    assert result.value == pytest.approx(0.45)
    assert result.breakdown["A"] == pytest.approx((0.0 + 0.8 + 0.6) / 3)
    assert result.breakdown["B"] == pytest.approx((0.1 + 0.3 + 0.9) / 3)


def test_fixture_ft_is_point_two(table):
    result = compute_ft(table)
    # A trained before B; around LB(A): P(B, E1) - P(B, E0) = 0.3 - 0.1.
    assert result.value == pytest.approx(0.2)
    assert set(result.breakdown) == {"A->B"}


def test_fixture_bt_is_minus_point_two(table):
    result = compute_bt(table)
    # Across LB(B): P(A, E2) - P(A, E1) = 0.6 - 0.8.
    assert result.value == pytest.approx(-0.2)
    assert set(result.breakdown) == {"B->A"}


def test_fixture_mtp(table):
    result = compute_mtp(table)
    assert result.value == pytest.approx((0.3 + 0.6) / 2)
    assert result.breakdown == {"A": pytest.approx(0.3), "B": pytest.approx(0.6)}


def test_constant_eval_performance_gives_zero_pm():
    rows = []
    eid = 0
    for block, bt, task in [
        (0, "eval", None),
        (1, "learn", "A"),
        (2, "eval", None),
        (3, "learn", "B"),
        (4, "eval", None),
        (5, "learn", "A"),
        (6, "eval", None),
    ]:
        if bt == "eval":
            for t in ("A", "B"):
                rows.append(_rec(block, "eval", t, 0.4, eid))
                eid += 1
        else:
            rows.append(_rec(block, "learn", task, 0.1, eid))
            eid += 1
    result = compute_pm(build_performance_table(rows))
    assert result.value == 0.0


def test_single_eval_block_gives_absent_pm():
    rows = [_rec(0, "eval", "A", 0.5, 0), _rec(1, "learn", "A", 0.5, 1), _rec(2, "eval", "A", 0.5, 2)]
    # E2 is A's own reference, so no (task, eval) pair qualifies.
    assert compute_pm(build_performance_table(rows)).value is None


def test_single_task_has_no_transfer_metrics(table):
    rows = [_rec(0, "eval", "A", 0.5, 0), _rec(1, "learn", "A", 0.5, 1), _rec(2, "eval", "A", 0.5, 2)]
    single = build_performance_table(rows)
    assert compute_ft(single).value is None
    assert compute_bt(single).value is None


def test_variants_average_with_equal_weight():
    # Variant v0 has two episodes (0.0, 1.0), v1 has one (0.4):
    # task performance is mean(mean(v0), mean(v1)) = mean(0.5, 0.4).
    rows = [
        _rec(0, "eval", "A", 0.0, 0, variant="v0"),
        _rec(0, "eval", "A", 1.0, 1, variant="v0"),
        _rec(0, "eval", "A", 0.4, 2, variant="v1"),
    ]
    table = build_performance_table(rows)
    assert table.eval_perf[("A", 0)] == pytest.approx(0.45)


# -- curve operations ------------------------------------------------------


def test_smooth_constant_curve_is_identity():
    assert smooth_curve([3.0] * 20) == [3.0] * 20


def test_smooth_trailing_window():
    values = [0.0, 1.0, 2.0, 3.0]
    assert smooth_curve(values, window=2) == [0.0, 0.5, 1.5, 2.5]
    # Window larger than the curve degrades to the running mean.
    assert smooth_curve([1.0, 3.0], window=10) == [1.0, 2.0]


def test_saturation_constant_positive():
    sat, exp = saturation([0.7] * 8)
    assert sat == 0.7 and exp == 1


def test_saturation_step_at_end():
    values = [0.0] * 49 + [1.0]
    sat, exp = saturation(values)  # window-1 smoothing = raw values
    assert sat == 1.0 and exp == 50


def test_saturation_linear_ramp_hits_95():
    values = [(k + 1) / 100 for k in range(100)]
    sat, exp = saturation(values)
    assert sat == 1.0
    # Independent scan for the first value at or above 0.95 * max.
    expected = next(i + 1 for i, v in enumerate(values) if v >= 0.95 * max(values))
    assert exp == expected == 95


def test_saturation_nonpositive_curve_uses_argmax():
    sat, exp = saturation([-1.0, -0.5, -2.0])
    assert sat == -0.5 and exp == 2


# -- RP / SE ---------------------------------------------------------------


def _single_task_records(curve, task="A"):
    return [_rec(0, "learn", task, r, i) for i, r in enumerate(curve)]


def test_rp_and_se_are_one_for_identical_logs():
    curve = [0.1, 0.5, 0.3, 0.9, 0.7, 0.8]
    table = build_performance_table(_single_task_records(curve))
    ste = STEStore(curves={"A": list(curve)})
    assert compute_rp(table, ste).value == 1.0
    assert compute_se(table, ste).value == 1.0


def test_rp_doubles_with_doubled_curve():
    curve = [0.2, 0.4, 0.6, 0.8]
    table = build_performance_table(_single_task_records([2 * v for v in curve]))
    ste = STEStore(curves={"A": list(curve)})
    assert compute_rp(table, ste).value == pytest.approx(2.0)


def test_rp_aligns_on_shared_experience():
    # Lifetime curve longer than STE: only the first len(STE) episodes count.
    table = build_performance_table(_single_task_records([1.0] * 10))
    ste = STEStore(curves={"A": [1.0] * 4})
    assert compute_rp(table, ste).value == pytest.approx(1.0)


def test_missing_ste_task_is_skipped_with_note():
    records = _single_task_records([0.5, 0.5, 0.5], task="A") + [
        _rec(1, "learn", "B", 0.25, 100 + i) for i in range(3)
    ]
    table = build_performance_table(records)
    ste = STEStore(curves={"A": [0.5, 0.5, 0.5]})
    result = compute_rp(table, ste)
    assert result.value == 1.0
    assert result.breakdown == {"A": 1.0}
    assert any("no STE log for task B" in n for n in result.notes)


def test_zero_ste_auc_is_skipped_with_note():
    table = build_performance_table(_single_task_records([0.5, 0.5]))
    ste = STEStore(curves={"A": [0.0, 0.0]})
    result = compute_rp(table, ste)
    assert result.value is None
    assert any("STE AUC is zero" in n for n in result.notes)


# -- reports ---------------------------------------------------------------


def _lifetime_report(pm_value):
    records = _fixture_records()
    report = compute_lifetime_metrics(records)
    report["pm"].value = pm_value  # simulate differing lifetimes
    return report


def test_aggregate_mean_and_sample_std():
    reports = [_lifetime_report(-0.2), _lifetime_report(-0.4)]
    aggregate = aggregate_reports(reports)
    assert aggregate["pm"].mean == pytest.approx(-0.3)
    assert aggregate["pm"].std == pytest.approx(0.14142135623730953)
    assert aggregate["pm"].count == 2


def test_aggregate_single_lifetime_has_no_std():
    aggregate = aggregate_reports([_lifetime_report(-0.2)])
    assert aggregate["pm"].mean == -0.2
    assert aggregate["pm"].std is None


def test_metric_absent_everywhere_stays_absent():
    reports = [compute_lifetime_metrics(_fixture_records())]  # no STE store
    aggregate = aggregate_reports(reports)
    assert aggregate["rp"].mean is None and aggregate["rp"].count == 0


def test_csv_has_lifetime_rows_plus_aggregate():
    reports = [compute_lifetime_metrics(_fixture_records()) for _ in range(2)]
    csv_text = report_to_csv(reports)
    lines = csv_text.strip().split("\n")
    assert lines[0] == "lifetime,pm,mtp,mep,ft,bt,rp,se"
    assert len(lines) == 4  # header, 2 lifetimes, aggregate mean
    assert lines[-1].startswith("mean,")
    assert lines[1].split(",")[1] == repr(0.6 - 0.8)  # shortest round-trip form


# -- properties ------------------------------------------------------------


def _random_records(seed):
    """Randomized interleaved lifetime over three tasks."""
    rng = Pcg32(seed)
    tasks = ["A", "B", "C"]
    order = list(tasks)
    rng.shuffle(order)
    rows = []
    eid = 0
    block = 0

    def emit_eval():
        nonlocal eid, block
        for t in tasks:
            for _ in range(2):
                rows.append(_rec(block, "eval", t, rng.below(1000) / 1000.0, eid))
                eid += 1
        block += 1

    emit_eval()
    for t in order:
        for _ in range(3):
            rows.append(_rec(block, "learn", t, rng.below(1000) / 1000.0, eid))
            eid += 1
        block += 1
        emit_eval()
    return rows


def _shift(records, c):
    return [
        EpisodeRecord(r.block_num, r.block_type, r.task_name, r.variant_name, r.episode_id, r.steps, r.reward + c, r.truncated, r.env_seed)
        for r in records
    ]


def test_shift_equivariance_over_random_tables():
    c = 0.731
    for seed in range(20):
        base = build_performance_table(_random_records(seed))
        shifted = build_performance_table(_shift(_random_records(seed), c))
        assert compute_mtp(shifted).value == pytest.approx(compute_mtp(base).value + c, abs=1e-9)
        assert compute_mep(shifted).value == pytest.approx(compute_mep(base).value + c, abs=1e-9)
        for fn in (compute_pm, compute_ft, compute_bt):
            a, b = fn(base).value, fn(shifted).value
            assert (a is None) == (b is None)
            if a is not None:
                assert b == pytest.approx(a, abs=1e-9)


def test_metrics_are_pure_functions_of_records():
    records = _random_records(99)
    first = compute_lifetime_metrics(records)
    second = compute_lifetime_metrics(records)
    assert {k: v.value for k, v in first.items()} == {k: v.value for k, v in second.items()}
