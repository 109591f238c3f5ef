"""The seven lifelong-learning metrics computed from episode logs.

A performance table is first built per lifetime: P(task, eval block) is
the mean episode reward of the task's variants in that block (variants
weighted equally), and each task gets its concatenated training curve.
PM/MTP/MEP/FT/BT need only the table; RP and SE also need a single-task
expert (STE) store. A metric term whose reference points are missing is
skipped and reported, never fabricated.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .eventlog import EpisodeRecord, LogReadError, lifetime_dirs, read_lifetime

METRIC_NAMES = ("pm", "mtp", "mep", "ft", "bt", "rp", "se")

SATURATION_THRESHOLD = 0.95
SMOOTHING_WINDOW = 10


@dataclass
class PerformanceTable:
    tasks: list[str]  # in order of first appearance
    eval_blocks: list[int]  # block_nums, ascending
    eval_perf: dict[tuple[str, int], float]  # (task, eval block_num) -> mean reward
    train_curves: dict[str, list[float]]  # task -> episode rewards in training order
    learn_blocks: dict[str, list[int]]  # task -> block_nums that trained it, ascending
    num_blocks: int


def build_performance_table(records: list[EpisodeRecord]) -> PerformanceTable:
    tasks: list[str] = []
    eval_blocks: list[int] = []
    by_variant: dict[tuple[str, int], dict[str, list[float]]] = {}
    train_curves: dict[str, list[float]] = {}
    learn_blocks: dict[str, list[int]] = {}

    for rec in records:
        if rec.task_name not in tasks:
            tasks.append(rec.task_name)
        if rec.block_type == "eval":
            if rec.block_num not in eval_blocks:
                eval_blocks.append(rec.block_num)
            cell = by_variant.setdefault((rec.task_name, rec.block_num), {})
            cell.setdefault(rec.variant_name, []).append(rec.reward)
        else:
            train_curves.setdefault(rec.task_name, []).append(rec.reward)
            blocks = learn_blocks.setdefault(rec.task_name, [])
            if not blocks or blocks[-1] != rec.block_num:
                blocks.append(rec.block_num)

    eval_blocks.sort()
    eval_perf = {}
    for (task, block_num), variants in by_variant.items():
        variant_means = [sum(r) / len(r) for r in variants.values()]
        eval_perf[(task, block_num)] = sum(variant_means) / len(variant_means)
    num_blocks = max((r.block_num for r in records), default=-1) + 1
    return PerformanceTable(tasks, eval_blocks, eval_perf, train_curves, learn_blocks, num_blocks)


@dataclass
class MetricResult:
    value: float | None
    breakdown: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"value": self.value, "breakdown": self.breakdown, "notes": self.notes}


def _eval_after(table: PerformanceTable, block_num: int) -> int | None:
    """Nearest evaluation block after the given block."""
    for e in table.eval_blocks:
        if e > block_num:
            return e
    return None


def _eval_before(table: PerformanceTable, block_num: int) -> int | None:
    """Nearest evaluation block before the given block."""
    result = None
    for e in table.eval_blocks:
        if e < block_num:
            result = e
    return result


def _mean_result(terms: dict[str, float], notes: list[str], missing_msg: str) -> MetricResult:
    if not terms:
        notes = notes + [missing_msg]
        return MetricResult(None, {}, notes)
    return MetricResult(sum(terms.values()) / len(terms), terms, notes)


def compute_pm(table: PerformanceTable) -> MetricResult:
    """Performance maintenance: drop in eval performance after later training.

    For each task and eval block strictly after the task's post-training
    reference (the eval block immediately following its most recent
    learning block), the term is P(t, E) - P(t, ref). Negative means
    forgetting.
    """
    notes: list[str] = []
    per_task: dict[str, list[float]] = {}
    all_terms: list[float] = []
    for task in table.tasks:
        lbs = table.learn_blocks.get(task, [])
        if not lbs:
            continue
        for e in table.eval_blocks:
            prior = [b for b in lbs if b < e]
            if not prior:
                continue
            ref = _eval_after(table, prior[-1])
            if ref is None or e <= ref:
                continue
            p_e = table.eval_perf.get((task, e))
            p_ref = table.eval_perf.get((task, ref))
            if p_e is None or p_ref is None:
                notes.append(f"pm: missing eval performance for {task} at block {e if p_e is None else ref}")
                continue
            term = p_e - p_ref
            per_task.setdefault(task, []).append(term)
            all_terms.append(term)
    if not all_terms:
        return MetricResult(None, {}, notes + ["pm: no eval block after a post-training reference"])
    breakdown = {t: sum(v) / len(v) for t, v in per_task.items()}
    return MetricResult(sum(all_terms) / len(all_terms), breakdown, notes)


def compute_mtp(table: PerformanceTable) -> MetricResult:
    """Mean training performance: per-task mean episode reward, averaged over tasks."""
    terms = {t: sum(c) / len(c) for t, c in table.train_curves.items() if c}
    return _mean_result(terms, [], "mtp: no training episodes")


def compute_mep(table: PerformanceTable) -> MetricResult:
    """Mean evaluation performance: per-task mean of P(t, E) over eval blocks."""
    terms = {}
    for task in table.tasks:
        values = [table.eval_perf[(task, e)] for e in table.eval_blocks if (task, e) in table.eval_perf]
        if values:
            terms[task] = sum(values) / len(values)
    return _mean_result(terms, [], "mep: no evaluation episodes")


def _first_learn_blocks(table: PerformanceTable) -> list[tuple[str, int]]:
    firsts = [(task, blocks[0]) for task, blocks in table.learn_blocks.items() if blocks]
    firsts.sort(key=lambda item: item[1])
    return firsts


def compute_ft(table: PerformanceTable) -> MetricResult:
    """Forward transfer (jumpstart): change in a later task's eval performance
    across an earlier task's first learning block, before the later task
    is ever trained."""
    notes: list[str] = []
    terms: dict[str, float] = {}
    firsts = _first_learn_blocks(table)
    for i, (task_a, lb_a) in enumerate(firsts):
        for task_b, lb_b in firsts[i + 1 :]:
            if lb_a >= lb_b:
                continue
            after = _eval_after(table, lb_a)
            before = _eval_before(table, lb_a)
            if after is None or before is None or after >= lb_b:
                continue
            p_after = table.eval_perf.get((task_b, after))
            p_before = table.eval_perf.get((task_b, before))
            if p_after is None or p_before is None:
                notes.append(f"ft: missing eval performance for {task_b} around block {lb_a}")
                continue
            terms[f"{task_a}->{task_b}"] = p_after - p_before
    return _mean_result(terms, notes, "ft: no valid task pairs")


def compute_bt(table: PerformanceTable) -> MetricResult:
    """Backward transfer (jumpstart): change in an earlier task's eval
    performance across a later task's learning block, one term per
    (pair, learning-block occurrence)."""
    notes: list[str] = []
    pair_terms: dict[str, list[float]] = {}
    all_terms: list[float] = []
    firsts = dict(_first_learn_blocks(table))
    for task_a, first_a in firsts.items():
        for task_b, first_b in firsts.items():
            if task_a == task_b or first_a >= first_b:
                continue
            for lb_b in table.learn_blocks[task_b]:
                prior_a = [b for b in table.learn_blocks[task_a] if b < lb_b]
                if not prior_a:
                    continue
                after = _eval_after(table, lb_b)
                ref = _eval_after(table, prior_a[-1])
                if after is None or ref is None or ref == after:
                    continue
                p_after = table.eval_perf.get((task_a, after))
                p_ref = table.eval_perf.get((task_a, ref))
                if p_after is None or p_ref is None:
                    notes.append(f"bt: missing eval performance for {task_a} around block {lb_b}")
                    continue
                term = p_after - p_ref
                pair_terms.setdefault(f"{task_b}->{task_a}", []).append(term)
                all_terms.append(term)
    if not all_terms:
        return MetricResult(None, {}, notes + ["bt: no valid task pairs"])
    breakdown = {pair: sum(v) / len(v) for pair, v in pair_terms.items()}
    return MetricResult(sum(all_terms) / len(all_terms), breakdown, notes)


def smooth_curve(values: list[float], window: int = SMOOTHING_WINDOW) -> list[float]:
    """Trailing flat-window mean; early points average what is available."""
    if not values:
        return []
    window = min(window, len(values))
    smoothed = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        smoothed.append(acc / min(i + 1, window))
    return smoothed


def saturation(values: list[float]) -> tuple[float, int]:
    """(saturation value, 1-based experience to reach it) of a curve.

    The saturation value is the curve's maximum; experience-to-saturation
    is the first index at or above 95% of it (at the maximum itself when
    that is not positive).
    """
    if not values:
        raise ValueError("saturation of an empty curve")
    sat = max(values)
    if sat > 0:
        cutoff = SATURATION_THRESHOLD * sat
        for i, v in enumerate(values):
            if v >= cutoff:
                return sat, i + 1
    return sat, values.index(sat) + 1


def _trapezoid_auc(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return sum((values[i] + values[i + 1]) / 2.0 for i in range(len(values) - 1))


class STEStoreError(ValueError):
    pass


@dataclass
class STEStore:
    """Single-task-expert training curves, one per task."""

    curves: dict[str, list[float]]

    @classmethod
    def load(cls, ste_root: str | Path) -> "STEStore":
        """Read a store directory: one run directory per task, named by task."""
        ste_root = Path(ste_root)
        if not ste_root.is_dir():
            raise STEStoreError(f"STE store {ste_root} is not a directory")
        curves: dict[str, list[float]] = {}
        for entry in sorted(ste_root.iterdir()):
            if not entry.is_dir():
                continue
            task = entry.name
            per_lifetime: list[list[float]] = []
            for ldir in lifetime_dirs(entry):
                _, records = read_lifetime(ldir)
                tasks_seen = {r.task_name for r in records if r.block_type == "learn"}
                if tasks_seen - {task}:
                    raise STEStoreError(f"{ldir}: STE log for {task!r} contains other tasks {sorted(tasks_seen - {task})}")
                curve = [r.reward for r in records if r.block_type == "learn"]
                if curve:
                    per_lifetime.append(curve)
            if not per_lifetime:
                continue
            n = min(len(c) for c in per_lifetime)
            curves[task] = [sum(c[i] for c in per_lifetime) / len(per_lifetime) for i in range(n)]
        return cls(curves)


def compute_rp(table: PerformanceTable, ste: STEStore) -> MetricResult:
    """Relative performance: per-task AUC ratio of the lifetime training
    curve to the STE curve over the same amount of training experience."""
    notes: list[str] = []
    terms: dict[str, float] = {}
    for task, curve in table.train_curves.items():
        ste_curve = ste.curves.get(task)
        if ste_curve is None:
            notes.append(f"rp: no STE log for task {task}")
            continue
        n = min(len(curve), len(ste_curve))
        ste_auc = _trapezoid_auc(ste_curve[:n])
        if ste_auc == 0.0:
            notes.append(f"rp: STE AUC is zero for task {task}")
            continue
        terms[task] = _trapezoid_auc(curve[:n]) / ste_auc
    return _mean_result(terms, notes, "rp: no comparable tasks")


def compute_se(table: PerformanceTable, ste: STEStore) -> MetricResult:
    """Sample efficiency: (saturation ratio) x (inverse experience ratio)
    of the smoothed lifetime curve against the smoothed STE curve."""
    notes: list[str] = []
    terms: dict[str, float] = {}
    for task, curve in table.train_curves.items():
        ste_curve = ste.curves.get(task)
        if ste_curve is None:
            notes.append(f"se: no STE log for task {task}")
            continue
        if not curve or not ste_curve:
            notes.append(f"se: empty curve for task {task}")
            continue
        sat_ll, exp_ll = saturation(smooth_curve(curve))
        sat_ste, exp_ste = saturation(smooth_curve(ste_curve))
        if sat_ste == 0.0 or exp_ll == 0:
            notes.append(f"se: degenerate saturation for task {task}")
            continue
        terms[task] = (sat_ll / sat_ste) * (exp_ste / exp_ll)
    return _mean_result(terms, notes, "se: no comparable tasks")


def compute_lifetime_metrics(records: list[EpisodeRecord], ste: STEStore | None = None) -> dict[str, MetricResult]:
    table = build_performance_table(records)
    results = {
        "pm": compute_pm(table),
        "mtp": compute_mtp(table),
        "mep": compute_mep(table),
        "ft": compute_ft(table),
        "bt": compute_bt(table),
    }
    if ste is None:
        note = "no STE store provided"
        results["rp"] = MetricResult(None, {}, [f"rp: {note}"])
        results["se"] = MetricResult(None, {}, [f"se: {note}"])
    else:
        results["rp"] = compute_rp(table, ste)
        results["se"] = compute_se(table, ste)
    return results


@dataclass
class AggregateValue:
    mean: float | None
    std: float | None
    count: int

    def to_json(self) -> dict:
        return {"mean": self.mean, "std": self.std, "count": self.count}


def aggregate_reports(lifetime_reports: list[dict[str, MetricResult]]) -> dict[str, AggregateValue]:
    """Mean and sample standard deviation per metric across lifetimes."""
    if not lifetime_reports:
        raise ValueError("need at least one lifetime report")
    aggregate = {}
    for name in METRIC_NAMES:
        values = [r[name].value for r in lifetime_reports if r[name].value is not None]
        if not values:
            aggregate[name] = AggregateValue(None, None, 0)
        elif len(values) == 1:
            aggregate[name] = AggregateValue(values[0], None, 1)
        else:
            aggregate[name] = AggregateValue(sum(values) / len(values), statistics.stdev(values), len(values))
    return aggregate


def report_to_json(lifetime_reports: list[dict[str, MetricResult]]) -> dict:
    return {
        "lifetimes": [
            {"lifetime_index": i, "metrics": {name: result.to_json() for name, result in report.items()}}
            for i, report in enumerate(lifetime_reports)
        ],
        "aggregate": {name: value.to_json() for name, value in aggregate_reports(lifetime_reports).items()},
    }


def report_to_csv(lifetime_reports: list[dict[str, MetricResult]]) -> str:
    """One row per lifetime plus an aggregate mean row; blank = absent."""
    lines = ["lifetime," + ",".join(METRIC_NAMES)]

    def fmt(value: float | None) -> str:
        return "" if value is None else repr(value)

    for i, report in enumerate(lifetime_reports):
        lines.append(f"{i}," + ",".join(fmt(report[name].value) for name in METRIC_NAMES))
    aggregate = aggregate_reports(lifetime_reports)
    lines.append("mean," + ",".join(fmt(aggregate[name].mean) for name in METRIC_NAMES))
    return "\n".join(lines) + "\n"


def metrics_for_run(run_dir: str | Path, ste: STEStore | None = None) -> list[dict[str, MetricResult]]:
    """Compute per-lifetime metrics for every lifetime directory in a run."""
    dirs = lifetime_dirs(run_dir)
    if not dirs:
        raise LogReadError(f"{run_dir}: no lifetime directories")
    reports = []
    for ldir in dirs:
        _, records = read_lifetime(ldir)
        reports.append(compute_lifetime_metrics(records, ste))
    return reports


def write_report_files(out_dir: str | Path, lifetime_reports: list[dict[str, MetricResult]]) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    csv_path = out_dir / "report.csv"
    json_path.write_text(json.dumps(report_to_json(lifetime_reports), indent=2) + "\n", encoding="utf-8")
    csv_path.write_text(report_to_csv(lifetime_reports), encoding="utf-8")
    return json_path, csv_path
