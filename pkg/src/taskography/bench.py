"""Benchmark harness: build problem suites, run prune/plan pipelines, aggregate, export.

Wall time per record covers pruning, grounding, search and replaying the
plan on the full problem.  Problem generation is excluded.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import multiprocessing as mp
import os
import statistics
import time
import traceback
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

from .domain import DomainSpec, ProblemInstance, build_domain, problem_from_json, problem_to_json, \
    sample_problem, simulate
from .ground import ground
from .planner import ALGORITHMS, PlannerConfig, Status, solve
from .scenegraph import GeneratorParams, generate_synthetic
from .scrub import scrub

log = logging.getLogger(__name__)

PRUNERS = ("none", "scrub", "seek")
SPLIT_PARAMS = {
    "tiny": GeneratorParams(num_floors=1, rooms_per_floor=3, places_per_room=2, locations_per_place=2,
                            num_items=8, num_receptacles=6),
    "medium": GeneratorParams(),
}
SUMMARY_COLUMNS = ("pipeline", "domain", "split", "succ", "len_mean", "len_std", "time_mean", "time_std",
                   "fail", "replan_mean", "used_mean")
# seconds the watchdog waits past a task's own timeout before killing it
WATCHDOG_GRACE = 0.3


@dataclass(frozen=True)
class Pipeline:
    pruner: str = "none"
    planner: str = "gbfs_hff"
    timeout: float = 30.0
    model: str | None = None  # scorer JSON path, or "random" for a seeded random scorer
    closure: bool = True
    t0: float = 0.9
    gamma: float = 0.9
    t_min: float = 0.01
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "planner", self.planner.replace("-", "_"))
        if self.pruner not in PRUNERS:
            raise ValueError(f"unknown pruner {self.pruner!r}; choose from {PRUNERS}")
        if self.planner not in ALGORITHMS:
            raise ValueError(f"unknown planner {self.planner!r}; choose from {ALGORITHMS}")
        if self.pruner == "seek" and not self.model:
            raise ValueError("seek pipelines need a scorer model")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    @property
    def id(self) -> str:
        if self.name:
            return self.name
        if self.pruner != "seek":
            return f"{self.pruner}+{self.planner}"
        tag = Path(self.model).stem + ("" if self.closure else ",noclosure")
        return f"seek[{tag}]+{self.planner}"

    @classmethod
    def parse(cls, text: str, timeout: float = 30.0) -> Pipeline:
        """``pruner:planner[:model]``, e.g. ``scrub:gbfs-hff`` or ``seek:gbfs-hff:model.json``."""
        parts = text.split(":")
        if len(parts) < 2:
            raise ValueError(f"pipeline {text!r} must look like pruner:planner[:model]")
        return cls(parts[0], parts[1], timeout, parts[2] if len(parts) > 2 else None)


@dataclass
class SuiteConfig:
    family: str
    k: int = 1
    n: int | None = None
    splits: dict[str, int] = field(default_factory=lambda: {"tiny": 55, "medium": 182})
    scenes: dict[str, GeneratorParams] = field(default_factory=lambda: dict(SPLIT_PARAMS))
    train: int = 40
    pipelines: list[Pipeline] = field(default_factory=lambda: [Pipeline()])
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    base_seed: int = 0
    verify: bool = True

    def validate(self) -> None:
        build_domain(self.family, self.k, self.n)
        if self.train < 1 or any(c < 1 for c in self.splits.values()):
            raise ValueError("instance counts must be >= 1")
        for split in self.splits:
            if split not in self.scenes:
                raise ValueError(f"no scene parameters for split {split!r}")
        if not self.pipelines or not self.seeds:
            raise ValueError("need at least one pipeline and one seed")

    @property
    def domain(self) -> DomainSpec:
        return build_domain(self.family, self.k, self.n)


@dataclass
class BenchmarkRecord:
    instance: str
    split: str
    domain: str
    pipeline: str
    seed: int
    status: str
    length: int | None = None
    wall_time: float = 0.0
    replan_count: int = 0
    used_fraction: float | None = None
    operators_before: int | None = None
    operators_after: int | None = None
    state_vars_before: int | None = None
    state_vars_after: int | None = None
    validated: bool = False
    error: str = ""

    @property
    def solved(self) -> bool:
        return self.status == Status.SOLVED.value


# ---------------------------------------------------------------------------
# Suite construction


def _instance_seed(base: int, split: str, index: int) -> int:
    digest = hashlib.sha256(f"{base}/{split}/{index}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def build_instances(domain: DomainSpec, params: GeneratorParams, count: int, base_seed: int,
                    split: str, verify: bool = True) -> list[ProblemInstance]:
    """``count`` problems, each on its own generated scene, reproducible from the seeds."""
    cache = os.environ.get("TASKOGRAPHY_CACHE")
    key = hashlib.sha256(json.dumps([domain.name, params.to_dict(), count, base_seed, split, verify],
                                    sort_keys=True).encode()).hexdigest()[:16]
    path = Path(cache) / f"{domain.name}-{split}-{key}.jsonl" if cache else None
    if path is not None and path.exists():
        with open(path) as fh:
            return [problem_from_json(line) for line in fh if line.strip()]
    out = []
    for i in range(count):
        seed = _instance_seed(base_seed, split, i)
        scene = generate_synthetic(replace(params, seed=seed))
        inst = sample_problem(scene, domain, seed, verify=verify)
        out.append(replace(inst, name=f"{domain.name}-{split}-{i:03d}"))
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            for inst in out:
                fh.write(json.dumps(json.loads(problem_to_json(inst))) + "\n")
    return out


def build_suite(config: SuiteConfig) -> dict[str, list[ProblemInstance]]:
    config.validate()
    return {split: build_instances(config.domain, config.scenes[split], count, config.base_seed, split,
                                   config.verify)
            for split, count in config.splits.items()}


def build_training_set(config: SuiteConfig, split: str = "tiny") -> list[ProblemInstance]:
    return build_instances(config.domain, config.scenes[split], config.train, config.base_seed + 1,
                           f"train-{split}", config.verify)


# ---------------------------------------------------------------------------
# Running one task


def run_pipeline(inst: ProblemInstance, pipeline: Pipeline, seed: int = 0, split: str = "",
                 count_full: bool = False) -> BenchmarkRecord:
    rec = BenchmarkRecord(inst.name, split, inst.domain.name, pipeline.id, seed, Status.UNSOLVABLE.value)
    start = time.perf_counter()
    try:
        planner = PlannerConfig(pipeline.planner, timeout=pipeline.timeout, seed=seed)
        if pipeline.pruner == "seek":
            from .seek import RandomScorer, SeekConfig, incremental_plan, load_model

            scorer = RandomScorer(seed) if pipeline.model == "random" else load_model(pipeline.model)
            trace = incremental_plan(inst, scorer, planner, SeekConfig(
                pipeline.t0, pipeline.gamma, pipeline.t_min, per_attempt_timeout=pipeline.timeout,
                global_timeout=pipeline.timeout, closure=pipeline.closure))
            rec.replan_count = trace.replan_count
            rec.used_fraction = trace.used_fraction
            plan, status = trace.plan, trace.status
        else:
            reduced = scrub(inst).instance if pipeline.pruner == "scrub" else inst
            sp = ground(reduced)
            rec.operators_after, rec.state_vars_after = len(sp.actions), len(sp.atoms)
            rec.used_fraction = len(reduced.objects) / max(1, len(inst.objects))
            remaining = pipeline.timeout - (time.perf_counter() - start)
            if remaining <= 0:
                plan, status = None, Status.TIMEOUT.value
            else:
                plan = solve(sp, replace(planner, timeout=remaining))
                status = plan.status.value
        if status == Status.SOLVED.value:
            sim = simulate(inst, plan.steps())
            if not sim.ok:
                raise RuntimeError(f"plan fails on the full problem: {sim.reason}")
            rec.validated = True
            rec.length = len(plan.actions)
        rec.status = status
    except Exception as exc:  # recorded, never raised: one failure must not abort a suite
        rec.status = "error"
        rec.error = f"{type(exc).__name__}: {exc}"
        log.debug("pipeline %s on %s failed\n%s", pipeline.id, inst.name, traceback.format_exc())
    rec.wall_time = time.perf_counter() - start
    if count_full or pipeline.pruner == "none":
        if pipeline.pruner == "none" and rec.operators_after is not None:
            rec.operators_before, rec.state_vars_before = rec.operators_after, rec.state_vars_after
        elif count_full:
            full = ground(inst)
            rec.operators_before, rec.state_vars_before = len(full.actions), len(full.atoms)
    return rec


def _child(conn, inst_json: str, pipeline: Pipeline, seed: int, split: str, count_full: bool) -> None:
    try:
        rec = run_pipeline(problem_from_json(inst_json), pipeline, seed, split, count_full)
        conn.send(asdict(rec))
    finally:
        conn.close()


@dataclass
class _Running:
    proc: mp.Process
    conn: object
    started: float
    task: tuple


def run_suite(
    config: SuiteConfig,
    out: str | os.PathLike | None = None,
    jobs: int = 1,
    isolate: bool = True,
    count_full: bool = False,
    instances: dict[str, list[ProblemInstance]] | None = None,
) -> list[BenchmarkRecord]:
    """Run every (instance, pipeline, seed) task; records are appended to ``out`` as JSON lines."""
    instances = instances if instances is not None else build_suite(config)
    tasks = [(split, inst, p, s) for split, insts in instances.items() for inst in insts
             for p in config.pipelines for s in config.seeds]
    records: list[BenchmarkRecord | None] = [None] * len(tasks)
    sink = open(out, "a") if out is not None else None

    def emit(i: int, rec: BenchmarkRecord) -> None:
        records[i] = rec
        if sink is not None:
            sink.write(json.dumps(asdict(rec)) + "\n")
            sink.flush()

    try:
        if not isolate:
            for i, (split, inst, p, s) in enumerate(tasks):
                emit(i, run_pipeline(inst, p, s, split, count_full))
        else:
            _run_isolated(tasks, max(1, jobs), count_full, emit)
    finally:
        if sink is not None:
            sink.close()
    return [r for r in records if r is not None]


def _run_isolated(tasks, jobs, count_full, emit) -> None:
    ctx = mp.get_context("fork" if "fork" in mp.get_all_start_methods() else "spawn")
    pending = list(enumerate(tasks))
    pending.reverse()
    running: list[tuple[int, _Running]] = []
    encoded: dict[str, str] = {}
    while pending or running:
        while pending and len(running) < jobs:
            i, task = pending.pop()
            split, inst, p, s = task
            if inst.name not in encoded:
                encoded[inst.name] = problem_to_json(inst)
            parent, child = ctx.Pipe(duplex=False)
            proc = ctx.Process(target=_child, args=(child, encoded[inst.name], p, s, split, count_full),
                               daemon=True)
            proc.start()
            child.close()
            running.append((i, _Running(proc, parent, time.perf_counter(), task)))
        still = []
        for i, r in running:
            split, inst, p, s = r.task
            elapsed = time.perf_counter() - r.started
            if r.conn.poll():
                try:
                    rec = BenchmarkRecord(**r.conn.recv())
                    r.proc.join()
                except EOFError:
                    r.proc.join()
                    rec = _failed(inst, p, s, split, "error",
                                  f"worker exited with code {r.proc.exitcode} without a result", elapsed)
                emit(i, rec)
            elif not r.proc.is_alive():
                r.proc.join()
                emit(i, _failed(inst, p, s, split, "error", f"worker exited with code {r.proc.exitcode}",
                                elapsed))
            elif elapsed > p.timeout + WATCHDOG_GRACE:
                r.proc.kill()
                r.proc.join()
                emit(i, _failed(inst, p, s, split, Status.TIMEOUT.value, "killed by watchdog",
                                time.perf_counter() - r.started))
            else:
                still.append((i, r))
        running = still
        if running:
            time.sleep(0.005)


def _failed(inst, p, seed, split, status, msg, elapsed) -> BenchmarkRecord:
    return BenchmarkRecord(inst.name, split, inst.domain.name, p.id, seed, status, wall_time=elapsed, error=msg)


def load_records(path) -> list[BenchmarkRecord]:
    with open(path) as fh:
        return [BenchmarkRecord(**json.loads(line)) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# Aggregation and export


@dataclass
class SummaryRow:
    pipeline: str
    domain: str
    split: str
    succ: float
    len_mean: float | None
    len_std: float | None
    time_mean: float | None
    time_std: float | None
    fail: float
    replan_mean: float | None
    used_mean: float | None
    fail_timeout: float = 0.0
    fail_error: float = 0.0
    count: int = 0


def _mean_std(xs: Sequence[float]) -> tuple[float | None, float | None]:
    if not xs:
        return None, None
    return statistics.fmean(xs), (statistics.stdev(xs) if len(xs) > 1 else 0.0)


def aggregate(records: Iterable[BenchmarkRecord]) -> list[SummaryRow]:
    """Per (pipeline, domain, split): success rate and means over solved records."""
    groups: dict[tuple[str, str, str], list[BenchmarkRecord]] = {}
    for r in records:
        groups.setdefault((r.pipeline, r.domain, r.split), []).append(r)
    if not groups:
        raise ValueError("nothing to aggregate")
    rows = []
    for (pipe, dom, split), rs in sorted(groups.items()):
        # sort so float sums do not depend on record order
        rs = sorted(rs, key=lambda r: (r.instance, r.seed, r.status, r.wall_time))
        solved = [r for r in rs if r.solved]
        n = len(rs)
        len_mean, len_std = _mean_std([float(r.length) for r in solved])
        time_mean, time_std = _mean_std([r.wall_time for r in solved])
        replan_mean, _ = _mean_std([float(r.replan_count) for r in rs])
        used_mean, _ = _mean_std([r.used_fraction for r in rs if r.used_fraction is not None])
        timeouts = sum(r.status == Status.TIMEOUT.value for r in rs)
        errors = sum(r.status == "error" for r in rs)
        rows.append(SummaryRow(pipe, dom, split, len(solved) / n, len_mean, len_std, time_mean, time_std,
                               1 - len(solved) / n, replan_mean, used_mean, timeouts / n, errors / n, n))
    return rows


def _cell(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def export_csv(summary: Sequence[SummaryRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for row in summary:
            w.writerow([_cell(getattr(row, c)) for c in SUMMARY_COLUMNS])


def export_json(summary: Sequence[SummaryRow], path) -> None:
    with open(path, "w") as fh:
        json.dump([asdict(r) for r in summary], fh, indent=1)


def load_summary_json(path) -> list[SummaryRow]:
    with open(path) as fh:
        return [SummaryRow(**d) for d in json.load(fh)]


LONG_METRICS = ("status", "length", "wall_time", "replan_count", "used_fraction",
                "operators_before", "operators_after", "state_vars_before", "state_vars_after")


def export_long_csv(records: Sequence[BenchmarkRecord], path) -> None:
    """One row per (record, metric); plot-ready."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("pipeline", "domain", "split", "instance", "seed", "metric", "value"))
        for r in records:
            for m in LONG_METRICS:
                w.writerow((r.pipeline, r.domain, r.split, r.instance, r.seed, m, _cell(getattr(r, m))))


def export(summary: Sequence[SummaryRow], path, fmt: str = "csv") -> None:
    if fmt == "csv":
        export_csv(summary, path)
    elif fmt == "json":
        export_json(summary, path)
    else:
        raise ValueError(f"unknown export format {fmt!r}")


def render_table(summary: Sequence[SummaryRow]) -> str:
    """Fixed-width text table; missing values print as '-'."""
    def fmt(v, digits=2):
        if v is None:
            return "-"
        return f"{v:.{digits}f}" if isinstance(v, float) else str(v)

    header = ("pipeline", "domain", "split", "%succ", "len", "time", "fail", "#replan", "%used")
    lines = [header]
    for r in summary:
        lines.append((r.pipeline, r.domain, r.split, fmt(100 * r.succ, 1), fmt(r.len_mean, 1),
                      fmt(r.time_mean), fmt(r.fail), fmt(r.replan_mean, 1),
                      fmt(None if r.used_mean is None else 100 * r.used_mean, 1)))
    widths = [max(len(str(l[i])) for l in lines) for i in range(len(header))]
    return "\n".join("  ".join(str(c).ljust(w) for c, w in zip(l, widths)) for l in lines)


SUMMARY_FIELDS = tuple(f.name for f in fields(SummaryRow))
