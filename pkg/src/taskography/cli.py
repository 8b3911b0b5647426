"""Command-line entry point: ``taskography <verb> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .domain import DomainError, build_domain, problem_from_json, problem_to_json, sample_problem
from .ground import avg_branching_factor, ground, stats
from .planner import PlannerConfig, replay, solve
from .scenegraph import GeneratorParams, SceneGraphError, export_json, generate_synthetic, import_json

log = logging.getLogger("taskography")


def _read(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text()


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _family_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", required=True,
                   choices=["rearrangement", "courier", "lifted-rearrangement", "lifted-courier"])
    p.add_argument("--k", type=int, default=1, help="number of goal literals")
    p.add_argument("--n", type=int, default=None, help="knapsack capacity (courier families)")


def _scene_args(p: argparse.ArgumentParser) -> None:
    d = GeneratorParams()
    p.add_argument("--floors", type=int, default=d.num_floors)
    p.add_argument("--rooms", type=int, default=d.rooms_per_floor, help="rooms per floor")
    p.add_argument("--places", type=int, default=d.places_per_room, help="places per room")
    p.add_argument("--locations", type=int, default=d.locations_per_place, help="locations per place")
    p.add_argument("--items", type=int, default=d.num_items)
    p.add_argument("--receptacles", type=int, default=d.num_receptacles)


def _params(args) -> GeneratorParams:
    return GeneratorParams(num_floors=args.floors, rooms_per_floor=args.rooms, places_per_room=args.places,
                           locations_per_place=args.locations, num_items=args.items,
                           num_receptacles=args.receptacles, seed=args.seed)


# ---------------------------------------------------------------------------
# verbs


def cmd_generate(args) -> int:
    _write(export_json(generate_synthetic(_params(args))), args.out)
    return 0


def cmd_sample(args) -> int:
    domain = build_domain(args.family, args.k, args.n)
    scene = import_json(_read(args.scene)) if args.scene else generate_synthetic(_params(args))
    inst = sample_problem(scene, domain, args.seed, verify=not args.no_verify, verify_timeout=args.timeout)
    _write(problem_to_json(inst), args.out)
    if args.pddl:
        _export_pddl(inst, args.pddl)
    return 0


def _export_pddl(inst, outdir: str) -> None:
    from .pddl import emit_domain, emit_problem

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{inst.domain.name}.pddl").write_text(emit_domain(inst.domain))
    (out / f"{inst.name}.pddl").write_text(emit_problem(inst))
    log.info("wrote %s", out)


def cmd_export(args) -> int:
    inst = problem_from_json(_read(args.problem))
    _export_pddl(inst, args.pddl or args.out or ".")
    return 0


def cmd_plan(args) -> int:
    inst = problem_from_json(_read(args.problem))
    sp = ground(inst)
    plan = solve(sp, PlannerConfig(args.algo, timeout=args.timeout, seed=args.seed))
    _write(plan.to_text() if args.format == "text" else json.dumps(plan.to_dict(), indent=1), args.out)
    return 0 if plan.solved else 2


def cmd_scrub(args) -> int:
    from .scrub import scrub, scrub_stats

    inst = problem_from_json(_read(args.problem))
    result = scrub(inst)
    _write(problem_to_json(result.instance), args.out)
    row = scrub_stats(inst, result)
    if args.report:
        with open(args.report, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(row))
            w.writeheader()
            w.writerow(row)
    print(f"operators {row['operators_before']} -> {row['operators_after']} "
          f"({100 * row['operator_reduction']:.1f}% fewer), state variables {row['state_vars_before']} -> "
          f"{row['state_vars_after']} ({100 * row['state_var_reduction']:.1f}% fewer)", file=sys.stderr)
    return 0


def cmd_seek_train(args) -> int:
    from .bench import SPLIT_PARAMS, build_instances
    from .scrub import scrub
    from .seek import TrainConfig, make_example, save_model, train_hierarchical, train_scorer

    domain = build_domain(args.family, args.k, args.n)
    params = SPLIT_PARAMS[args.split]
    train = build_instances(domain, params, args.train, args.seed, f"train-{args.split}")
    examples = []
    for inst in train:
        plan = solve(ground(scrub(inst).instance), PlannerConfig("gbfs_hff", timeout=args.timeout))
        if plan.solved:
            examples.append(make_example(inst, plan))
        else:
            log.warning("no training plan for %s (%s)", inst.name, plan.status.value)
    config = TrainConfig(balanced=args.balanced, seed=args.seed)
    model = train_hierarchical(examples, config) if args.hierarchical else train_scorer(examples, config)
    if args.out in (None, "-"):
        _write(json.dumps(model.to_dict(), indent=1), None)
    else:
        save_model(model, args.out)
    return 0


def cmd_seek_run(args) -> int:
    from .seek import SeekConfig, incremental_plan, load_model

    inst = problem_from_json(_read(args.problem))
    scorer = load_model(args.model)
    config = SeekConfig(args.t0, args.gamma, args.t_min, per_attempt_timeout=args.timeout,
                        global_timeout=args.global_timeout, closure=not args.no_closure)
    trace = incremental_plan(inst, scorer, PlannerConfig(args.algo, timeout=args.timeout), config)
    _write(json.dumps(trace.to_dict(), indent=1), args.out)
    return 0 if trace.solved else 2


def cmd_bench(args) -> int:
    from .bench import Pipeline, SuiteConfig, aggregate, export_csv, export_json as export_summary_json, \
        export_long_csv, render_table, run_suite

    splits = {}
    for part in args.splits.split(","):
        name, _, count = part.partition(":")
        splits[name] = int(count) if count else {"tiny": 55, "medium": 182}.get(name, 10)
    pipelines = [Pipeline.parse(p, args.timeout) for p in args.pipelines.split(",")]
    config = SuiteConfig(args.family, args.k, args.n, splits=splits, pipelines=pipelines,
                         seeds=list(range(args.seed, args.seed + args.seeds)), base_seed=args.seed)
    out = Path(args.out or "bench-out")
    out.mkdir(parents=True, exist_ok=True)
    records_path = out / "records.jsonl"
    if records_path.exists():
        records_path.unlink()
    records = run_suite(config, records_path, jobs=args.jobs, isolate=not args.in_process,
                        count_full=args.count_full)
    summary = aggregate(records)
    export_csv(summary, out / "summary.csv")
    export_summary_json(summary, out / "summary.json")
    export_long_csv(records, out / "records_long.csv")
    print(render_table(summary))
    return 0


def cmd_stats(args) -> int:
    inst = problem_from_json(_read(args.problem))
    sp = ground(inst)
    row = {"problem": inst.name, **stats(sp)}
    states = [sp.init_state]
    method = "initial state"
    if args.plan_states:
        plan = solve(sp, PlannerConfig("gbfs_hff", timeout=args.timeout))
        if plan.solved:
            states = replay(sp, plan.actions)
            method = "states along a gbfs_hff plan, initial state included"
    bf = avg_branching_factor(sp, states)
    row.update(branching_factor=float(bf), branching_states=len(states), branching_method=method)
    _write(json.dumps(row, indent=1), args.out)
    return 0


# ---------------------------------------------------------------------------


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=dflt(0), help="random seed")
    p.add_argument("--timeout", type=float, default=dflt(30.0), help="seconds per planner call")
    p.add_argument("--jobs", type=int, default=dflt(1), help="parallel worker processes")
    p.add_argument("--out", default=dflt(None), help="output file or directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taskography", description=__doc__)
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate", parents=[common], help="generate a synthetic scene graph")
    _scene_args(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sample", parents=[common], help="sample a problem instance")
    _family_args(p)
    _scene_args(p)
    p.add_argument("--scene", help="scene graph JSON (default: generate one from --seed)")
    p.add_argument("--pddl", help="also write domain/problem PDDL into this directory")
    p.add_argument("--no-verify", action="store_true", help="skip the solvability check")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("export", parents=[common], help="write PDDL for a problem")
    p.add_argument("problem")
    p.add_argument("--pddl", help="output directory")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("plan", parents=[common], help="solve a problem")
    p.add_argument("problem")
    p.add_argument("--algo", default="gbfs_hff")
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("scrub", parents=[common], help="prune a problem to its sufficient subgraph")
    p.add_argument("problem")
    p.add_argument("--report", help="CSV with operator/state-variable reductions")
    p.set_defaults(func=cmd_scrub)

    p = sub.add_parser("seek-train", parents=[common], help="train an object scorer")
    _family_args(p)
    p.add_argument("--train", type=int, default=40, help="training problems")
    p.add_argument("--split", choices=["tiny", "medium"], default="medium")
    p.add_argument("--hierarchical", action="store_true", help="one scorer per scene-graph level")
    p.add_argument("--balanced", action="store_true", help="class-balanced loss")
    p.set_defaults(func=cmd_seek_train)

    p = sub.add_parser("seek-run", parents=[common], help="plan with score-based pruning and replanning")
    p.add_argument("problem")
    p.add_argument("--model", required=True)
    p.add_argument("--t0", type=float, default=0.9)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--t-min", type=float, default=0.01)
    p.add_argument("--global-timeout", type=float, default=300.0)
    p.add_argument("--no-closure", action="store_true", help="plain threshold cut")
    p.add_argument("--algo", default="gbfs_hff")
    p.set_defaults(func=cmd_seek_run)

    p = sub.add_parser("bench", parents=[common], help="run a benchmark suite")
    _family_args(p)
    p.add_argument("--splits", default="tiny:5", help="comma list of split[:count]")
    p.add_argument("--pipelines", default="none:gbfs_hff,scrub:gbfs_hff",
                   help="comma list of pruner:planner[:model]")
    p.add_argument("--seeds", type=int, default=1, help="number of seeds, starting at --seed")
    p.add_argument("--in-process", action="store_true", help="no worker isolation")
    p.add_argument("--count-full", action="store_true", help="also ground the unpruned problem for counts")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", parents=[common], help="domain statistics of a problem")
    p.add_argument("problem")
    p.add_argument("--plan-states", action="store_true", help="average branching over states along a plan")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DomainError, SceneGraphError, ValueError, OSError) as exc:
        print(f"taskography {args.verb}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
