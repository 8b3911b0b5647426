"""Task-conditioned scene-graph sparsification.

The sufficient object set grows from the goal objects and the agent by
following initial-state binary literals from each newly added object to its
scene-graph ancestors.  Retained rooms are then joined along shortest room
paths, and the entry points the movement operators need (door places of
rooms, center locations of places) are added wherever the agent has to pass
through them.
"""

from __future__ import annotations

import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .domain import AGENT, DomainError, ProblemInstance, restrict_problem
from .ground import StripsProblem, ground
from .planner import ExpansionCapExceeded, Plan, PlannerConfig, Status, bfs_oracle
from .scenegraph import SceneGraph


class ScrubError(DomainError):
    pass


@dataclass
class SufficientSet:
    objects: frozenset[str]
    # one entry per round: newly added objects and the literals that pulled in the next frontier
    rounds: list[dict] = field(default_factory=list)


@dataclass
class ScrubResult:
    instance: ProblemInstance
    sufficient: SufficientSet
    retained_nodes: frozenset[str]
    connect_rooms: tuple[str, ...]
    anchors: tuple[str, ...]
    pruned_literals: int
    runtime: float
    lifted: bool = False

    @property
    def graph(self) -> SceneGraph:
        return self.instance.scene

    def used_fraction(self, original: ProblemInstance) -> float:
        return len(self.instance.objects) / max(1, len(original.objects))


def _require_scene(inst: ProblemInstance) -> SceneGraph:
    if inst.scene is None:
        raise ScrubError("sparsification needs the problem's scene graph")
    return inst.scene


def _binary_index(inst: ProblemInstance) -> dict[str, list[tuple[tuple, str]]]:
    index: dict[str, list[tuple[tuple, str]]] = defaultdict(list)
    scene_syms = inst.symbols
    for lit in inst.init:
        # room connectivity is handled by the room-path step
        if len(lit) == 3 and lit[0] != "connected":
            a, b = lit[1], lit[2]
            if a in scene_syms and b in scene_syms:
                index[a].append((lit, b))
                index[b].append((lit, a))
    return index


def sufficient_objects(inst: ProblemInstance, seeds: Iterable[str]) -> SufficientSet:
    """Fixpoint over binary literals relating newly added objects to their ancestors."""
    scene = _require_scene(inst)
    sym_of = inst.symbol_of()
    node_of = inst.symbols
    index = _binary_index(inst)
    scene_objects = set(node_of)
    found: set[str] = set()
    visited: set[str] = set()
    rounds = []
    frontier = {s for s in seeds if s in node_of}
    while frontier:
        new = frontier - found
        if not new:
            break
        found |= new
        pulled, lits = set(), []
        for o in new:
            anc = {sym_of[a] for a in scene.ancestors(node_of[o]) if a in sym_of}
            for lit, other in index.get(o, ()):
                if other in anc:
                    lits.append(lit)
                    pulled.add(other)
        rounds.append({"added": sorted(new), "predicates": sorted(lits)})
        frontier = pulled - found
        visited |= new | pulled
        if visited >= scene_objects:
            found |= frontier
            break
    return SufficientSet(frozenset(found), rounds)


def _room_paths(scene: SceneGraph, rooms: set[str]) -> set[str]:
    """Rooms on one shortest path between every pair of ``rooms``."""
    out = set(rooms)
    ordered = sorted(rooms)
    for i, src in enumerate(ordered):
        targets = set(ordered[i + 1:])
        if not targets:
            break
        prev = {src: None}
        queue = deque([src])
        while queue and not targets <= prev.keys():
            r = queue.popleft()
            for nb in scene.neighbors(r):
                if nb not in prev:
                    prev[nb] = r
                    queue.append(nb)
        for t in targets:
            if t not in prev:
                raise ScrubError(f"rooms {src!r} and {t!r} are not connected")
            cur = t
            while cur is not None:
                out.add(cur)
                cur = prev[cur]
    return out


def close_structure(scene: SceneGraph, nodes: Iterable[str]) -> tuple[set[str], set[str], set[str]]:
    """Close ``nodes`` under ancestors, room paths and movement entry points.

    Returns (retained nodes, rooms added by the room-path step, entry points added).
    """
    keep = set(nodes)
    for n in list(keep):
        keep.update(scene.ancestors(n))
    rooms = {n for n in keep if scene.kind(n) == "room"}
    all_rooms = _room_paths(scene, rooms)
    path_rooms = all_rooms - rooms
    anchors: set[str] = set()
    if len(all_rooms) >= 2:
        for r in all_rooms:
            door = scene.center_child(r)
            if door is not None:
                anchors.add(door)
    places = {n for n in keep if scene.kind(n) == "place"} | anchors
    if len(places) >= 2:
        for p in places:
            center = scene.center_child(p)
            if center is not None:
                anchors.add(center)
    anchors -= keep
    keep |= all_rooms | anchors
    for n in list(path_rooms | anchors):
        keep.update(scene.ancestors(n))
    return keep, path_rooms, anchors


def _finish(inst: ProblemInstance, suff: SufficientSet, start: float, lifted: bool) -> ScrubResult:
    scene = _require_scene(inst)
    seed_nodes = {inst.symbols[o] for o in suff.objects if o in inst.symbols}
    keep, path_rooms, anchors = close_structure(scene, seed_nodes)
    reduced = restrict_problem(inst, keep)
    return ScrubResult(
        instance=reduced,
        sufficient=suff,
        retained_nodes=frozenset(keep),
        connect_rooms=tuple(sorted(path_rooms)),
        anchors=tuple(sorted(anchors)),
        pruned_literals=len(inst.init) - len(reduced.init),
        runtime=time.perf_counter() - start,
        lifted=lifted,
    )


def scrub_grounded(inst: ProblemInstance) -> ScrubResult:
    start = time.perf_counter()
    if inst.domain.family.lifted:
        raise ScrubError("scrub_grounded needs a grounded goal; use scrub_lifted")
    known = set(inst.object_types)
    for lit in inst.goal:
        for a in lit[1:]:
            if a not in known:
                raise ScrubError(f"goal references unknown object {a!r}")
    seeds = inst.goal_objects() | {AGENT}
    return _finish(inst, sufficient_objects(inst, seeds), start, lifted=False)


def scrub_lifted(inst: ProblemInstance) -> ScrubResult:
    """Seed the fixpoint with every (item, receptacle) pair matching a goal class relation."""
    start = time.perf_counter()
    item_cls, recep_cls = defaultdict(list), defaultdict(list)
    for lit in inst.init:
        if lit[0] == "itemClass":
            item_cls[lit[2]].append(lit[1])
        elif lit[0] == "recepClass":
            recep_cls[lit[2]].append(lit[1])
    seeds = {AGENT}
    for lit in inst.goal:
        if lit[0] != "classRelation":
            raise ScrubError(f"lifted goals are classRelation literals, got {lit}")
        ic, rc = lit[1], lit[2]
        if not item_cls.get(ic):
            raise ScrubError(f"goal item class {ic!r} has no instances")
        if not recep_cls.get(rc):
            raise ScrubError(f"goal receptacle class {rc!r} has no instances")
        seeds.update(item_cls[ic])
        seeds.update(recep_cls[rc])
    return _finish(inst, sufficient_objects(inst, seeds), start, lifted=True)


def scrub(inst: ProblemInstance) -> ScrubResult:
    return scrub_lifted(inst) if inst.domain.family.lifted else scrub_grounded(inst)


def scrub_stats(original: ProblemInstance, result: ScrubResult,
                full: StripsProblem | None = None, reduced: StripsProblem | None = None) -> dict:
    full = full or ground(original)
    reduced = reduced or ground(result.instance)
    row = {
        "problem": original.name,
        "operators_before": len(full.actions),
        "operators_after": len(reduced.actions),
        "state_vars_before": len(full.atoms),
        "state_vars_after": len(reduced.atoms),
        "objects_before": len(original.objects),
        "objects_after": len(result.instance.objects),
        "pruned_literals": result.pruned_literals,
        "runtime": result.runtime,
    }
    row["operator_reduction"] = 1 - row["operators_after"] / max(1, row["operators_before"])
    row["state_var_reduction"] = 1 - row["state_vars_after"] / max(1, row["state_vars_before"])
    return row


# ---------------------------------------------------------------------------
# Minimality harness


@dataclass
class MinimalityReport:
    checked: list[str] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    inconclusive: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def delete_node(inst: ProblemInstance, node_id: str) -> ProblemInstance:
    """The problem with ``node_id`` and its containment subtree removed from the scene."""
    scene = _require_scene(inst)
    drop = {node_id, *scene.descendants(node_id)}
    return restrict_problem(inst, (n for n in scene.nodes if n not in drop))


def check_minimality(
    result: ScrubResult,
    oracle: Callable[[StripsProblem], Plan] | None = None,
    max_expansions: int = 1_000_000,
    timeout: float = 600.0,
) -> MinimalityReport:
    """Delete each retained node in turn; every deletion must make the problem unsolvable."""
    if oracle is None:
        config = PlannerConfig("bfs_oracle", timeout=timeout, max_expansions=max_expansions)

        def oracle(sp):
            return bfs_oracle(sp, config)

    inst = result.instance
    scene = _require_scene(inst)
    report = MinimalityReport()
    for nid in scene.nodes:
        if nid in (scene.root, AGENT):
            continue
        report.checked.append(nid)
        try:
            plan = oracle(ground(delete_node(inst, nid)))
        except ExpansionCapExceeded:
            report.inconclusive.append(nid)
            continue
        if plan.status == Status.SOLVED:
            report.violations.append(nid)
        elif plan.status == Status.TIMEOUT:
            report.inconclusive.append(nid)
    return report
