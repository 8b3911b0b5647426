"""Benchmark domain families, operator schemas and problem sampling.

Literals are plain tuples ``(predicate, arg, ...)``; schema literals use
``?var`` arguments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

import numpy as np

from .scenegraph import CONTAINS, AttributeSet, Edge, Node, SceneGraph

Atom = tuple  # (predicate, *args)

AGENT = "agent"


class Family(str, Enum):
    REARRANGEMENT = "rearrangement"
    COURIER = "courier"
    LIFTED_REARRANGEMENT = "lifted-rearrangement"
    LIFTED_COURIER = "lifted-courier"

    @property
    def courier(self) -> bool:
        return self in (Family.COURIER, Family.LIFTED_COURIER)

    @property
    def lifted(self) -> bool:
        return self in (Family.LIFTED_REARRANGEMENT, Family.LIFTED_COURIER)


class DomainError(ValueError):
    pass


class SamplingError(DomainError):
    pass


class GenerationError(DomainError):
    pass


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    params: tuple[tuple[str, str], ...]

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def types(self) -> tuple[str, ...]:
        return tuple(t for _, t in self.params)


@dataclass(frozen=True)
class OperatorSchema:
    name: str
    params: tuple[tuple[str, str], ...]
    pre: tuple[Atom, ...]
    pre_neg: tuple[Atom, ...] = ()
    add: tuple[Atom, ...] = ()
    delete: tuple[Atom, ...] = ()
    cost: int = 1

    def __post_init__(self):
        declared = {v for v, _ in self.params}
        for lit in (*self.pre, *self.pre_neg, *self.add, *self.delete):
            for arg in lit[1:]:
                if arg.startswith("?") and arg not in declared:
                    raise DomainError(f"{self.name}: undeclared parameter {arg} in {lit}")


@dataclass(frozen=True)
class DomainSpec:
    family: Family
    k: int
    n: int | None
    object_types: tuple[str, ...]
    predicates: tuple[PredicateSchema, ...]
    operators: tuple[OperatorSchema, ...]

    @property
    def name(self) -> str:
        if self.family.courier:
            return f"{self.family.value}-n{self.n}-k{self.k}"
        return f"{self.family.value}-k{self.k}"

    def predicate(self, name: str) -> PredicateSchema:
        for p in self.predicates:
            if p.name == name:
                return p
        raise KeyError(name)

    def operator(self, name: str) -> OperatorSchema:
        for o in self.operators:
            if o.name == name:
                return o
        raise KeyError(name)

    @property
    def static_predicates(self) -> frozenset[str]:
        changed = {lit[0] for op in self.operators for lit in (*op.add, *op.delete)}
        return frozenset(p.name for p in self.predicates if p.name not in changed)


# ---------------------------------------------------------------------------
# Predicate table

_PRED = {
    "holdsAny": (("?a", "agent"),),
    "inRoom": (("?a", "agent"), ("?r", "room")),
    "inPlace": (("?a", "agent"), ("?p", "place")),
    "atLoc": (("?a", "agent"), ("?l", "location")),
    "holdsItem": (("?a", "agent"), ("?i", "item")),
    "connected": (("?r1", "room"), ("?r2", "room")),
    "placeInRoom": (("?p", "place"), ("?r", "room")),
    "roomCenter": (("?r", "room"), ("?p", "place")),
    "locInPlace": (("?l", "location"), ("?p", "place")),
    "placeCenter": (("?p", "place"), ("?l", "location")),
    "recepAtLoc": (("?x", "receptacle"), ("?l", "location")),
    "itemAtLoc": (("?i", "item"), ("?l", "location")),
    "openable": (("?x", "receptacle"),),
    "recepOpened": (("?x", "receptacle"),),
    "inRecep": (("?i", "item"), ("?x", "receptacle")),
    "small": (("?i", "item"),),
    "medium": (("?i", "item"),),
    "large": (("?i", "item"),),
    "inSlot": (("?i", "item"), ("?s", "bagslot")),
    "slotHoldsAny": (("?s", "bagslot"),),
    "nextSlot": (("?s1", "bagslot"), ("?s2", "bagslot")),
    "recepClass": (("?x", "receptacle"), ("?c", "receptacleclass")),
    "itemClass": (("?i", "item"), ("?c", "itemclass")),
    "classRelation": (("?ic", "itemclass"), ("?rc", "receptacleclass")),
}
_BASE_PREDICATES = (
    "holdsAny", "inRoom", "inPlace", "atLoc", "holdsItem", "connected", "placeInRoom",
    "roomCenter", "locInPlace", "placeCenter", "recepAtLoc", "itemAtLoc", "openable",
    "recepOpened", "inRecep",
)
_COURIER_PREDICATES = ("small", "medium", "large", "inSlot", "slotHoldsAny", "nextSlot")
_LIFTED_PREDICATES = ("recepClass", "itemClass", "classRelation")

_BASE_TYPES = ("agent", "room", "place", "location", "receptacle", "item")

STATIC_PREDICATES = frozenset({
    "connected", "placeInRoom", "roomCenter", "locInPlace", "placeCenter", "recepAtLoc",
    "openable", "small", "medium", "large", "nextSlot", "recepClass", "itemClass",
})


def _lits(*specs: str) -> tuple[Atom, ...]:
    return tuple(tuple(s.split()) for s in specs)


def _params(spec: str) -> tuple[tuple[str, str], ...]:
    out = []
    for part in spec.split(","):
        var, typ = part.split(":")
        out.append((var.strip(), typ.strip()))
    return tuple(out)


def _movement_operators() -> list[OperatorSchema]:
    return [
        OperatorSchema(
            "GoToRoom",
            _params("?a:agent, ?r1:room, ?r2:room, ?p1:place, ?p2:place, ?l1:location, ?l2:location"),
            pre=_lits("connected ?r1 ?r2", "roomCenter ?r1 ?p1", "placeCenter ?p1 ?l1",
                      "roomCenter ?r2 ?p2", "placeCenter ?p2 ?l2", "inRoom ?a ?r1", "atLoc ?a ?l1"),
            add=_lits("inRoom ?a ?r2", "inPlace ?a ?p2", "atLoc ?a ?l2"),
            delete=_lits("inRoom ?a ?r1", "inPlace ?a ?p1", "atLoc ?a ?l1"),
        ),
        OperatorSchema(
            "GoToPlace",
            _params("?a:agent, ?r:room, ?p1:place, ?p2:place, ?l1:location, ?l2:location"),
            pre=_lits("placeInRoom ?p1 ?r", "placeInRoom ?p2 ?r", "placeCenter ?p1 ?l1",
                      "placeCenter ?p2 ?l2", "inPlace ?a ?p1", "atLoc ?a ?l1"),
            add=_lits("inPlace ?a ?p2", "atLoc ?a ?l2"),
            delete=_lits("inPlace ?a ?p1", "atLoc ?a ?l1"),
        ),
        OperatorSchema(
            "GoToLocation",
            _params("?a:agent, ?p:place, ?l1:location, ?l2:location"),
            pre=_lits("locInPlace ?l1 ?p", "locInPlace ?l2 ?p", "atLoc ?a ?l1"),
            add=_lits("atLoc ?a ?l2"),
            delete=_lits("atLoc ?a ?l1"),
        ),
    ]


def _receptacle_operators() -> list[OperatorSchema]:
    return [
        OperatorSchema(
            "OpenReceptacle",
            _params("?a:agent, ?x:receptacle, ?l:location"),
            pre=_lits("openable ?x", "recepAtLoc ?x ?l", "atLoc ?a ?l"),
            pre_neg=_lits("recepOpened ?x"),
            add=_lits("recepOpened ?x"),
        ),
        OperatorSchema(
            "CloseReceptacle",
            _params("?a:agent, ?x:receptacle, ?l:location"),
            pre=_lits("openable ?x", "recepAtLoc ?x ?l", "atLoc ?a ?l", "recepOpened ?x"),
            delete=_lits("recepOpened ?x"),
        ),
    ]


def _manipulation_operators(lifted: bool) -> list[OperatorSchema]:
    ops = [
        OperatorSchema(
            "PickupItem",
            _params("?a:agent, ?i:item, ?l:location"),
            pre=_lits("atLoc ?a ?l", "itemAtLoc ?i ?l"),
            pre_neg=_lits("holdsAny ?a"),
            add=_lits("holdsItem ?a ?i", "holdsAny ?a"),
            delete=_lits("itemAtLoc ?i ?l"),
        ),
        OperatorSchema(
            "PickupItemFromReceptacle",
            _params("?a:agent, ?i:item, ?x:receptacle, ?l:location"),
            pre=_lits("recepAtLoc ?x ?l", "atLoc ?a ?l", "inRecep ?i ?x"),
            pre_neg=_lits("openable ?x", "holdsAny ?a"),
            add=_lits("holdsItem ?a ?i", "holdsAny ?a"),
            delete=_lits("inRecep ?i ?x"),
        ),
        OperatorSchema(
            "PickupItemFromOpenableReceptacle",
            _params("?a:agent, ?i:item, ?x:receptacle, ?l:location"),
            pre=_lits("openable ?x", "recepAtLoc ?x ?l", "atLoc ?a ?l", "recepOpened ?x", "inRecep ?i ?x"),
            pre_neg=_lits("holdsAny ?a"),
            add=_lits("holdsItem ?a ?i", "holdsAny ?a"),
            delete=_lits("inRecep ?i ?x"),
        ),
    ]
    place_params = "?a:agent, ?i:item, ?x:receptacle, ?l:location"
    class_pre: tuple[Atom, ...] = ()
    class_add: tuple[Atom, ...] = ()
    if lifted:
        place_params += ", ?ic:itemclass, ?rc:receptacleclass"
        class_pre = _lits("itemClass ?i ?ic", "recepClass ?x ?rc")
        class_add = _lits("classRelation ?ic ?rc")
    ops += [
        OperatorSchema(
            "PlaceItemInReceptacle",
            _params(place_params),
            pre=_lits("recepAtLoc ?x ?l", "atLoc ?a ?l", "holdsItem ?a ?i") + class_pre,
            pre_neg=_lits("openable ?x"),
            add=_lits("inRecep ?i ?x") + class_add,
            delete=_lits("holdsItem ?a ?i", "holdsAny ?a"),
        ),
        OperatorSchema(
            "PlaceItemInOpenableReceptacle",
            _params(place_params),
            pre=_lits("openable ?x", "recepAtLoc ?x ?l", "atLoc ?a ?l", "recepOpened ?x",
                      "holdsItem ?a ?i") + class_pre,
            add=_lits("inRecep ?i ?x") + class_add,
            delete=_lits("holdsItem ?a ?i", "holdsAny ?a"),
        ),
    ]
    return ops


def _knapsack_operators() -> list[OperatorSchema]:
    ops = []
    for size, nslots in (("Small", 1), ("Medium", 2), ("Large", 3)):
        slots = [f"?s{j}" for j in range(1, nslots + 1)]
        params = _params(", ".join(["?a:agent", "?i:item"] + [f"{s}:bagslot" for s in slots]))
        chain = tuple(("nextSlot", a, b) for a, b in zip(slots, slots[1:]))
        in_slot = tuple(("inSlot", "?i", s) for s in slots)
        busy = tuple(("slotHoldsAny", s) for s in slots)
        ops.append(OperatorSchema(
            f"StowItem{size}", params,
            pre=((size.lower(), "?i"),) + chain + (("holdsItem", "?a", "?i"),),
            pre_neg=busy,
            add=in_slot + busy,
            delete=(("holdsItem", "?a", "?i"), ("holdsAny", "?a")),
        ))
    for size, nslots in (("Small", 1), ("Medium", 2), ("Large", 3)):
        slots = [f"?s{j}" for j in range(1, nslots + 1)]
        params = _params(", ".join(["?a:agent", "?i:item"] + [f"{s}:bagslot" for s in slots]))
        chain = tuple(("nextSlot", a, b) for a, b in zip(slots, slots[1:]))
        in_slot = tuple(("inSlot", "?i", s) for s in slots)
        busy = tuple(("slotHoldsAny", s) for s in slots)
        ops.append(OperatorSchema(
            f"RetrieveItem{size}", params,
            pre=((size.lower(), "?i"),) + chain + in_slot,
            pre_neg=(("holdsAny", "?a"),),
            add=(("holdsItem", "?a", "?i"), ("holdsAny", "?a")),
            delete=in_slot + busy,
        ))
    return ops


def build_domain(family: Family | str, k: int = 1, n: int | None = None) -> DomainSpec:
    family = Family(family)
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if family.courier:
        if n is None or n < 1:
            raise DomainError(f"{family.value} needs knapsack capacity n >= 1, got {n}")
    else:
        n = None
    types = list(_BASE_TYPES)
    preds = list(_BASE_PREDICATES)
    ops = _movement_operators() + _receptacle_operators() + _manipulation_operators(family.lifted)
    if family.courier:
        types.append("bagslot")
        preds += _COURIER_PREDICATES
        ops += _knapsack_operators()
    if family.lifted:
        types += ["receptacleclass", "itemclass"]
        preds += _LIFTED_PREDICATES
    predicates = tuple(PredicateSchema(p, _PRED[p]) for p in preds)
    spec = DomainSpec(family, k, n, tuple(types), predicates, tuple(ops))
    _check_symbols(spec)
    return spec


def _check_symbols(spec: DomainSpec) -> None:
    table = {p.name: p for p in spec.predicates}
    for op in spec.operators:
        ptypes = dict(op.params)
        for _, t in op.params:
            if t not in spec.object_types:
                raise DomainError(f"{op.name}: unknown type {t}")
        for lit in (*op.pre, *op.pre_neg, *op.add, *op.delete):
            schema = table.get(lit[0])
            if schema is None:
                raise DomainError(f"{op.name}: unknown predicate {lit[0]}")
            if schema.arity != len(lit) - 1:
                raise DomainError(f"{op.name}: arity mismatch in {lit}")
            for arg, t in zip(lit[1:], schema.types):
                if ptypes.get(arg) != t:
                    raise DomainError(f"{op.name}: {arg} has type {ptypes.get(arg)}, {lit[0]} needs {t}")


# ---------------------------------------------------------------------------
# Problem instances


@dataclass(frozen=True)
class ProblemInstance:
    name: str
    domain: DomainSpec
    objects: tuple[tuple[str, str], ...]
    init: frozenset
    goal: tuple[Atom, ...]
    scene: SceneGraph | None = field(default=None, compare=False, repr=False)
    # PDDL symbol -> scene node id, for objects backed by scene nodes
    symbols: Mapping[str, str] = field(default_factory=dict, compare=False, repr=False)
    seed: int | None = field(default=None, compare=False)

    @property
    def object_types(self) -> dict[str, str]:
        return dict(self.objects)

    def objects_of(self, typ: str) -> list[str]:
        return [o for o, t in self.objects if t == typ]

    def goal_objects(self) -> set[str]:
        return {a for lit in self.goal for a in lit[1:]}

    def node_of(self, symbol: str) -> str | None:
        return self.symbols.get(symbol)

    def symbol_of(self) -> dict[str, str]:
        return {v: k for k, v in self.symbols.items()}

    def agent_location(self) -> str:
        for lit in self.init:
            if lit[0] == "atLoc" and lit[1] == AGENT:
                return lit[2]
        raise DomainError("initial state places the agent nowhere")


def _symbol(node_id: str, taken: set[str]) -> str:
    """A PDDL-legal symbol for ``node_id``, unique case-insensitively."""
    s = "".join(c if c.isalnum() or c in "_-" else "_" for c in node_id)
    if not s or not s[0].isalpha():
        s = "n_" + s
    base, i = s, 1
    while s.lower() in taken:
        s = f"{base}_{i}"
        i += 1
    taken.add(s.lower())
    return s


def embed_agent(scene: SceneGraph, location: str) -> SceneGraph:
    if scene.kind(location) != "location":
        raise DomainError(f"agent must start at a location, got {scene.kind(location)} {location!r}")
    if AGENT in scene:
        raise DomainError("scene already contains an agent")
    pose = scene.node(location).attributes.pose
    agent = Node(AGENT, "object", "agent", AttributeSet(class_label="agent", pose=pose))
    return scene.with_nodes([agent], [Edge(location, AGENT, CONTAINS)])


def build_problem(
    scene: SceneGraph,
    domain: DomainSpec,
    agent_location: str,
    goal: Iterable[Atom],
    *,
    name: str | None = None,
    seed: int | None = None,
    opened: Iterable[str] = (),
) -> ProblemInstance:
    """Bind ``domain`` to ``scene`` with the agent embedded at ``agent_location``.

    ``goal`` literals are written over scene node ids (grounded families) or
    class labels (lifted families); ``opened`` lists receptacles that start open.
    """
    scene = embed_agent(scene, agent_location)
    taken: set[str] = {AGENT}
    sym: dict[str, str] = {}
    objects: list[tuple[str, str]] = []
    for nid, node in scene.nodes.items():
        if node.kind in ("building", "floor"):
            continue
        s = AGENT if node.kind == "agent" else _symbol(nid, taken)
        sym[nid] = s
        objects.append((s, node.kind))
    init: set[Atom] = set()
    opened = set(opened)
    for nid, node in scene.nodes.items():
        kind = node.kind
        if kind in ("building", "floor"):
            continue
        s, parent = sym[nid], scene.parent(nid)
        if kind == "room":
            for nb in scene.neighbors(nid):
                init.add(("connected", s, sym[nb]))
            door = scene.center_child(nid)
            if door is not None:
                init.add(("roomCenter", s, sym[door]))
        elif kind == "place":
            init.add(("placeInRoom", s, sym[parent]))
            center = scene.center_child(nid)
            if center is not None:
                init.add(("placeCenter", s, sym[center]))
        elif kind == "location":
            init.add(("locInPlace", s, sym[parent]))
        elif kind == "receptacle":
            init.add(("recepAtLoc", s, sym[parent]))
            if node.attributes.openable:
                init.add(("openable", s))
                if nid in opened:
                    init.add(("recepOpened", s))
        elif kind == "item":
            if scene.kind(parent) == "receptacle":
                init.add(("inRecep", s, sym[parent]))
            else:
                init.add(("itemAtLoc", s, sym[parent]))
            if domain.family.courier:
                init.add((node.attributes.size_class or "small", s))
        elif kind == "agent":
            loc = parent
            place = scene.parent(loc)
            room = scene.parent(place)
            init |= {("atLoc", s, sym[loc]), ("inPlace", s, sym[place]), ("inRoom", s, sym[room])}

    if domain.family.courier:
        slots = [f"slot_{j}" for j in range(domain.n)]
        for a, b in zip(slots, slots[1:]):
            init.add(("nextSlot", a, b))
        objects += [(s, "bagslot") for s in slots]

    goal = tuple(goal)
    if domain.family.lifted:
        item_cls, recep_cls = {}, {}
        for nid, node in scene.nodes.items():
            if node.kind == "item":
                item_cls.setdefault(node.attributes.class_label, []).append(nid)
            elif node.kind == "receptacle":
                recep_cls.setdefault(node.attributes.class_label, []).append(nid)
        csym = {}
        for label in sorted(item_cls):
            csym["i", label] = _symbol(label, taken)
            objects.append((csym["i", label], "itemclass"))
            for nid in item_cls[label]:
                init.add(("itemClass", sym[nid], csym["i", label]))
        for label in sorted(recep_cls):
            csym["r", label] = _symbol(label, taken)
            objects.append((csym["r", label], "receptacleclass"))
            for nid in recep_cls[label]:
                init.add(("recepClass", sym[nid], csym["r", label]))
        mapped = []
        for lit in goal:
            if lit[0] != "classRelation":
                raise DomainError(f"lifted goals are classRelation literals, got {lit}")
            try:
                mapped.append(("classRelation", csym["i", lit[1]], csym["r", lit[2]]))
            except KeyError as exc:
                raise DomainError(f"goal class {exc.args[0][1]!r} has no instance in the scene") from None
        goal = tuple(mapped)
    else:
        mapped = []
        for lit in goal:
            if lit[0] != "inRecep":
                raise DomainError(f"grounded goals are inRecep literals, got {lit}")
            for a in lit[1:]:
                if a not in sym:
                    raise DomainError(f"goal references unknown object {a!r}")
            mapped.append((lit[0], *(sym[a] for a in lit[1:])))
        goal = tuple(mapped)

    objects.sort(key=lambda ot: (ot[1], ot[0]))
    return ProblemInstance(
        name=name or f"{domain.name}-s{seed if seed is not None else 0}",
        domain=domain,
        objects=tuple(objects),
        init=frozenset(init),
        goal=goal,
        scene=scene,
        symbols={s: nid for nid, s in sym.items()},
        seed=seed,
    )


def restrict_problem(inst: ProblemInstance, keep_nodes: Iterable[str]) -> ProblemInstance:
    """Drop scene objects outside ``keep_nodes`` and every literal that mentions one.

    Non-scene objects (bagslots, classes) are always kept.  The reduced scene
    graph keeps the retained nodes whose ancestors are all retained.
    """
    keep_nodes = set(keep_nodes)
    dropped = {s for s, nid in inst.symbols.items() if nid not in keep_nodes}
    objects = tuple(o for o in inst.objects if o[0] not in dropped)
    init = frozenset(lit for lit in inst.init if not any(a in dropped for a in lit[1:]))
    scene = None
    if inst.scene is not None:
        closed = [nid for nid in keep_nodes if nid in inst.scene
                  and all(a in keep_nodes for a in inst.scene.ancestors(nid))]
        scene = inst.scene.subgraph(closed)
    symbols = {s: nid for s, nid in inst.symbols.items() if s not in dropped}
    return ProblemInstance(inst.name, inst.domain, objects, init, inst.goal, scene, symbols, inst.seed)


def _current_container(scene: SceneGraph, item: str) -> str | None:
    parent = scene.parent(item)
    return parent if scene.kind(parent) == "receptacle" else None


def sample_problem(
    scene: SceneGraph,
    domain: DomainSpec,
    seed: int,
    *,
    closed_probability: float = 1.0,
    verify: bool = True,
    verify_timeout: float = 5.0,
    max_resamples: int = 20,
) -> ProblemInstance:
    """Sample a problem over ``scene``: random agent location plus ``domain.k`` goal literals.

    Grounded goals never hold initially.  With ``verify`` the sampled problem
    must be solved by the satisficing planner on its sparsified form.
    """
    rng = np.random.default_rng(seed)
    k = domain.k
    items = scene.of_kind("item")
    receps = scene.of_kind("receptacle")
    locations = scene.of_kind("location")
    if not locations:
        raise SamplingError("scene has no locations to place the agent")
    if domain.family.lifted:
        item_classes = sorted({scene.node(i).attributes.class_label for i in items})
        recep_classes = sorted({scene.node(x).attributes.class_label for x in receps})
        pairs = [(ic, rc) for ic in item_classes for rc in recep_classes]
        if len(pairs) < k:
            raise SamplingError(f"need {k} class pairs, scene offers {len(pairs)}")
    else:
        if len(items) < k:
            raise SamplingError(f"need {k} items, scene has {len(items)}")
        need_receps = k if domain.family.courier else 1
        if len(receps) < max(need_receps, 1):
            raise SamplingError(f"need {need_receps} receptacles, scene has {len(receps)}")

    for attempt in range(max_resamples):
        agent_loc = locations[int(rng.integers(len(locations)))]
        if domain.family.lifted:
            chosen = rng.choice(len(pairs), size=k, replace=False)
            goal = [("classRelation", *pairs[int(j)]) for j in sorted(chosen)]
        else:
            goal = _sample_grounded_goal(scene, domain, rng, items, receps)
            if goal is None:
                continue
        openable = [x for x in receps if scene.node(x).attributes.openable]
        opened = [x for x in openable if rng.random() >= closed_probability]
        inst = build_problem(scene, domain, agent_loc, goal, seed=seed,
                             name=f"{domain.name}-s{seed}", opened=opened)
        if not verify or _solvable(inst, verify_timeout):
            return inst
    raise GenerationError(f"no solvable problem after {max_resamples} samples (seed {seed})")


def _sample_grounded_goal(scene, domain, rng, items, receps):
    k = domain.k
    chosen = [items[int(j)] for j in rng.choice(len(items), size=k, replace=False)]
    if domain.family.courier:
        for _ in range(50):
            targets = [receps[int(j)] for j in rng.choice(len(receps), size=k, replace=False)]
            if all(_current_container(scene, i) != x for i, x in zip(chosen, targets)):
                return [("inRecep", i, x) for i, x in zip(chosen, targets)]
        return None
    goal = []
    for i in chosen:
        options = [x for x in receps if x != _current_container(scene, i)]
        if not options:
            return None
        goal.append(("inRecep", i, options[int(rng.integers(len(options)))]))
    return goal


def _solvable(inst: ProblemInstance, timeout: float) -> bool:
    from .ground import ground
    from .planner import PlannerConfig, Status, solve
    from .scrub import scrub

    reduced = scrub(inst).instance
    plan = solve(ground(reduced), PlannerConfig("gbfs_hff", timeout=timeout))
    return plan.status == Status.SOLVED


# ---------------------------------------------------------------------------
# Lifted interpreter


@dataclass(frozen=True)
class Simulation:
    ok: bool
    failed_step: int | None = None
    reason: str = ""
    final: frozenset = frozenset()


def bind_step(domain: DomainSpec, objects: Mapping[str, str], step: tuple[str, ...]):
    """Instantiate the schema named by ``step`` (name, *args); raise DomainError if ill-typed."""
    op = domain.operator(step[0])
    args = step[1:]
    if len(args) != len(op.params):
        raise DomainError(f"{step[0]} takes {len(op.params)} arguments, got {len(args)}")
    binding = {}
    for (var, typ), a in zip(op.params, args):
        if objects.get(a) != typ:
            raise DomainError(f"{step[0]}: {a!r} is not a {typ}")
        binding[var] = a

    def sub(lits):
        return [(l[0], *(binding.get(x, x) for x in l[1:])) for l in lits]

    return sub(op.pre), sub(op.pre_neg), sub(op.add), sub(op.delete)


def applicable_lifted(domain: DomainSpec, objects: Mapping[str, str], state: frozenset | set,
                      step: tuple[str, ...]) -> bool:
    try:
        pre, neg, _, _ = bind_step(domain, objects, step)
    except (DomainError, KeyError):
        return False
    return all(l in state for l in pre) and not any(l in state for l in neg)


def simulate(inst: ProblemInstance, steps: Iterable[tuple[str, ...]]) -> Simulation:
    """Replay ``steps`` from the initial state by direct schema interpretation."""
    objects = inst.object_types
    state = set(inst.init)
    for i, step in enumerate(steps):
        step = tuple(step)
        try:
            pre, neg, add, dele = bind_step(inst.domain, objects, step)
        except KeyError:
            return Simulation(False, i, f"unknown operator {step[0]!r}", frozenset(state))
        except DomainError as exc:
            return Simulation(False, i, str(exc), frozenset(state))
        missing = [l for l in pre if l not in state]
        if missing:
            return Simulation(False, i, f"precondition {missing[0]} does not hold", frozenset(state))
        blocked = [l for l in neg if l in state]
        if blocked:
            return Simulation(False, i, f"negated precondition {blocked[0]} holds", frozenset(state))
        state.difference_update(dele)
        state.update(add)
    unmet = [g for g in inst.goal if g not in state]
    if unmet:
        return Simulation(False, None, f"goal {unmet[0]} not reached", frozenset(state))
    return Simulation(True, None, "", frozenset(state))


# ---------------------------------------------------------------------------
# JSON mirror


def problem_to_dict(inst: ProblemInstance) -> dict[str, Any]:
    d = inst.domain
    return {
        "name": inst.name,
        "family": d.family.value,
        "k": d.k,
        "n": d.n,
        "seed": inst.seed,
        "objects": [list(o) for o in inst.objects],
        "init": sorted(list(lit) for lit in inst.init),
        "goal": [list(lit) for lit in inst.goal],
        "symbols": dict(sorted(inst.symbols.items())),
        "scene": inst.scene.to_dict() if inst.scene is not None else None,
    }


def problem_from_dict(data: Mapping[str, Any]) -> ProblemInstance:
    domain = build_domain(data["family"], data["k"], data.get("n"))
    scene = SceneGraph.from_dict(data["scene"], strict=False) if data.get("scene") else None
    return ProblemInstance(
        name=data["name"],
        domain=domain,
        objects=tuple(tuple(o) for o in data["objects"]),
        init=frozenset(tuple(lit) for lit in data["init"]),
        goal=tuple(tuple(lit) for lit in data["goal"]),
        scene=scene,
        symbols=dict(data.get("symbols", {})),
        seed=data.get("seed"),
    )


def problem_to_json(inst: ProblemInstance) -> str:
    return json.dumps(problem_to_dict(inst), sort_keys=True, indent=1)


def problem_from_json(text: str) -> ProblemInstance:
    return problem_from_dict(json.loads(text))
