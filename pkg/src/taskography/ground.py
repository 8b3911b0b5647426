"""Grounding of operator schemas into a propositional STRIPS problem.

States are Python ints used as bitsets over the dense atom table.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

from .domain import Atom, OperatorSchema, ProblemInstance

State = int


@dataclass(frozen=True, eq=False)
class GroundAction:
    name: str
    args: tuple[str, ...]
    pre: tuple[int, ...]
    pre_neg: tuple[int, ...]
    add: tuple[int, ...]
    delete: tuple[int, ...]
    cost: int = 1
    pre_mask: int = field(default=0, repr=False)
    neg_mask: int = field(default=0, repr=False)
    add_mask: int = field(default=0, repr=False)
    del_mask: int = field(default=0, repr=False)

    @property
    def signature(self) -> tuple[str, ...]:
        return (self.name, *self.args)

    def applicable(self, state: State) -> bool:
        return state & self.pre_mask == self.pre_mask and not state & self.neg_mask

    def apply(self, state: State) -> State:
        return (state & ~self.del_mask) | self.add_mask

    def __str__(self) -> str:
        return "(" + " ".join(self.signature) + ")"


def _mask(ids: Iterable[int]) -> int:
    m = 0
    for i in ids:
        m |= 1 << i
    return m


class StripsProblem:
    """Grounded problem: atom table, ground actions, initial state and goal."""

    def __init__(self, atoms, actions, init, goal, static_true=frozenset(), name=""):
        self.name = name
        self.atoms: tuple[Atom, ...] = tuple(atoms)
        self.atom_index = {a: i for i, a in enumerate(self.atoms)}
        self.actions: tuple[GroundAction, ...] = tuple(actions)
        self.init = frozenset(init)
        self.goal = frozenset(goal)
        self.static_true = frozenset(static_true)
        self.init_state: State = _mask(self.init)
        self.goal_mask: int = _mask(self.goal)
        n = len(self.atoms)
        for a in self.actions:
            for i in (*a.pre, *a.pre_neg, *a.add, *a.delete):
                if not 0 <= i < n:
                    raise ValueError(f"{a}: atom id {i} out of range")
            if set(a.add) & set(a.delete):
                raise ValueError(f"{a}: add and delete overlap")
        self.object_index: dict[str, frozenset[int]] = {}
        idx = defaultdict(set)
        for i, atom in enumerate(self.atoms):
            for arg in atom[1:]:
                idx[arg].add(i)
        self.object_index = {o: frozenset(s) for o, s in idx.items()}
        self._build_indices()

    def _build_indices(self) -> None:
        n = len(self.atoms)
        self.pre_of: list[list[int]] = [[] for _ in range(n)]
        self.no_pre: list[int] = []
        self.achievers: list[list[int]] = [[] for _ in range(n)]
        # successor generation: bucket actions by one positive precondition
        buckets: dict[int, list[int]] = defaultdict(list)
        free: list[int] = []
        for ai, a in enumerate(self.actions):
            for p in a.pre:
                self.pre_of[p].append(ai)
            for e in a.add:
                self.achievers[e].append(ai)
            if a.pre:
                buckets[a.pre[-1]].append(ai)
            else:
                self.no_pre.append(ai)
                free.append(ai)
        self.buckets = sorted(buckets.items())
        self.bucket_of = dict(self.buckets)
        self.free_actions = free
        self.pre_len = [len(a.pre) for a in self.actions]

    def atom_id(self, atom: Atom) -> int:
        return self.atom_index[tuple(atom)]

    def state_of(self, atoms: Iterable[Atom]) -> State:
        return _mask(self.atom_index[tuple(a)] for a in atoms)

    def atoms_of(self, state: State) -> list[Atom]:
        return [self.atoms[i] for i in bits(state)]

    def is_goal(self, state: State) -> bool:
        return state & self.goal_mask == self.goal_mask

    def applicable(self, state: State) -> list[int]:
        out = list(self.free_actions)
        acts = self.actions
        for atom_id in bits(state):
            for ai in self.bucket_of.get(atom_id, ()):
                if acts[ai].applicable(state):
                    out.append(ai)
        out.sort()
        return out

    def action_by_signature(self) -> dict[tuple[str, ...], int]:
        return {a.signature: i for i, a in enumerate(self.actions)}

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "atoms": [list(a) for a in self.atoms],
            "actions": [
                {"name": a.name, "args": list(a.args), "pre": list(a.pre), "pre_neg": list(a.pre_neg),
                 "add": list(a.add), "del": list(a.delete), "cost": a.cost}
                for a in self.actions
            ],
            "init": sorted(self.init),
            "goal": sorted(self.goal),
        }

    def dump_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def bits(state: int) -> Iterator[int]:
    while state:
        low = state & -state
        yield low.bit_length() - 1
        state ^= low


# ---------------------------------------------------------------------------


class _InitIndex:
    def __init__(self, atoms: Iterable[Atom]):
        self.by_pred: dict[str, list[tuple[str, ...]]] = defaultdict(list)
        for a in atoms:
            self.by_pred[a[0]].append(tuple(a[1:]))
        self._pos: dict[tuple[str, int], dict[str, list[tuple[str, ...]]]] = {}

    def matching(self, pred: str, bound: dict[int, str]) -> list[tuple[str, ...]]:
        rows = self.by_pred.get(pred, [])
        if not bound:
            return rows
        pos, val = next(iter(bound.items()))
        key = (pred, pos)
        index = self._pos.get(key)
        if index is None:
            index = defaultdict(list)
            for r in rows:
                index[r[pos]].append(r)
            self._pos[key] = index
        cands = index.get(val, [])
        if len(bound) == 1:
            return cands
        return [r for r in cands if all(r[p] == v for p, v in bound.items())]


def _join_order(literals: list[Atom]) -> list[Atom]:
    order, bound, remaining = [], set(), list(literals)
    while remaining:
        best = max(remaining, key=lambda lit: (sum(a in bound for a in lit[1:]), -len(lit)))
        remaining.remove(best)
        order.append(best)
        bound.update(a for a in best[1:] if a.startswith("?"))
    return order


def _bindings(schema: OperatorSchema, join: list[Atom], index: _InitIndex,
              objects_by_type: dict[str, list[str]], object_type: dict[str, str]) -> Iterator[dict[str, str]]:
    ptype = dict(schema.params)
    params = [v for v, _ in schema.params]

    def rec(i: int, binding: dict[str, str]):
        if i == len(join):
            free = [p for p in params if p not in binding]
            yield from enum(free, 0, binding)
            return
        lit = join[i]
        bound = {}
        for pos, arg in enumerate(lit[1:]):
            if not arg.startswith("?"):
                bound[pos] = arg
            elif arg in binding:
                bound[pos] = binding[arg]
        for row in index.matching(lit[0], bound):
            new = dict(binding)
            ok = True
            for arg, val in zip(lit[1:], row):
                if arg.startswith("?"):
                    if object_type.get(val) != ptype[arg]:
                        ok = False
                        break
                    if new.setdefault(arg, val) != val:
                        ok = False
                        break
            if ok:
                yield from rec(i + 1, new)

    def enum(free: list[str], j: int, binding: dict[str, str]):
        if j == len(free):
            yield binding
            return
        for obj in objects_by_type.get(ptype[free[j]], ()):
            yield from enum(free, j + 1, {**binding, free[j]: obj})

    yield from rec(0, {})


def _subst(lit: Atom, binding: dict[str, str]) -> Atom:
    return (lit[0], *(binding.get(a, a) for a in lit[1:]))


def ground(inst: ProblemInstance) -> StripsProblem:
    """Enumerate type-consistent bindings, discarding statically false ones.

    Predicates that no operator adds are only true where the initial state
    says so; positive preconditions on them are joined against the initial
    state.  Static atoms are compiled away; ground actions without net effect
    are dropped.
    """
    domain = inst.domain
    added = {lit[0] for op in domain.operators for lit in op.add}
    deleted = {lit[0] for op in domain.operators for lit in op.delete}
    static = {p.name for p in domain.predicates} - added - deleted
    init = set(inst.init)
    index = _InitIndex(init)
    objects_by_type: dict[str, list[str]] = defaultdict(list)
    for o, t in sorted(inst.objects):
        objects_by_type[t].append(o)
    object_type = dict(inst.objects)

    raw: list[tuple[int, tuple[str, ...], frozenset, frozenset, frozenset, frozenset, int]] = []
    for si, schema in enumerate(domain.operators):
        join = _join_order([lit for lit in schema.pre if lit[0] not in added])
        params = [v for v, _ in schema.params]
        for binding in _bindings(schema, join, index, objects_by_type, object_type):
            pre = {_subst(l, binding) for l in schema.pre}
            neg = {_subst(l, binding) for l in schema.pre_neg}
            # a negated atom that holds initially and is never deleted stays true
            if any(l[0] not in deleted and l in init for l in neg):
                continue
            pre_dyn = frozenset(l for l in pre if l[0] not in static)
            neg_dyn = frozenset(l for l in neg if l[0] not in static)
            if pre_dyn & neg_dyn:
                continue
            add = frozenset(_subst(l, binding) for l in schema.add)
            dele = frozenset(_subst(l, binding) for l in schema.delete) - add
            if add <= pre_dyn and not dele:
                continue
            raw.append((si, tuple(binding[p] for p in params), pre_dyn, neg_dyn, add, dele, schema.cost))

    static_true = frozenset(a for a in init if a[0] in static)
    atom_set = {a for a in init if a[0] not in static}
    atom_set.update(inst.goal)
    for _, _, pre, neg, add, dele, _ in raw:
        atom_set |= pre | neg | add | dele
    atoms = sorted(atom_set)
    aid = {a: i for i, a in enumerate(atoms)}
    raw.sort(key=lambda r: (r[0], r[1]))
    actions = []
    for si, args, pre, neg, add, dele, cost in raw:
        pre_i = tuple(sorted(aid[a] for a in pre))
        neg_i = tuple(sorted(aid[a] for a in neg))
        add_i = tuple(sorted(aid[a] for a in add))
        del_i = tuple(sorted(aid[a] for a in dele))
        actions.append(GroundAction(
            domain.operators[si].name, args, pre_i, neg_i, add_i, del_i, cost,
            _mask(pre_i), _mask(neg_i), _mask(add_i), _mask(del_i),
        ))
    return StripsProblem(
        atoms, actions,
        init=(aid[a] for a in init if a[0] not in static),
        goal=(aid[a] for a in inst.goal),
        static_true=static_true,
        name=inst.name,
    )


def stats(sp: StripsProblem) -> dict[str, int]:
    return {"num_operators": len(sp.actions), "num_state_vars": len(sp.atoms)}


def avg_branching_factor(sp: StripsProblem, states: Iterable[State]) -> Fraction:
    states = list(states)
    if not states:
        raise ValueError("branching factor needs at least one state")
    return Fraction(sum(len(sp.applicable(s)) for s in states), len(states))
