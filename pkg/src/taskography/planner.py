"""Forward-search planners over grounded STRIPS problems.

Satisficing: greedy best-first search with h_ff or h_add.  Optimal: A* with
h_max and an exhaustive breadth-first oracle.  All searches are single
threaded, deterministic, and break ties FIFO.
"""

from __future__ import annotations

import heapq
import time
from collections import deque
from dataclasses import dataclass
from enum import Enum
from itertools import count
from typing import Iterable, Sequence

from .ground import GroundAction, State, StripsProblem, bits

INF = float("inf")

ALGORITHMS = ("gbfs_hff", "gbfs_hadd", "astar_hmax", "bfs_oracle")


class Status(str, Enum):
    SOLVED = "solved"
    TIMEOUT = "timeout"
    UNSOLVABLE = "unsolvable"


class ExpansionCapExceeded(RuntimeError):
    """The oracle expanded more states than its configured cap."""


@dataclass(frozen=True)
class PlannerConfig:
    algorithm: str = "gbfs_hff"
    timeout: float = 30.0
    tie_break: str = "fifo"
    seed: int = 0
    max_expansions: int = 1_000_000

    def __post_init__(self):
        object.__setattr__(self, "algorithm", self.algorithm.replace("-", "_"))
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if not self.timeout > 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        if self.tie_break != "fifo":
            raise ValueError("only FIFO tie-breaking is supported")


@dataclass
class Plan:
    actions: list[GroundAction]
    status: Status
    wall_time: float = 0.0
    expansions: int = 0
    evaluations: int = 0
    algorithm: str = ""

    @property
    def cost(self) -> int:
        return sum(a.cost for a in self.actions)

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def solved(self) -> bool:
        return self.status == Status.SOLVED

    def steps(self) -> list[tuple[str, ...]]:
        return [a.signature for a in self.actions]

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "algorithm": self.algorithm,
            "length": len(self.actions) if self.solved else None,
            "cost": self.cost if self.solved else None,
            "wall_time": self.wall_time,
            "expansions": self.expansions,
            "evaluations": self.evaluations,
            "actions": [list(s) for s in self.steps()],
        }

    def to_text(self) -> str:
        return "".join(f"{a}\n" for a in self.actions)


@dataclass
class Validation:
    ok: bool
    failed_step: int | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


# ---------------------------------------------------------------------------
# Transitions


def successors(sp: StripsProblem, state: State) -> list[tuple[GroundAction, State]]:
    acts = sp.actions
    return [(acts[i], acts[i].apply(state)) for i in sp.applicable(state)]


def validate_plan(sp: StripsProblem, plan: Plan | Sequence[GroundAction]) -> Validation:
    """Replay ``plan`` from the initial state; the final state must contain the goal."""
    actions = plan.actions if isinstance(plan, Plan) else plan
    state = sp.init_state
    for i, a in enumerate(actions):
        if not a.applicable(state):
            return Validation(False, i, f"{a} is not applicable")
        state = a.apply(state)
    if not sp.is_goal(state):
        return Validation(False, len(actions), "goal not reached")
    return Validation(True)


def replay(sp: StripsProblem, actions: Iterable[GroundAction]) -> list[State]:
    states = [sp.init_state]
    for a in actions:
        states.append(a.apply(states[-1]))
    return states


# ---------------------------------------------------------------------------
# Delete-relaxation heuristics


def _explore(sp: StripsProblem, state: State, combine_max: bool):
    """Generalized Dijkstra over the delete relaxation.

    Negative preconditions are ignored.  Stops once every goal atom is settled.
    Returns (atom costs, best supporters); costs of unreached goals stay INF.
    """
    n = len(sp.atoms)
    cost = [INF] * n
    support = [-1] * n
    done = [False] * n
    unsat = sp.pre_len[:]
    acc = [0] * len(sp.actions)
    acts = sp.actions
    pre_of = sp.pre_of
    heap: list[tuple[int, int]] = []
    for i in bits(state):
        cost[i] = 0
        heap.append((0, i))
    for ai in sp.no_pre:
        c = acts[ai].cost
        for e in acts[ai].add:
            if c < cost[e]:
                cost[e] = c
                support[e] = ai
                heap.append((c, e))
    heapq.heapify(heap)
    goals_left = sum(1 for g in sp.goal if not (state >> g) & 1)
    goal_set = sp.goal
    pop, push = heapq.heappop, heapq.heappush
    while heap and goals_left:
        c, i = pop(heap)
        if done[i]:
            continue
        done[i] = True
        if i in goal_set and c > 0:
            goals_left -= 1
            if not goals_left:
                break
        for ai in pre_of[i]:
            if combine_max:
                if c > acc[ai]:
                    acc[ai] = c
            else:
                acc[ai] += c
            unsat[ai] -= 1
            if unsat[ai] == 0:
                a = acts[ai]
                nc = acc[ai] + a.cost
                for e in a.add:
                    if nc < cost[e]:
                        cost[e] = nc
                        support[e] = ai
                        push(heap, (nc, e))
    return cost, support


def h_add(sp: StripsProblem, state: State) -> float:
    cost, _ = _explore(sp, state, combine_max=False)
    return sum(cost[g] for g in sp.goal)


def h_max(sp: StripsProblem, state: State) -> float:
    cost, _ = _explore(sp, state, combine_max=True)
    return max((cost[g] for g in sp.goal), default=0)


def h_ff(sp: StripsProblem, state: State) -> tuple[float, list[int]]:
    """Relaxed plan extracted from h_add best supporters; returns (cost, action ids)."""
    cost, support = _explore(sp, state, combine_max=False)
    if any(cost[g] == INF for g in sp.goal):
        return INF, []
    acts = sp.actions
    chosen: set[int] = set()
    stack = [g for g in sp.goal if cost[g] > 0]
    seen = set(stack)
    while stack:
        atom = stack.pop()
        ai = support[atom]
        if ai in chosen:
            continue
        chosen.add(ai)
        for p in acts[ai].pre:
            if cost[p] > 0 and p not in seen:
                seen.add(p)
                stack.append(p)
    relaxed = sorted(chosen)
    return sum(acts[ai].cost for ai in relaxed), relaxed


def _h_ff_value(sp: StripsProblem, state: State) -> float:
    return h_ff(sp, state)[0]


# ---------------------------------------------------------------------------
# Search


def _extract(parents: dict, state: State, acts) -> list[GroundAction]:
    path = []
    while True:
        prev = parents[state]
        if prev is None:
            break
        state, ai = prev
        path.append(acts[ai])
    path.reverse()
    return path


def gbfs(sp: StripsProblem, config: PlannerConfig = PlannerConfig(), heuristic: str | None = None) -> Plan:
    """Eager greedy best-first search with duplicate detection."""
    if heuristic is None:
        heuristic = "add" if config.algorithm == "gbfs_hadd" else "ff"
    hfun = h_add if heuristic == "add" else _h_ff_value
    name = f"gbfs_h{heuristic}"
    start = time.perf_counter()
    deadline = start + config.timeout
    acts = sp.actions
    init = sp.init_state
    if sp.is_goal(init):
        return Plan([], Status.SOLVED, time.perf_counter() - start, 0, 0, name)
    h0 = hfun(sp, init)
    evaluations = 1
    if h0 == INF:
        return Plan([], Status.UNSOLVABLE, time.perf_counter() - start, 0, evaluations, name)
    tie = count()
    open_list = [(h0, next(tie), init)]
    parents: dict[State, tuple[State, int] | None] = {init: None}
    expansions = 0
    while open_list:
        if time.perf_counter() > deadline:
            return Plan([], Status.TIMEOUT, time.perf_counter() - start, expansions, evaluations, name)
        _, _, state = heapq.heappop(open_list)
        expansions += 1
        for ai in sp.applicable(state):
            nxt = acts[ai].apply(state)
            if nxt in parents:
                continue
            parents[nxt] = (state, ai)
            if sp.is_goal(nxt):
                return Plan(_extract(parents, nxt, acts), Status.SOLVED,
                            time.perf_counter() - start, expansions, evaluations, name)
            h = hfun(sp, nxt)
            evaluations += 1
            if h < INF:
                heapq.heappush(open_list, (h, next(tie), nxt))
    return Plan([], Status.UNSOLVABLE, time.perf_counter() - start, expansions, evaluations, name)


def astar(sp: StripsProblem, config: PlannerConfig = PlannerConfig("astar_hmax")) -> Plan:
    """A* with h_max; optimal for the unit-cost problems built here."""
    start = time.perf_counter()
    deadline = start + config.timeout
    acts = sp.actions
    init = sp.init_state
    h0 = h_max(sp, init)
    evaluations = 1
    if h0 == INF:
        return Plan([], Status.UNSOLVABLE, time.perf_counter() - start, 0, evaluations, "astar_hmax")
    tie = count()
    g = {init: 0}
    hcache = {init: h0}
    parents: dict[State, tuple[State, int] | None] = {init: None}
    open_list = [(h0, h0, next(tie), init)]
    closed: set[State] = set()
    expansions = 0
    while open_list:
        if time.perf_counter() > deadline:
            return Plan([], Status.TIMEOUT, time.perf_counter() - start, expansions, evaluations, "astar_hmax")
        f, _, _, state = heapq.heappop(open_list)
        if state in closed or f > g[state] + hcache[state]:
            continue
        if sp.is_goal(state):
            return Plan(_extract(parents, state, acts), Status.SOLVED,
                        time.perf_counter() - start, expansions, evaluations, "astar_hmax")
        closed.add(state)
        expansions += 1
        if expansions > config.max_expansions:
            raise ExpansionCapExceeded(f"A* expanded more than {config.max_expansions} states")
        gs = g[state]
        for ai in sp.applicable(state):
            a = acts[ai]
            nxt = a.apply(state)
            ng = gs + a.cost
            if ng < g.get(nxt, INF):
                if nxt not in hcache:
                    hcache[nxt] = h_max(sp, nxt)
                    evaluations += 1
                h = hcache[nxt]
                if h == INF:
                    continue
                g[nxt] = ng
                parents[nxt] = (state, ai)
                closed.discard(nxt)
                heapq.heappush(open_list, (ng + h, h, next(tie), nxt))
    return Plan([], Status.UNSOLVABLE, time.perf_counter() - start, expansions, evaluations, "astar_hmax")


def bfs_oracle(sp: StripsProblem, config: PlannerConfig = PlannerConfig("bfs_oracle")) -> Plan:
    """Exhaustive breadth-first search: shortest plan, or proof of unsolvability."""
    start = time.perf_counter()
    deadline = start + config.timeout
    acts = sp.actions
    init = sp.init_state
    if sp.is_goal(init):
        return Plan([], Status.SOLVED, time.perf_counter() - start, 0, 0, "bfs_oracle")
    parents: dict[State, tuple[State, int] | None] = {init: None}
    queue = deque([init])
    expansions = 0
    while queue:
        if time.perf_counter() > deadline:
            return Plan([], Status.TIMEOUT, time.perf_counter() - start, expansions, 0, "bfs_oracle")
        state = queue.popleft()
        expansions += 1
        if expansions > config.max_expansions:
            raise ExpansionCapExceeded(f"BFS expanded more than {config.max_expansions} states")
        for ai in sp.applicable(state):
            nxt = acts[ai].apply(state)
            if nxt in parents:
                continue
            parents[nxt] = (state, ai)
            if sp.is_goal(nxt):
                return Plan(_extract(parents, nxt, acts), Status.SOLVED,
                            time.perf_counter() - start, expansions, 0, "bfs_oracle")
            queue.append(nxt)
    return Plan([], Status.UNSOLVABLE, time.perf_counter() - start, expansions, 0, "bfs_oracle")


def solve(sp: StripsProblem, config: PlannerConfig = PlannerConfig()) -> Plan:
    if config.algorithm in ("gbfs_hff", "gbfs_hadd"):
        return gbfs(sp, config)
    if config.algorithm == "astar_hmax":
        return astar(sp, config)
    return bfs_oracle(sp, config)
