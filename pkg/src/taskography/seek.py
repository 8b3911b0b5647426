"""Score-based object pruning with an incremental plan-validate-replan loop.

Objects scoring at least the current threshold are kept, together with the
goal objects and the agent.  With closure on, the kept set is closed under
scene-graph ancestors, room paths and movement entry points.  After every
failed attempt the threshold decays geometrically; once it falls below the
floor a last attempt runs on the full problem.
"""

from __future__ import annotations

import json
import math
import time
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import AGENT, DomainError, ProblemInstance, restrict_problem
from .ground import StripsProblem, ground
from .planner import Plan, PlannerConfig, Status, solve, validate_plan
from .scrub import close_structure

KINDS = ("room", "place", "location", "receptacle", "item")
FEATURES = (
    *(f"kind_{k}" for k in KINDS),
    "class_match",
    "same_room_as_goal",
    "agent_room_distance",
    "goal_room_distance",
    "goal_ancestor",
    "openable",
)
HIER_LEVELS = ("room", "place", "location", "object")


class SeekError(DomainError):
    pass


# ---------------------------------------------------------------------------
# Per-object features


def scored_objects(inst: ProblemInstance) -> list[str]:
    """Scene-backed symbols a scorer ranks; the agent is always kept and never scored."""
    return sorted(s for s in inst.symbols if s != AGENT)


def goal_scene_objects(inst: ProblemInstance) -> set[str]:
    """Scene objects the goal is about: the literal args, or every class-matching instance."""
    if not inst.domain.family.lifted:
        return {o for o in inst.goal_objects() if o in inst.symbols}
    item_classes = {lit[1] for lit in inst.goal}
    recep_classes = {lit[2] for lit in inst.goal}
    out = set()
    for lit in inst.init:
        if lit[0] == "itemClass" and lit[2] in item_classes:
            out.add(lit[1])
        elif lit[0] == "recepClass" and lit[2] in recep_classes:
            out.add(lit[1])
    return out


def _multi_source_hops(scene, sources: Iterable[str]) -> dict[str, int]:
    dist = {s: 0 for s in sources}
    queue = deque(sorted(dist))
    while queue:
        r = queue.popleft()
        for nb in scene.neighbors(r):
            if nb not in dist:
                dist[nb] = dist[r] + 1
                queue.append(nb)
    return dist


def object_features(inst: ProblemInstance) -> tuple[list[str], np.ndarray]:
    scene = inst.scene
    if scene is None:
        raise SeekError("scoring needs the problem's scene graph")
    syms = scored_objects(inst)
    node_of = inst.symbols
    goal_nodes = {node_of[o] for o in goal_scene_objects(inst)}
    goal_labels = {(scene.kind(n), scene.node(n).attributes.class_label) for n in goal_nodes}
    goal_rooms = {scene.room_of(n) for n in goal_nodes} - {None}
    goal_anc = {a for n in goal_nodes for a in scene.ancestors(n)}
    agent_room = scene.room_of(AGENT) if AGENT in scene else None
    d_agent = _multi_source_hops(scene, [agent_room] if agent_room else [])
    d_goal = _multi_source_hops(scene, goal_rooms)
    scale = len(scene.rooms()) or 1

    def norm(d: dict[str, int], room: str | None) -> float:
        if room is None or room not in d:
            return 1.0
        return d[room] / scale

    X = np.zeros((len(syms), len(FEATURES)))
    for i, s in enumerate(syms):
        n = node_of[s]
        node = scene.node(n)
        room = scene.room_of(n)
        row = X[i]
        if node.kind in KINDS:
            row[KINDS.index(node.kind)] = 1.0
        row[5] = float((node.kind, node.attributes.class_label) in goal_labels)
        row[6] = float(room in goal_rooms)
        row[7] = norm(d_agent, room)
        row[8] = norm(d_goal, room)
        row[9] = float(n in goal_anc)
        row[10] = float(node.attributes.openable)
    return syms, X


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


# ---------------------------------------------------------------------------
# Scorers


class Scorer:
    """Maps each scene-backed object of a problem to an importance in [0, 1]."""

    def scores(self, inst: ProblemInstance) -> dict[str, float]:
        raise NotImplementedError

    def score(self, inst: ProblemInstance, obj: str) -> float:
        return self.scores(inst)[obj]

    def to_dict(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} is not serializable")


@dataclass(frozen=True)
class ConstantScorer(Scorer):
    value: float = 0.0

    def scores(self, inst):
        return {s: self.value for s in scored_objects(inst)}


@dataclass(frozen=True)
class RandomScorer(Scorer):
    seed: int = 0

    def scores(self, inst):
        out = {}
        for s in scored_objects(inst):
            rng = np.random.default_rng([self.seed, zlib.crc32(s.encode())])
            out[s] = float(rng.random())
        return out

    def to_dict(self):
        return {"type": "random", "seed": self.seed}


@dataclass(frozen=True)
class LabelScorer(Scorer):
    """Scores 1 for labeled objects and 0 otherwise (an oracle when labels come from a plan)."""

    positives: frozenset[str]

    @classmethod
    def from_plan(cls, inst: ProblemInstance, plan: Plan | Sequence) -> LabelScorer:
        return cls(frozenset(s for s, y in plan_labels(inst, plan).items() if y))

    def scores(self, inst):
        return {s: float(s in self.positives) for s in scored_objects(inst)}


@dataclass(frozen=True)
class FeatureScorer(Scorer):
    weights: tuple[float, ...]
    bias: float = 0.0
    feature_names: tuple[str, ...] = FEATURES

    def __post_init__(self):
        if len(self.weights) != len(self.feature_names):
            raise SeekError(f"{len(self.weights)} weights for {len(self.feature_names)} features")
        if tuple(self.feature_names) != FEATURES:
            raise SeekError(f"model features {self.feature_names} do not match {FEATURES}")

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(X @ np.asarray(self.weights) + self.bias)

    def scores(self, inst):
        syms, X = object_features(inst)
        return dict(zip(syms, self.predict(X).tolist()))

    def to_dict(self):
        return {"type": "feature", "feature_names": list(self.feature_names),
                "weights": list(self.weights), "bias": self.bias}


def _level(kind: str) -> str:
    return "object" if kind in ("receptacle", "item") else kind


@dataclass(frozen=True)
class HierarchicalScorer(Scorer):
    """One scorer per scene-graph level; an object's score is scaled by its room's score."""

    levels: Mapping[str, FeatureScorer]

    def __post_init__(self):
        missing = set(HIER_LEVELS) - set(self.levels)
        if missing:
            raise SeekError(f"hierarchical scorer lacks levels {sorted(missing)}")

    def scores(self, inst):
        syms, X = object_features(inst)
        scene, node_of = inst.scene, inst.symbols
        sym_of = inst.symbol_of()
        per_level = {lv: sc.predict(X) for lv, sc in self.levels.items()}
        raw = {s: float(per_level[_level(scene.kind(node_of[s]))][i]) for i, s in enumerate(syms)}
        out = {}
        for s in syms:
            n = node_of[s]
            if scene.kind(n) == "room":
                out[s] = raw[s]
                continue
            room = scene.room_of(n)
            out[s] = raw[s] * (raw[sym_of[room]] if room is not None and room in sym_of else 0.0)
        return out

    def to_dict(self):
        return {"type": "hierarchical", "levels": {lv: sc.to_dict() for lv, sc in sorted(self.levels.items())}}


def scorer_from_dict(d: Mapping) -> Scorer:
    kind = d.get("type")
    if kind == "feature":
        return FeatureScorer(tuple(float(w) for w in d["weights"]), float(d["bias"]), tuple(d["feature_names"]))
    if kind == "hierarchical":
        return HierarchicalScorer({lv: scorer_from_dict(sd) for lv, sd in d["levels"].items()})
    if kind == "random":
        return RandomScorer(int(d["seed"]))
    raise SeekError(f"unknown scorer model type {kind!r}")


def save_model(scorer: Scorer, path) -> None:
    with open(path, "w") as fh:
        json.dump(scorer.to_dict(), fh, indent=1)


def load_model(path) -> Scorer:
    with open(path) as fh:
        return scorer_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainingExample:
    instance: ProblemInstance
    plan: list[tuple[str, ...]]
    labels: dict[str, int]

    def __post_init__(self):
        known = set(scored_objects(self.instance))
        bad = [s for s, y in self.labels.items() if y and s not in known]
        if bad:
            raise SeekError(f"positive labels for unknown objects {bad}")


def _steps(plan: Plan | Sequence) -> list[tuple[str, ...]]:
    if isinstance(plan, Plan):
        return plan.steps()
    return [tuple(s.signature) if hasattr(s, "signature") else tuple(s) for s in plan]


def plan_labels(inst: ProblemInstance, plan: Plan | Sequence) -> dict[str, int]:
    """Objects in some plan step, plus their scene ancestors, are positive."""
    steps = _steps(plan)
    scene, node_of = inst.scene, inst.symbols
    sym_of = inst.symbol_of()
    pos = set()
    for step in steps:
        for arg in step[1:]:
            if arg in node_of:
                pos.add(arg)
                pos.update(sym_of[a] for a in scene.ancestors(node_of[arg]) if a in sym_of)
    return {s: int(s in pos) for s in scored_objects(inst)}


def make_example(inst: ProblemInstance, plan: Plan | Sequence) -> TrainingExample:
    steps = _steps(plan)
    return TrainingExample(inst, steps, plan_labels(inst, steps))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3000
    learning_rate: float = 0.5
    tolerance: float = 1e-8
    l2: float = 1e-4
    balanced: bool = False
    seed: int = 0


def _stack(examples: Sequence[TrainingExample], level: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for ex in examples:
        syms, X = object_features(ex.instance)
        scene, node_of = ex.instance.scene, ex.instance.symbols
        for s, row in zip(syms, X):
            if level is not None and _level(scene.kind(node_of[s])) != level:
                continue
            xs.append(row)
            ys.append(ex.labels.get(s, 0))
    if not xs:
        return np.zeros((0, len(FEATURES))), np.zeros(0)
    return np.vstack(xs), np.asarray(ys, dtype=float)


def fit_logistic(X: np.ndarray, y: np.ndarray, config: TrainConfig = TrainConfig()) -> FeatureScorer:
    """Logistic regression by full-batch gradient descent, optionally class-balanced."""
    if len(y) == 0 or y.min() == y.max():
        raise SeekError("training labels must contain both classes")
    n_pos = y.sum()
    n_neg = len(y) - n_pos
    if config.balanced:
        sw = np.where(y > 0, len(y) / (2 * n_pos), len(y) / (2 * n_neg))
    else:
        sw = np.ones(len(y))
    sw /= sw.sum()
    w = np.zeros(X.shape[1])
    b = 0.0
    prev = math.inf
    for _ in range(config.epochs):
        p = _sigmoid(X @ w + b)
        eps = 1e-12
        loss = -float(np.sum(sw * (y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))) \
            + 0.5 * config.l2 * float(w @ w)
        if abs(prev - loss) < config.tolerance:
            break
        prev = loss
        r = sw * (p - y)
        w -= config.learning_rate * (X.T @ r + config.l2 * w)
        b -= config.learning_rate * float(r.sum())
    return FeatureScorer(tuple(float(v) for v in w), float(b))


def train_scorer(examples: Sequence[TrainingExample], config: TrainConfig = TrainConfig()) -> FeatureScorer:
    if not examples:
        raise SeekError("need at least one training example")
    X, y = _stack(examples)
    return fit_logistic(X, y, config)


def train_hierarchical(examples: Sequence[TrainingExample], config: TrainConfig = TrainConfig()) -> HierarchicalScorer:
    if not examples:
        raise SeekError("need at least one training example")
    levels = {}
    for lv in HIER_LEVELS:
        X, y = _stack(examples, lv)
        try:
            levels[lv] = fit_logistic(X, y, config)
        except SeekError as exc:
            raise SeekError(f"level {lv!r}: {exc}") from None
    return HierarchicalScorer(levels)


def accuracy(scorer: Scorer, examples: Sequence[TrainingExample], threshold: float = 0.5) -> float:
    hits = total = 0
    for ex in examples:
        for s, v in scorer.scores(ex.instance).items():
            hits += int((v >= threshold) == bool(ex.labels.get(s, 0)))
            total += 1
    return hits / max(1, total)


# ---------------------------------------------------------------------------
# Pruning and the replanning loop


@dataclass(frozen=True)
class SeekConfig:
    t0: float = 0.9
    gamma: float = 0.9
    t_min: float = 0.01
    per_attempt_timeout: float = 30.0
    global_timeout: float = 300.0
    closure: bool = True

    def __post_init__(self):
        if not 0.0 <= self.t_min <= self.t0 < 1.0:
            raise ValueError(f"need 0 <= t_min <= t0 < 1, got t_min={self.t_min}, t0={self.t0}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.per_attempt_timeout <= 0 or self.global_timeout <= 0:
            raise ValueError("timeouts must be positive")

    def max_attempts(self) -> int:
        """Thresholded attempts before the fallback; zero floor means unbounded."""
        if self.t_min == 0.0 or self.t0 == 0.0:
            return 1 if self.t0 == 0.0 else math.inf
        return max(0, math.floor(math.log(self.t_min / self.t0) / math.log(self.gamma) + 1e-9)) + 1


def seek_prune(inst: ProblemInstance, scorer: Scorer | Mapping[str, float], t: float,
               closure: bool = True) -> ProblemInstance:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {t}")
    scores = scorer if isinstance(scorer, Mapping) else scorer.scores(inst)
    node_of = inst.symbols
    keep = {node_of[s] for s, v in scores.items() if v >= t}
    keep |= {node_of[o] for o in inst.goal_objects() if o in node_of}
    if AGENT in node_of:
        keep.add(node_of[AGENT])
    if closure:
        keep, _, _ = close_structure(inst.scene, keep)
    return restrict_problem(inst, keep)


@dataclass
class Attempt:
    threshold: float
    retained: int
    status: str
    valid: bool
    fallback: bool = False
    wall_time: float = 0.0


@dataclass
class SeekTrace:
    plan: Plan | None
    status: str
    attempts: list[Attempt] = field(default_factory=list)
    wall_time: float = 0.0
    total_objects: int = 0

    @property
    def replan_count(self) -> int:
        return max(0, len(self.attempts) - 1)

    @property
    def solved(self) -> bool:
        return self.status == Status.SOLVED.value

    @property
    def thresholds(self) -> list[float]:
        return [a.threshold for a in self.attempts if not a.fallback]

    @property
    def used_fraction(self) -> float:
        if not self.attempts:
            return 0.0
        return self.attempts[-1].retained / max(1, self.total_objects)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "replan_count": self.replan_count,
            "wall_time": self.wall_time,
            "plan": self.plan.steps() if self.plan is not None else None,
            "attempts": [a.__dict__ for a in self.attempts],
        }


def incremental_plan(
    inst: ProblemInstance,
    scorer: Scorer,
    planner: PlannerConfig = PlannerConfig(),
    config: SeekConfig = SeekConfig(),
    full: StripsProblem | None = None,
) -> SeekTrace:
    """Prune, plan, validate on the full problem; decay the threshold on failure."""
    start = time.perf_counter()
    deadline = start + config.global_timeout
    scores = scorer.scores(inst)
    trace = SeekTrace(None, Status.UNSOLVABLE.value, total_objects=len(inst.objects))
    t = config.t0
    while True:
        fallback = t < config.t_min
        threshold = 0.0 if fallback else t
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            trace.status = Status.TIMEOUT.value
            break
        t_start = time.perf_counter()
        pruned = seek_prune(inst, scores, threshold, config.closure)
        sp = ground(pruned)
        plan = solve(sp, PlannerConfig(planner.algorithm, timeout=min(config.per_attempt_timeout, remaining),
                                       max_expansions=planner.max_expansions))
        valid = False
        if plan.solved:
            if full is None:
                full = ground(inst)
            index = full.action_by_signature()
            mapped = [index.get(a.signature) for a in plan.actions]
            if None not in mapped:
                actions = [full.actions[i] for i in mapped]
                valid = bool(validate_plan(full, actions))
                if valid:
                    plan = Plan(actions, Status.SOLVED, plan.wall_time, plan.expansions,
                                plan.evaluations, plan.algorithm)
        trace.attempts.append(Attempt(threshold, len(pruned.objects), plan.status.value, valid,
                                      fallback, time.perf_counter() - t_start))
        if valid:
            trace.plan, trace.status = plan, Status.SOLVED.value
            break
        if fallback:
            trace.status = plan.status.value if plan.status != Status.SOLVED else Status.UNSOLVABLE.value
            break
        if threshold == 0.0:
            # nothing left to relax: t = 0 was the full problem already
            trace.status = plan.status.value
            break
        t = config.gamma * t
    trace.wall_time = time.perf_counter() - start
    return trace
