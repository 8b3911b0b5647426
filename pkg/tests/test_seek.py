from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import TINY, two_room_problem, tiny_instance
from taskography.bench import SPLIT_PARAMS, build_instances
from taskography.domain import AGENT, build_domain, restrict_problem
from taskography.ground import ground
from taskography.planner import PlannerConfig, bfs_oracle, gbfs, validate_plan
from taskography.scrub import close_structure, scrub
from taskography.seek import FEATURES, HIER_LEVELS, ConstantScorer, FeatureScorer, HierarchicalScorer, \
    LabelScorer, RandomScorer, SeekConfig, SeekError, TrainConfig, accuracy, fit_logistic, incremental_plan, \
    load_model, make_example, object_features, plan_labels, save_model, scored_objects, seek_prune, \
    train_hierarchical, train_scorer

GOAL_ANCESTOR = FEATURES.index("goal_ancestor")


def _scene_nodes(inst):
    return {inst.symbols[o] for o, _ in inst.objects if o in inst.symbols}


def _examples(insts):
    out = []
    for inst in insts:
        plan = gbfs(ground(scrub(inst).instance), PlannerConfig(timeout=30))
        assert plan.solved
        out.append(make_example(inst, plan))
    return out


@pytest.fixture(scope="module")
def rearr_split():
    domain = build_domain("rearrangement", 1)
    train = build_instances(domain, SPLIT_PARAMS["medium"], 40, 1, "train-medium", verify=False)
    held = build_instances(domain, SPLIT_PARAMS["medium"], 10, 2, "test-medium", verify=False)
    return _examples(train), held


# -- pruning -------------------------------------------------------------------------


def test_threshold_zero_is_identity(three_rooms):
    scores = {s: 0.0 for s in scored_objects(three_rooms)}
    pruned = seek_prune(three_rooms, scores, 0.0)
    assert pruned.objects == three_rooms.objects and pruned.init == three_rooms.init


def test_threshold_one_keeps_closure_only(three_rooms):
    pruned = seek_prune(three_rooms, ConstantScorer(0.99), 1.0)
    seeds = {three_rooms.symbols[o] for o in three_rooms.goal_objects()} | {AGENT}
    expect, _, _ = close_structure(three_rooms.scene, seeds)
    assert _scene_nodes(pruned) == expect - {"building", "floor1"}
    assert "roomC" not in expect


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**16), st.floats(0.0, 1.0))
def test_closure_superset_and_rooms(seed, t):
    inst = tiny_instance(seed % 50, params=replace(TINY, rooms_per_floor=4))
    scores = RandomScorer(seed).scores(inst)
    closed = seek_prune(inst, scores, t, closure=True)
    plain = seek_prune(inst, scores, t, closure=False)
    assert set(plain.object_types) <= set(closed.object_types)
    scene = inst.scene
    kept = _scene_nodes(closed)
    for n in kept:
        room = scene.room_of(n)
        assert room is None or room in kept


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**16), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_monotone_in_threshold(seed, a, b):
    lo, hi = sorted((a, b))
    inst = tiny_instance(seed % 50, params=replace(TINY, rooms_per_floor=4))
    scores = RandomScorer(seed).scores(inst)
    for closure in (True, False):
        assert set(seek_prune(inst, scores, hi, closure).object_types) <= \
            set(seek_prune(inst, scores, lo, closure).object_types)


def test_prune_rejects_bad_threshold(two_rooms):
    with pytest.raises(ValueError):
        seek_prune(two_rooms, ConstantScorer(0.5), 1.5)


# -- replanning loop -------------------------------------------------------------------


@pytest.mark.parametrize("t0,gamma,t_min", [(0.9, 0.9, 0.01), (0.5, 0.5, 0.05), (0.8, 0.3, 0.001)])
def test_threshold_law(t0, gamma, t_min):
    inst = two_room_problem(extra_room=True, goal=[("inRecep", "bookC", "shelfB")])
    config = SeekConfig(t0, gamma, t_min)
    # without closure the bare goal objects never suffice, so every threshold gets tried
    trace = incremental_plan(inst, ConstantScorer(0.0), PlannerConfig(), replace(config, closure=False))
    ts = trace.thresholds
    for i, t in enumerate(ts):
        assert t == pytest.approx(t0 * gamma ** i, rel=1e-12)
    bound = math.ceil(math.log(t_min / t0) / math.log(gamma)) + 1
    assert len(ts) <= bound
    assert len(ts) == config.max_attempts()
    assert trace.attempts[-1].fallback and trace.attempts[-1].threshold == 0.0
    assert trace.solved and trace.replan_count == len(trace.attempts) - 1


def test_oracle_scorer_needs_no_replanning(three_rooms):
    full = ground(three_rooms)
    plan = bfs_oracle(full)
    trace = incremental_plan(three_rooms, LabelScorer.from_plan(three_rooms, plan))
    assert trace.solved and trace.replan_count == 0
    assert validate_plan(full, trace.plan)


def test_zero_scorer_uses_closure_first(three_rooms):
    trace = incremental_plan(three_rooms, ConstantScorer(0.0))
    first = trace.attempts[0]
    assert first.threshold == 0.9
    expect = seek_prune(three_rooms, ConstantScorer(0.0), 0.9)
    assert first.retained == len(expect.objects)
    # the goal chain plus room path is sufficient here, so no replan
    assert trace.solved and trace.replan_count == 0


def test_plans_validate_on_full_problem():
    for seed in range(6):
        inst = tiny_instance(seed, "lifted-rearrangement", k=2)
        full = ground(inst)
        trace = incremental_plan(inst, RandomScorer(seed), full=full)
        assert trace.solved
        assert validate_plan(full, trace.plan)


def test_seek_config_validation():
    for bad in (dict(t0=1.0), dict(t_min=0.95), dict(gamma=0.0), dict(gamma=1.0), dict(global_timeout=0)):
        with pytest.raises(ValueError):
            SeekConfig(**bad)
    assert SeekConfig(t0=0.0, t_min=0.0).max_attempts() == 1


def test_trace_dict(two_rooms):
    d = incremental_plan(two_rooms, ConstantScorer(1.0)).to_dict()
    assert d["status"] == "solved" and d["replan_count"] == 0 and d["plan"]


# -- scorers ---------------------------------------------------------------------------


def test_identical_features_identical_scores(three_rooms):
    w = tuple(np.linspace(-1, 1, len(FEATURES)))
    scorer = FeatureScorer(w, 0.1)
    syms, X = object_features(three_rooms)
    scores = scorer.scores(three_rooms)
    for i in range(len(syms)):
        for j in range(len(syms)):
            if np.array_equal(X[i], X[j]):
                assert scores[syms[i]] == scores[syms[j]]
    assert all(0.0 <= v <= 1.0 for v in scores.values())


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=len(FEATURES), max_size=len(FEATURES)),
       st.floats(-2, 2), st.floats(0.1, 10))
def test_scaling_preserves_ranking(weights, bias, c):
    inst = two_room_problem(extra_room=True)
    a = FeatureScorer(tuple(weights), bias).scores(inst)
    b = FeatureScorer(tuple(c * w for w in weights), c * bias).scores(inst)
    syms = sorted(a)
    for x in syms:
        for y in syms:
            # skip pairs whose sigmoid outputs saturate to (nearly) equal floats
            da, db = a[x] - a[y], b[x] - b[y]
            if abs(da) > 1e-9 and abs(db) > 1e-9:
                assert np.sign(da) == np.sign(db)


def _flat(seed=0):
    rng = np.random.default_rng(seed)
    return FeatureScorer(tuple(rng.normal(size=len(FEATURES))), float(rng.normal()))


def test_hierarchical_single_room_preserves_ranking():
    inst = two_room_problem(goal=[("inRecep", "mugA", "shelfB")])
    room_only = inst.scene.subgraph(n for n in inst.scene.nodes if n not in ("roomB", "placeB", "locB0",
                                                                            "locB1", "fridgeC"))
    one = restrict_problem(inst, room_only.nodes)
    flat = _flat(3)
    hier = HierarchicalScorer({lv: flat for lv in HIER_LEVELS})
    fs, hs = flat.scores(one), hier.scores(one)
    non_room = [s for s in fs if one.scene.kind(one.symbols[s]) != "room"]
    assert sorted(non_room, key=lambda s: (fs[s], s)) == sorted(non_room, key=lambda s: (hs[s], s))


class _ZeroScorer(FeatureScorer):
    def predict(self, X):
        return np.zeros(len(X))


def test_hierarchical_zero_room_zeroes_objects(three_rooms):
    room = _ZeroScorer(tuple([0.0] * len(FEATURES)))
    other = _flat(1)
    hier = HierarchicalScorer({"room": room, "place": other, "location": other, "object": other})
    scores = hier.scores(three_rooms)
    assert scores["mugA"] == 0.0 and scores["placeB"] == 0.0
    with pytest.raises(SeekError):
        HierarchicalScorer({"room": room})


def test_random_scorer_deterministic(three_rooms):
    assert RandomScorer(4).scores(three_rooms) == RandomScorer(4).scores(three_rooms)
    assert RandomScorer(4).scores(three_rooms) != RandomScorer(5).scores(three_rooms)


def test_model_json_round_trip(tmp_path, three_rooms):
    for model in (_flat(2), HierarchicalScorer({lv: _flat(i) for i, lv in enumerate(HIER_LEVELS)}), RandomScorer(9)):
        path = tmp_path / "m.json"
        save_model(model, path)
        assert load_model(path).scores(three_rooms) == model.scores(three_rooms)
    with pytest.raises(SeekError):
        FeatureScorer((1.0,))


# -- training ----------------------------------------------------------------------------


def test_plan_labels_include_ancestors(two_rooms):
    plan = bfs_oracle(ground(two_rooms))
    labels = plan_labels(two_rooms, plan)
    for s in ("mugA", "shelfB", "fridgeC", "locA1", "placeA", "roomA", "roomB"):
        assert labels[s] == 1
    assert AGENT not in labels


def test_single_class_labels_rejected():
    with pytest.raises(SeekError):
        fit_logistic(np.ones((4, len(FEATURES))), np.ones(4))


def test_training_deterministic():
    insts = [tiny_instance(s) for s in range(6)]
    ex = _examples(insts)
    assert train_scorer(ex) == train_scorer(ex)
    assert train_scorer(ex, TrainConfig(balanced=True)) != train_scorer(ex)


def test_training_accuracy(rearr_split):
    examples, _ = rearr_split
    assert len(examples) == 40
    assert accuracy(train_scorer(examples), examples) >= 0.9


def test_goal_ancestors_outrank(rearr_split):
    examples, held = rearr_split
    scorer = train_scorer(examples)
    wins = pairs = 0
    for inst in held:
        syms, X = object_features(inst)
        scores = scorer.scores(inst)
        kind = {s: inst.scene.kind(inst.symbols[s]) for s in syms}
        anc = [s for s, row in zip(syms, X) if row[GOAL_ANCESTOR]]
        rest = [s for s, row in zip(syms, X) if not row[GOAL_ANCESTOR]]
        for a in anc:
            for b in rest:
                if kind[a] == kind[b]:
                    pairs += 1
                    wins += scores[a] >= scores[b]
    assert pairs > 0 and wins / pairs >= 0.9


def test_hierarchical_trains(rearr_split):
    examples, held = rearr_split
    hier = train_hierarchical(examples[:10])
    scores = hier.scores(held[0])
    assert set(scores) == set(scored_objects(held[0]))
    assert all(0.0 <= v <= 1.0 for v in scores.values())
