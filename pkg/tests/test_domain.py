from __future__ import annotations

import random
from dataclasses import replace

import pytest

from helpers import TINY, two_room_problem, two_room_scene, tiny_instance
from taskography.domain import AGENT, DomainError, Family, GenerationError, SamplingError, applicable_lifted, \
    bind_step, build_domain, build_problem, problem_from_json, problem_to_json, sample_problem, simulate
from taskography.ground import ground
from taskography.scenegraph import generate_synthetic

SIZE_WEIGHT = {"small": 1, "medium": 2, "large": 3}


def apply_step(inst, state, step):
    pre, neg, add, dele = bind_step(inst.domain, inst.object_types, step)
    assert all(l in state for l in pre) and not any(l in state for l in neg), step
    return (set(state) - set(dele)) | set(add)


# -- domain definitions ----------------------------------------------------------


def test_rearrangement_operators():
    d = build_domain("rearrangement", 1)
    assert len(d.operators) == 10
    assert "bagslot" not in d.object_types
    assert set(d.object_types) == {"agent", "room", "place", "location", "receptacle", "item"}


def test_courier_operators():
    d = build_domain("courier", 10, 5)
    assert len(d.operators) == 16
    assert "bagslot" in d.object_types
    stow = sorted(o.name for o in d.operators if o.name.startswith(("Stow", "Retrieve")))
    assert len(stow) == 6


@pytest.mark.parametrize("family,count", [
    ("rearrangement", 10), ("courier", 16), ("lifted-rearrangement", 10), ("lifted-courier", 16),
])
def test_operator_count_per_family(family, count):
    assert len(build_domain(family, 2, 3).operators) == count


def test_lifted_class_relation():
    d = build_domain(Family.LIFTED_REARRANGEMENT, 5)
    cr = d.predicate("classRelation")
    assert cr.arity == 2 and cr.types == ("itemclass", "receptacleclass")
    assert {"itemclass", "receptacleclass"} <= set(d.object_types)
    place = d.operator("PlaceItemInReceptacle")
    assert ("classRelation", "?ic", "?rc") in place.add


@pytest.mark.parametrize("args", [("rearrangement", 0, None), ("courier", 1, None), ("courier", 1, 0),
                                  ("nonsense", 1, None)])
def test_build_domain_errors(args):
    with pytest.raises(ValueError):
        build_domain(*args)


def test_static_predicates():
    d = build_domain("courier", 1, 2)
    assert {"connected", "roomCenter", "placeCenter", "nextSlot", "small", "openable"} <= d.static_predicates
    assert "atLoc" not in d.static_predicates and "inRecep" not in d.static_predicates


# -- movement ------------------------------------------------------------------------


def test_no_self_moves(two_rooms):
    sp = ground(two_rooms)
    for a in sp.actions:
        if a.name == "GoToLocation":
            assert a.args[2] != a.args[3]


def test_go_to_room_from_center(two_rooms):
    state = two_rooms.init
    step = ("GoToRoom", AGENT, "roomA", "roomB", "placeA", "placeB", "locA0", "locB0")
    assert applicable_lifted(two_rooms.domain, two_rooms.object_types, state, step)
    after = apply_step(two_rooms, state, step)
    assert ("inRoom", AGENT, "roomB") in after and ("inRoom", AGENT, "roomA") not in after
    assert ("atLoc", AGENT, "locB0") in after


def test_go_to_room_needs_door():
    inst = build_problem(two_room_scene(), build_domain("rearrangement", 1), "locA1",
                         [("inRecep", "mugA", "fridgeC")])
    step = ("GoToRoom", AGENT, "roomA", "roomB", "placeA", "placeB", "locA1", "locB0")
    assert not applicable_lifted(inst.domain, inst.object_types, inst.init, step)
    sp = ground(inst)
    assert not any(sp.actions[i].name == "GoToRoom" for i in sp.applicable(sp.init_state))


def test_agent_occupies_one_location_on_random_walks():
    inst = tiny_instance(3, "courier", k=1, n=3)
    sp = ground(inst)
    at_loc = [i for i, a in enumerate(sp.atoms) if a[0] == "atLoc" and a[1] == AGENT]
    rng = random.Random(0)
    state = sp.init_state
    for _ in range(10_000):
        assert sum(1 for i in at_loc if state >> i & 1) == 1
        acts = sp.applicable(state)
        state = sp.actions[rng.choice(acts)].apply(state)


# -- knapsack ------------------------------------------------------------------------


def _holding(inst, item):
    home = [l for l in inst.init if l[0] in ("inRecep", "itemAtLoc") and l[1] == item]
    return (set(inst.init) - set(home)) | {("holdsItem", AGENT, item), ("holdsAny", AGENT)}


def test_medium_needs_two_slots():
    inst = two_room_problem(extra_room=True, family="courier", n=1)
    assert not any(a.name == "StowItemMedium" for a in ground(inst).actions)


@pytest.mark.parametrize("used", [0, 1, 2])
def test_medium_after_small_needs_adjacent_slots(used):
    inst = two_room_problem(extra_room=True, family="courier", n=3)
    state = _holding(inst, "bookC") | {("slotHoldsAny", f"slot_{used}"), ("inSlot", "mugA", f"slot_{used}")}
    free = [j for j in range(3) if j != used]
    expect = free[1] - free[0] == 1
    steps = [("StowItemMedium", AGENT, "bookC", f"slot_{a}", f"slot_{b}") for a in range(3) for b in range(3)]
    got = any(applicable_lifted(inst.domain, inst.object_types, state, s) for s in steps)
    assert got == expect


def test_stow_then_retrieve_restores_state():
    inst = two_room_problem(extra_room=True, family="courier", n=3)
    for item, slots in (("mugA", ("slot_1",)), ("bookC", ("slot_1", "slot_2"))):
        size = "Small" if len(slots) == 1 else "Medium"
        state = _holding(inst, item)
        stowed = apply_step(inst, state, (f"StowItem{size}", AGENT, item, *slots))
        assert ("holdsAny", AGENT) not in stowed
        assert apply_step(inst, stowed, (f"RetrieveItem{size}", AGENT, item, *slots)) == state


def test_retrieve_requires_free_hands():
    inst = two_room_problem(extra_room=True, family="courier", n=3)
    state = _holding(inst, "bookC") | {("inSlot", "mugA", "slot_0"), ("slotHoldsAny", "slot_0")}
    assert not applicable_lifted(inst.domain, inst.object_types, state,
                                 ("RetrieveItemSmall", AGENT, "mugA", "slot_0"))


def test_slot_accounting_on_random_walks():
    inst = tiny_instance(5, "courier", k=1, n=4, params=replace(TINY, num_items=6))
    sp = ground(inst)
    weight = {o: SIZE_WEIGHT[l[0]] for l in inst.init if l[0] in SIZE_WEIGHT for o in l[1:]}
    rng = random.Random(1)
    state = sp.init_state
    for _ in range(5000):
        atoms = sp.atoms_of(state) + list(sp.static_true)
        busy = {a[1] for a in atoms if a[0] == "slotHoldsAny"}
        stowed = {a[1] for a in atoms if a[0] == "inSlot"}
        assert len(busy) == sum(weight[i] for i in stowed) <= 4
        state = sp.actions[rng.choice(sp.applicable(state))].apply(state)


# -- sampling --------------------------------------------------------------------------


def test_two_rooms_sampling():
    inst = sample_problem(two_room_scene(), build_domain("rearrangement", 1), seed=0)
    assert inst.goal in ((("inRecep", "mugA", "fridgeC"),), (("inRecep", "mugA", "shelfB"),))
    for lit in inst.goal:
        assert lit not in inst.init


def test_courier_distinct_delivery_points():
    scene = two_room_scene(extra_room=True)
    domain = build_domain("courier", 2, 3)
    for seed in range(10):
        inst = sample_problem(scene, domain, seed, verify=False)
        assert len({lit[2] for lit in inst.goal}) == 2


def test_lifted_goal_has_groundings():
    domain = build_domain("lifted-rearrangement", 2)
    for seed in range(10):
        inst = tiny_instance(seed, "lifted-rearrangement", k=2)
        assert len(inst.goal) == 2
        for _, ic, rc in inst.goal:
            assert any(l[0] == "itemClass" and l[2] == ic for l in inst.init)
            assert any(l[0] == "recepClass" and l[2] == rc for l in inst.init)
    assert domain.k == 2


@pytest.mark.parametrize("family", ["rearrangement", "courier", "lifted-rearrangement", "lifted-courier"])
def test_sampling_deterministic_and_well_formed(family):
    a = tiny_instance(11, family, k=2, n=3)
    b = tiny_instance(11, family, k=2, n=3)
    assert problem_to_json(a) == problem_to_json(b)
    names = set(a.object_types)
    for lit in a.goal:
        assert set(lit[1:]) <= names
        assert lit not in a.init
    assert sum(1 for l in a.init if l[0] == "atLoc" and l[1] == AGENT) == 1


def test_sampled_problems_verify():
    scene = generate_synthetic(replace(TINY, seed=2))
    inst = sample_problem(scene, build_domain("rearrangement", 2), 2)
    assert inst.seed == 2


def test_sampling_errors():
    with pytest.raises(SamplingError, match="items"):
        sample_problem(two_room_scene(), build_domain("rearrangement", 2), 0)
    # two-room has one item, so a two-item courier goal cannot be drawn either
    with pytest.raises(SamplingError):
        sample_problem(two_room_scene(extra_room=True), build_domain("courier", 4, 2), 0)


def test_generation_error_without_resamples():
    with pytest.raises(GenerationError):
        sample_problem(two_room_scene(), build_domain("rearrangement", 1), 0, max_resamples=0)


def test_build_problem_errors():
    d = build_domain("rearrangement", 1)
    with pytest.raises(DomainError, match="location"):
        build_problem(two_room_scene(), d, "roomA", [("inRecep", "mugA", "fridgeC")])
    with pytest.raises(DomainError, match="unknown object"):
        build_problem(two_room_scene(), d, "locA0", [("inRecep", "cupZ", "fridgeC")])
    with pytest.raises(DomainError, match="inRecep"):
        build_problem(two_room_scene(), d, "locA0", [("classRelation", "mug", "fridge")])
    with pytest.raises(DomainError, match="no instance"):
        build_problem(two_room_scene(), build_domain("lifted-rearrangement", 1), "locA0",
                      [("classRelation", "cup", "fridge")])


def test_two_rooms_initial_state(two_rooms):
    assert ("inRecep", "mugA", "shelfB") in two_rooms.init
    assert ("openable", "fridgeC") in two_rooms.init and ("recepOpened", "fridgeC") not in two_rooms.init
    assert {("atLoc", AGENT, "locA0"), ("inPlace", AGENT, "placeA"), ("inRoom", AGENT, "roomA")} <= two_rooms.init
    assert two_rooms.symbols["mugA"] == "mugA"
    assert two_rooms.agent_location() == "locA0"


def test_problem_json_round_trip(three_rooms):
    again = problem_from_json(problem_to_json(three_rooms))
    assert again == three_rooms
    assert again.scene == three_rooms.scene


# -- lifted interpreter ---------------------------------------------------------------------


def test_simulate_reports_failing_step(two_rooms):
    bad = [("GoToLocation", AGENT, "placeA", "locA0", "locA1"),
           ("PickupItem", AGENT, "mugA", "locA1")]
    sim = simulate(two_rooms, bad)
    assert not sim.ok and sim.failed_step == 1 and "itemAtLoc" in sim.reason
    assert simulate(two_rooms, [("Fly", AGENT)]).failed_step == 0
    assert "not a" in simulate(two_rooms, [("GoToLocation", AGENT, "roomA", "locA0", "locA1")]).reason
