from __future__ import annotations

from dataclasses import replace

from taskography.domain import build_domain, build_problem, sample_problem
from taskography.scenegraph import CONTAINS, AttributeSet, Edge, GeneratorParams, Node, SceneGraph, \
    generate_synthetic

TINY = GeneratorParams(num_floors=1, rooms_per_floor=3, places_per_room=2, locations_per_place=2,
                       num_items=3, num_receptacles=3)


def _n(nid, kind, **attrs):
    level = {"building": "building", "floor": "floor", "room": "room", "place": "place",
             "location": "location"}.get(kind, "object")
    return Node(nid, level, kind, AttributeSet(class_label=attrs.pop("label", kind), **attrs))


def two_room_scene(extra_room: bool = False) -> SceneGraph:
    """Two connected rooms; mugA sits on shelfB in room A, fridgeC (closed) is in room B.

    With ``extra_room`` a third room C hangs off B, holding a table and a book.
    """
    nodes = [
        _n("building", "building"), _n("floor1", "floor"),
        _n("roomA", "room", label="kitchen"), _n("roomB", "room", label="living_room"),
        _n("placeA", "place", center=True), _n("placeB", "place", center=True),
        _n("locA0", "location", center=True), _n("locA1", "location"),
        _n("locB0", "location", center=True), _n("locB1", "location"),
        _n("shelfB", "receptacle", label="shelf"),
        _n("fridgeC", "receptacle", label="fridge", openable=True),
        _n("mugA", "item", label="mug", size_class="small", weight=1),
    ]
    edges = [
        Edge("building", "floor1", CONTAINS), Edge("floor1", "roomA", CONTAINS),
        Edge("floor1", "roomB", CONTAINS), Edge("roomA", "placeA", CONTAINS),
        Edge("roomB", "placeB", CONTAINS), Edge("placeA", "locA0", CONTAINS),
        Edge("placeA", "locA1", CONTAINS), Edge("placeB", "locB0", CONTAINS),
        Edge("placeB", "locB1", CONTAINS), Edge("locA1", "shelfB", CONTAINS),
        Edge("locB1", "fridgeC", CONTAINS), Edge("shelfB", "mugA", CONTAINS),
        Edge("roomA", "roomB", "connected"),
    ]
    if extra_room:
        nodes += [
            _n("roomC", "room", label="bedroom"), _n("placeC", "place", center=True),
            _n("locC0", "location", center=True), _n("locC1", "location"),
            _n("tableC", "receptacle", label="table"),
            _n("bookC", "item", label="book", size_class="medium", weight=2),
        ]
        edges += [
            Edge("floor1", "roomC", CONTAINS), Edge("roomC", "placeC", CONTAINS),
            Edge("placeC", "locC0", CONTAINS), Edge("placeC", "locC1", CONTAINS),
            Edge("locC1", "tableC", CONTAINS), Edge("locC0", "bookC", CONTAINS),
            Edge("roomB", "roomC", "connected"),
        ]
    return SceneGraph(nodes, edges)


def two_room_problem(extra_room: bool = False, family: str = "rearrangement", **kw):
    domain = build_domain(family, 1, kw.pop("n", None))
    goal = kw.pop("goal", [("inRecep", "mugA", "fridgeC")])
    return build_problem(two_room_scene(extra_room), domain, "locA0", goal, name="two_rooms", **kw)


def tiny_instance(seed: int, family: str = "rearrangement", k: int = 1, n: int | None = None,
                  params: GeneratorParams = TINY):
    scene = generate_synthetic(replace(params, seed=seed))
    return sample_problem(scene, build_domain(family, k, n), seed, verify=False)
