"""Hierarchical 3D scene graphs: model, procedural generator, room connectivity.

A scene graph is a containment forest rooted at a single ``building`` node
(building -> floor -> room -> place -> location -> object, plus
receptacle -> item for contained items) overlaid with symmetric ``connected``
edges between rooms.  Graphs are immutable once built.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from types import MappingProxyType
from typing import Any, Iterable, Mapping

import networkx as nx
import numpy as np

LEVELS = ("building", "floor", "room", "place", "location", "object")
KIND_LEVEL = {
    "building": "building",
    "floor": "floor",
    "room": "room",
    "place": "place",
    "location": "location",
    "receptacle": "object",
    "item": "object",
    "agent": "object",
}
# parent kind -> allowed child kinds for containment edges
CONTAINMENT = {
    "building": {"floor"},
    "floor": {"room"},
    "room": {"place"},
    "place": {"location"},
    "location": {"receptacle", "item", "agent"},
    "receptacle": {"item"},
}
CONTAINS = "contains"
CONNECTED = "connected"

SIZE_WEIGHT = {"small": 1, "medium": 2, "large": 3}
SMALL_MAX_VOLUME = 0.01
MEDIUM_MAX_VOLUME = 0.1

ROOM_LABELS = ("kitchen", "living_room", "bedroom", "bathroom", "corridor", "office", "dining_room")
OPENABLE_RECEPTACLES = ("fridge", "cabinet", "drawer", "microwave", "oven", "wardrobe")
OPEN_RECEPTACLES = ("shelf", "table", "counter", "sink", "sofa", "bed", "desk")
ITEM_LABELS = ("cup", "plate", "mug", "book", "apple", "bowl", "bottle", "laptop", "vase", "remote")


class SceneGraphError(ValueError):
    """A scene graph violates its schema or structural invariants."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class LevelConstraintError(SceneGraphError):
    pass


def size_class_from_volume(volume: float) -> str:
    if volume < SMALL_MAX_VOLUME:
        return "small"
    if volume < MEDIUM_MAX_VOLUME:
        return "medium"
    return "large"


@dataclass(frozen=True)
class AttributeSet:
    class_label: str = ""
    dims: tuple[float, float, float] = (0.0, 0.0, 0.0)
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0)
    openable: bool = False
    size_class: str | None = None
    weight: int | None = None
    # door place of a room / center location of a place
    center: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(float(x) for x in self.dims))
        object.__setattr__(self, "pose", tuple(float(x) for x in self.pose))
        if (self.size_class is None) != (self.weight is None):
            raise SceneGraphError("size_class and weight must be set together")
        if self.size_class is not None:
            if self.size_class not in SIZE_WEIGHT:
                raise SceneGraphError(f"unknown size_class {self.size_class!r}")
            if SIZE_WEIGHT[self.size_class] != self.weight:
                raise SceneGraphError(
                    f"weight {self.weight} inconsistent with size_class {self.size_class!r}"
                )

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["pose"] = list(self.pose)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> AttributeSet:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SceneGraphError(f"unknown attribute(s) {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Node:
    id: str
    level: str
    kind: str
    attributes: AttributeSet = field(default_factory=AttributeSet)


@dataclass(frozen=True, order=True)
class Edge:
    u: str
    v: str
    relation: str


class SceneGraph:
    """Immutable hierarchical multigraph.

    ``connected`` edges are stored once, with ``u < v``; containment edges point
    from parent to child.
    """

    def __init__(
        self,
        nodes: Iterable[Node],
        edges: Iterable[Edge],
        meta: Mapping[str, Any] | None = None,
        levels: Iterable[str] = LEVELS,
    ):
        self.levels = tuple(levels)
        self._nodes: dict[str, Node] = {}
        for i, node in enumerate(nodes):
            if node.id in self._nodes:
                raise SceneGraphError(f"duplicate node id {node.id!r}", f"nodes[{i}]")
            self._nodes[node.id] = node
        self.nodes = MappingProxyType(self._nodes)
        normalized = []
        for e in edges:
            if e.relation == CONNECTED and e.u > e.v:
                e = Edge(e.v, e.u, CONNECTED)
            normalized.append(e)
        self.edges = frozenset(normalized)
        self.meta = dict(meta or {})
        self._parent: dict[str, str] = {}
        self._children: dict[str, list[str]] = {nid: [] for nid in self._nodes}
        self._adjacent: dict[str, list[str]] = {}
        self._check_structure()

    # -- construction checks -------------------------------------------------

    def _check_structure(self) -> None:
        level_index = {lv: i for i, lv in enumerate(self.levels)}
        buildings, agents = [], []
        for i, node in enumerate(self._nodes.values()):
            path = f"nodes[{i}]"
            if node.kind not in KIND_LEVEL:
                raise SceneGraphError(f"unknown kind {node.kind!r}", path)
            if node.level not in level_index:
                raise SceneGraphError(f"unknown level {node.level!r}", path)
            if KIND_LEVEL[node.kind] != node.level:
                raise SceneGraphError(
                    f"kind {node.kind!r} cannot live at level {node.level!r}", path
                )
            if node.kind == "building":
                buildings.append(node.id)
            elif node.kind == "agent":
                agents.append(node.id)
        if len(buildings) != 1:
            raise SceneGraphError(f"expected exactly one building node, found {len(buildings)}")
        if len(agents) > 1:
            raise SceneGraphError(f"at most one agent node allowed, found {len(agents)}")
        self.root = buildings[0]

        for i, e in enumerate(sorted(self.edges)):
            path = f"edges[{i}]"
            for end in (e.u, e.v):
                if end not in self._nodes:
                    raise SceneGraphError(f"edge endpoint {end!r} is not a node", path)
            lu = level_index[self._nodes[e.u].level]
            lv = level_index[self._nodes[e.v].level]
            if abs(lu - lv) > 1:
                raise LevelConstraintError(
                    f"edge ({e.u}, {e.v}) spans levels {self._nodes[e.u].level!r} "
                    f"and {self._nodes[e.v].level!r}",
                    path,
                )
            if e.relation == CONTAINS:
                pk, ck = self._nodes[e.u].kind, self._nodes[e.v].kind
                if ck not in CONTAINMENT.get(pk, ()):
                    raise SceneGraphError(f"{pk} cannot contain {ck}", path)
                if e.v in self._parent:
                    raise SceneGraphError(f"node {e.v!r} has two parents", path)
                self._parent[e.v] = e.u
            elif e.relation == CONNECTED:
                if self._nodes[e.u].kind != "room" or self._nodes[e.v].kind != "room":
                    raise SceneGraphError("connected edges must join two rooms", path)
                if e.u == e.v:
                    raise SceneGraphError("self-connected room", path)
                self._adjacent.setdefault(e.u, []).append(e.v)
                self._adjacent.setdefault(e.v, []).append(e.u)
            else:
                raise SceneGraphError(f"unknown relation {e.relation!r}", path)

        for nid in self._nodes:
            if nid != self.root and nid not in self._parent:
                raise SceneGraphError(f"node {nid!r} has no containment parent")
        # children lists keep node insertion order
        for nid in self._nodes:
            p = self._parent.get(nid)
            if p is not None:
                self._children[p].append(nid)
        for adj in self._adjacent.values():
            adj.sort()
        # every node must reach the root (rules out containment cycles)
        depth = 0
        for nid in self._nodes:
            cur, depth = nid, 0
            while cur != self.root:
                cur = self._parent[cur]
                depth += 1
                if depth > len(self._nodes):
                    raise SceneGraphError(f"containment cycle through {nid!r}")

    def validate(self) -> None:
        """Full invariant check, including room-graph connectivity."""
        rooms = self.rooms()
        if rooms and not self.rooms_connected(rooms):
            raise SceneGraphError("room connectivity graph is not connected")

    # -- queries -------------------------------------------------------------

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SceneGraph):
            return NotImplemented
        return (
            self.levels == other.levels
            and self._nodes == other._nodes
            and self.edges == other.edges
            and self.meta == other.meta
        )

    def __hash__(self):
        return hash((self.levels, frozenset(self._nodes), self.edges))

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise KeyError(f"unknown scene node {node_id!r}") from None

    def kind(self, node_id: str) -> str:
        return self.node(node_id).kind

    def of_kind(self, *kinds: str) -> list[str]:
        return [nid for nid, n in self._nodes.items() if n.kind in kinds]

    def rooms(self) -> list[str]:
        return self.of_kind("room")

    def parent(self, node_id: str) -> str | None:
        self.node(node_id)
        return self._parent.get(node_id)

    def children(self, node_id: str) -> list[str]:
        self.node(node_id)
        return list(self._children[node_id])

    def ancestors(self, node_id: str) -> list[str]:
        """Containment chain from the immediate parent up to the building."""
        self.node(node_id)
        chain = []
        cur = self._parent.get(node_id)
        while cur is not None:
            chain.append(cur)
            cur = self._parent.get(cur)
        return chain

    def ancestor_of_kind(self, node_id: str, kind: str) -> str | None:
        for a in self.ancestors(node_id):
            if self._nodes[a].kind == kind:
                return a
        return None

    def room_of(self, node_id: str) -> str | None:
        if self.kind(node_id) == "room":
            return node_id
        return self.ancestor_of_kind(node_id, "room")

    def descendants(self, node_id: str) -> list[str]:
        out, stack = [], list(reversed(self.children(node_id)))
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(reversed(self._children[n]))
        return out

    def center_child(self, node_id: str) -> str | None:
        """The flagged center child (door place of a room, center location of a place).

        Falls back to the first child when no child carries the flag.
        """
        kids = self._children[node_id]
        for c in kids:
            if self._nodes[c].attributes.center:
                return c
        return kids[0] if kids else None

    def neighbors(self, room: str) -> list[str]:
        self.node(room)
        return list(self._adjacent.get(room, ()))

    def room_edges(self) -> list[tuple[str, str]]:
        return sorted((e.u, e.v) for e in self.edges if e.relation == CONNECTED)

    def rooms_connected(self, rooms: Iterable[str]) -> bool:
        rooms = list(rooms)
        if not rooms:
            return True
        seen = {rooms[0]}
        queue = deque([rooms[0]])
        while queue:
            r = queue.popleft()
            for nb in self._adjacent.get(r, ()):
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        return all(r in seen for r in rooms)

    def room_distances(self, source: str) -> dict[str, int]:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            r = queue.popleft()
            for nb in self._adjacent.get(r, ()):
                if nb not in dist:
                    dist[nb] = dist[r] + 1
                    queue.append(nb)
        return dist

    def shortest_room_path(self, source: str, target: str) -> list[str] | None:
        """BFS over sorted adjacency; deterministic among equal-length paths."""
        if source == target:
            return [source]
        prev = {source: None}
        queue = deque([source])
        while queue:
            r = queue.popleft()
            for nb in self._adjacent.get(r, ()):
                if nb not in prev:
                    prev[nb] = r
                    if nb == target:
                        path = [nb]
                        while prev[path[-1]] is not None:
                            path.append(prev[path[-1]])
                        return path[::-1]
                    queue.append(nb)
        return None

    # -- derived graphs --------------------------------------------------------

    def subgraph(self, keep: Iterable[str]) -> SceneGraph:
        """Induced subgraph on ``keep`` (must be closed under ancestors)."""
        keep = set(keep)
        keep.add(self.root)
        for nid in keep:
            p = self._parent.get(nid)
            if p is not None and p not in keep:
                raise SceneGraphError(f"subgraph keeps {nid!r} but drops its parent {p!r}")
        # an ancestor-closed subset of a valid graph is valid; copy indices instead of re-checking
        g = SceneGraph.__new__(SceneGraph)
        g.levels = self.levels
        g._nodes = {nid: n for nid, n in self._nodes.items() if nid in keep}
        g.nodes = MappingProxyType(g._nodes)
        g.edges = frozenset(e for e in self.edges if e.u in keep and e.v in keep)
        g.meta = dict(self.meta)
        g.root = self.root
        g._parent = {c: p for c, p in self._parent.items() if c in keep}
        g._children = {nid: [c for c in self._children[nid] if c in keep] for nid in g._nodes}
        g._adjacent = {r: [x for x in adj if x in keep] for r, adj in self._adjacent.items() if r in keep}
        return g

    def without_subtree(self, node_id: str) -> SceneGraph:
        drop = {node_id, *self.descendants(node_id)}
        return self.subgraph(nid for nid in self._nodes if nid not in drop)

    def with_nodes(self, nodes: Iterable[Node], edges: Iterable[Edge]) -> SceneGraph:
        return SceneGraph([*self._nodes.values(), *nodes], [*self.edges, *edges], self.meta, self.levels)

    def with_room_edges(self, pairs: Iterable[tuple[str, str]]) -> SceneGraph:
        edges = [e for e in self.edges if e.relation != CONNECTED]
        edges += [Edge(u, v, CONNECTED) for u, v in pairs]
        return SceneGraph(self._nodes.values(), edges, self.meta, self.levels)

    # -- serialization -----------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "levels": list(self.levels),
            "nodes": [
                {"id": n.id, "level": n.level, "kind": n.kind, "attributes": n.attributes.to_dict()}
                for n in self._nodes.values()
            ],
            "edges": [{"u": e.u, "v": e.v, "relation": e.relation} for e in sorted(self.edges)],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], strict: bool = True) -> SceneGraph:
        if not isinstance(data, Mapping):
            raise SceneGraphError("scene graph document must be an object")
        for key in ("levels", "nodes", "edges"):
            if key not in data:
                raise SceneGraphError(f"missing key {key!r}")
        nodes = []
        for i, nd in enumerate(data["nodes"]):
            path = f"nodes[{i}]"
            try:
                attrs = AttributeSet.from_dict(nd.get("attributes", {}))
                nodes.append(Node(nd["id"], nd["level"], nd["kind"], attrs))
            except KeyError as exc:
                raise SceneGraphError(f"missing field {exc.args[0]!r}", path) from None
            except SceneGraphError as exc:
                raise SceneGraphError(str(exc), path) from None
            except TypeError as exc:
                raise SceneGraphError(str(exc), path) from None
        edges = []
        for i, ed in enumerate(data["edges"]):
            try:
                edges.append(Edge(ed["u"], ed["v"], ed["relation"]))
            except KeyError as exc:
                raise SceneGraphError(f"missing field {exc.args[0]!r}", f"edges[{i}]") from None
        graph = cls(nodes, edges, data.get("meta", {}), data["levels"])
        if strict:
            graph.validate()
        return graph


def export_json(graph: SceneGraph) -> str:
    return json.dumps(graph.to_dict(), sort_keys=True, indent=1)


def import_json(text: str, strict: bool = True) -> SceneGraph:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneGraphError(f"invalid JSON: {exc}") from None
    return SceneGraph.from_dict(data, strict=strict)


# ---------------------------------------------------------------------------
# Procedural generation


@dataclass(frozen=True)
class GeneratorParams:
    num_floors: int = 2
    rooms_per_floor: int = 7
    places_per_room: int = 3
    locations_per_place: int = 3
    num_items: int = 40
    num_receptacles: int = 30
    openable_fraction: float = 0.4
    item_in_receptacle_fraction: float = 0.5
    size_class_distribution: tuple[float, float, float] = (0.5, 0.3, 0.2)
    room_spacing: float = 6.0
    floor_height: float = 3.0
    seed: int = 0

    def validate(self) -> None:
        for name in ("num_floors", "rooms_per_floor", "places_per_room", "locations_per_place",
                     "num_items", "num_receptacles"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("openable_fraction", "item_in_receptacle_fraction"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability, got {p}")
        dist = self.size_class_distribution
        if len(dist) != 3 or any(p < 0 for p in dist) or not math.isclose(sum(dist), 1.0):
            raise ValueError(f"size_class_distribution must be 3 probabilities summing to 1, got {dist}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["size_class_distribution"] = list(self.size_class_distribution)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> GeneratorParams:
        d = dict(d)
        if "size_class_distribution" in d:
            d["size_class_distribution"] = tuple(d["size_class_distribution"])
        return cls(**d)


_VOLUME_BANDS = {"small": (0.001, 0.009), "medium": (0.012, 0.09), "large": (0.12, 0.9)}


def _item_dims(rng: np.random.Generator, size_class: str) -> tuple[float, float, float]:
    lo, hi = _VOLUME_BANDS[size_class]
    volume = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    ratios = rng.uniform(0.5, 2.0, size=3)
    scale = (volume / float(np.prod(ratios))) ** (1.0 / 3.0)
    return tuple(round(float(r * scale), 6) for r in ratios)


def _rounded(xs) -> tuple[float, ...]:
    return tuple(round(float(x), 4) for x in xs)


def generate_synthetic(params: GeneratorParams) -> SceneGraph:
    """Deterministically generate a scene graph (without an agent) from ``params``."""
    params.validate()
    rng = np.random.default_rng(params.seed)
    nodes: list[Node] = [Node("building", "building", "building", AttributeSet(class_label="building"))]
    edges: list[Edge] = []
    locations: list[tuple[str, tuple]] = []
    cols = max(1, math.ceil(math.sqrt(params.rooms_per_floor)))

    for f in range(params.num_floors):
        fid = f"floor_{f}"
        z = f * params.floor_height
        nodes.append(Node(fid, "floor", "floor", AttributeSet(class_label="floor", pose=(0.0, 0.0, z))))
        edges.append(Edge("building", fid, CONTAINS))
        for r in range(params.rooms_per_floor):
            rid = f"room_{f}_{r}"
            gx, gy = r % cols, r // cols
            x = gx * params.room_spacing + rng.uniform(-1.0, 1.0)
            y = gy * params.room_spacing + rng.uniform(-1.0, 1.0)
            label = ROOM_LABELS[int(rng.integers(len(ROOM_LABELS)))]
            dims = _rounded((params.room_spacing * 0.8, params.room_spacing * 0.8, params.floor_height))
            nodes.append(Node(rid, "room", "room", AttributeSet(class_label=label, dims=dims, pose=_rounded((x, y, z)))))
            edges.append(Edge(fid, rid, CONTAINS))
            for p in range(params.places_per_room):
                pid = f"place_{f}_{r}_{p}"
                px, py = x + rng.uniform(-2.0, 2.0), y + rng.uniform(-2.0, 2.0)
                nodes.append(Node(pid, "place", "place", AttributeSet(
                    class_label="place", pose=_rounded((px, py, z)), center=(p == 0))))
                edges.append(Edge(rid, pid, CONTAINS))
                for l in range(params.locations_per_place):
                    lid = f"loc_{f}_{r}_{p}_{l}"
                    pose = _rounded((px + rng.uniform(-0.5, 0.5), py + rng.uniform(-0.5, 0.5), z))
                    nodes.append(Node(lid, "location", "location", AttributeSet(
                        class_label="location", pose=pose, center=(l == 0))))
                    edges.append(Edge(pid, lid, CONTAINS))
                    locations.append((lid, pose))

    receptacles = []
    for i in range(params.num_receptacles):
        lid, pose = locations[int(rng.integers(len(locations)))]
        openable = bool(rng.random() < params.openable_fraction)
        vocab = OPENABLE_RECEPTACLES if openable else OPEN_RECEPTACLES
        label = vocab[int(rng.integers(len(vocab)))]
        xid = f"{label}_{i}"
        dims = _rounded(rng.uniform(0.5, 2.0, size=3))
        nodes.append(Node(xid, "object", "receptacle", AttributeSet(
            class_label=label, dims=dims, pose=pose, openable=openable)))
        edges.append(Edge(lid, xid, CONTAINS))
        receptacles.append((xid, pose))

    size_names = ("small", "medium", "large")
    for i in range(params.num_items):
        label = ITEM_LABELS[int(rng.integers(len(ITEM_LABELS)))]
        size = size_names[int(rng.choice(3, p=params.size_class_distribution))]
        dims = _item_dims(rng, size)
        volume = dims[0] * dims[1] * dims[2]
        size = size_class_from_volume(volume)
        iid = f"{label}_{i}"
        if rng.random() < params.item_in_receptacle_fraction:
            parent, pose = receptacles[int(rng.integers(len(receptacles)))]
        else:
            parent, pose = locations[int(rng.integers(len(locations)))]
        nodes.append(Node(iid, "object", "item", AttributeSet(
            class_label=label, dims=dims, pose=pose, size_class=size, weight=SIZE_WEIGHT[size])))
        edges.append(Edge(parent, iid, CONTAINS))

    graph = SceneGraph(nodes, edges, {"seed": params.seed, "params": params.to_dict()})
    return connect_rooms_mst(graph)


def _floor_order(graph: SceneGraph) -> list[str]:
    floors = graph.of_kind("floor")
    return sorted(floors, key=lambda f: (graph.node(f).attributes.pose[2], f))


def connect_rooms_mst(graph: SceneGraph) -> SceneGraph:
    """Replace room connectivity with per-floor Euclidean MSTs plus one link per adjacent floor pair.

    Within a floor, edges join room centroids along a minimum spanning tree.
    Between consecutive floors (ordered by height) the globally nearest room
    pair is linked, ties broken by room id.
    """
    rooms = graph.rooms()
    if not rooms:
        raise SceneGraphError("cannot connect rooms: scene has no rooms")
    pose = {r: np.asarray(graph.node(r).attributes.pose) for r in rooms}
    pairs: list[tuple[str, str]] = []
    floors = _floor_order(graph)
    per_floor = [sorted(r for r in graph.children(f) if graph.kind(r) == "room") for f in floors]
    for frooms in per_floor:
        g = nx.Graph()
        g.add_nodes_from(frooms)
        for i, a in enumerate(frooms):
            for b in frooms[i + 1:]:
                g.add_edge(a, b, weight=float(np.linalg.norm(pose[a] - pose[b])))
        tree = nx.minimum_spanning_tree(g, algorithm="kruskal")
        pairs.extend(tuple(sorted(e)) for e in tree.edges())
    for lower, upper in zip(per_floor, per_floor[1:]):
        if not lower or not upper:
            continue
        best = min(
            ((float(np.linalg.norm(pose[a] - pose[b])), a, b) for a in lower for b in upper),
        )
        pairs.append(tuple(sorted(best[1:])))
    return graph.with_room_edges(pairs)


def room_graph_diameter(graph: SceneGraph) -> int:
    return max(max(graph.room_distances(r).values()) for r in graph.rooms())
