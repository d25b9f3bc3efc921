"""Topological map over building spaces.

Spaces become nodes; doors bounding two spaces become edges, as do shared
virtual boundaries (open-plan transitions without a door leaf). Routes are
minimum-length node sequences with waypoints a metric planner can follow:
room centroids alternating with door center points, the latter annotated
with the door leaf dimensions and a grid-trust advisory for rooms bounded
by sensor-invisible surfaces.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

from .building_model import VIRTUAL, BuildingModel
from .geometry import distance

VIRTUAL_VIA = "VIRTUAL"


class TopoError(Exception):
    pass


class UnknownSpaceError(TopoError):
    def __init__(self, ref: str):
        super().__init__(f"unknown space {ref!r}")
        self.ref = ref


class NoRouteError(TopoError):
    def __init__(self, start: str, goal: str):
        super().__init__(f"no route from {start!r} to {goal!r}")
        self.start = start
        self.goal = goal


@dataclass(frozen=True)
class TopoNode:
    space_id: str
    long_name: str
    centroid: tuple[float, float]
    storey: str
    function_tags: tuple[str, ...]
    #: true when any landmark bounding this space is sensor-invisible,
    #: i.e. a scan of the room cannot be trusted to match the layout
    sensor_unreliable: bool


@dataclass(frozen=True)
class TopoEdge:
    node_a: str
    node_b: str
    via: str  # door GlobalId, or VIRTUAL_VIA
    length_cost: float
    door_center: tuple[float, float] | None = None
    width: float | None = None
    height: float | None = None

    def other(self, space_id: str) -> str:
        return self.node_b if space_id == self.node_a else self.node_a


@dataclass(frozen=True)
class Waypoint:
    kind: str  # "room" | "door"
    point: tuple[float, float]
    room: str | None = None
    via: str | None = None
    width: float | None = None
    height: float | None = None
    grid_trust: bool | None = None


@dataclass(frozen=True)
class Route:
    nodes: tuple[str, ...]
    waypoints: tuple[Waypoint, ...]
    total_cost: float
    edges: tuple[TopoEdge, ...]


@dataclass(frozen=True)
class TopoMap:
    nodes: dict[str, TopoNode]
    edges: tuple[TopoEdge, ...]
    warnings: tuple[str, ...] = ()
    _adjacency: dict[str, tuple[TopoEdge, ...]] = field(default_factory=dict,
                                                        repr=False, compare=False)

    def edges_of(self, space_id: str) -> tuple[TopoEdge, ...]:
        return self._adjacency.get(space_id, ())

    def node_names(self, ids) -> list[str]:
        return [self.nodes[i].long_name for i in ids]


def build_topological_map(model: BuildingModel) -> TopoMap:
    nodes: dict[str, TopoNode] = {}
    landmark_map = {lm.global_id: lm for lm in model.landmarks}

    bounding: dict[str, set[str]] = {}  # space -> landmark ids on its boundary
    for rel in model.boundaries:
        if rel.element and rel.element in landmark_map:
            bounding.setdefault(rel.space, set()).add(rel.element)

    for space in model.spaces:
        unreliable = any(
            not landmark_map[eid].material.sensor_visible
            for eid in bounding.get(space.global_id, ())
        )
        nodes[space.global_id] = TopoNode(
            space_id=space.global_id,
            long_name=space.long_name,
            centroid=space.centroid,
            storey=space.storey,
            function_tags=space.function_tags,
            sensor_unreliable=unreliable,
        )

    warnings = []
    by_storey_name: dict[tuple[str, str], list[str]] = {}
    for node in nodes.values():
        by_storey_name.setdefault((node.storey, node.long_name), []).append(node.space_id)
    for (storey, name), ids in sorted(by_storey_name.items()):
        if len(ids) > 1:
            warnings.append(
                f"duplicate long name {name!r} on storey {storey!r}: {', '.join(sorted(ids))}"
            )

    edges: list[TopoEdge] = []
    seen: set[tuple[str, str, str]] = set()

    def add_edge(a: str, b: str, via: str, cost: float, center=None,
                 width=None, height=None):
        if a == b:
            return
        a, b = sorted((a, b))
        key = (a, b, via)
        if key in seen:
            return
        seen.add(key)
        edges.append(TopoEdge(a, b, via, cost, center, width, height))

    doors = {d.global_id: d for d in model.doors}
    door_spaces: dict[str, set[str]] = {}
    virtual_groups: dict[int, set[str]] = {}
    for rel in model.boundaries:
        if rel.space not in nodes:
            continue
        if rel.element in doors:
            door_spaces.setdefault(rel.element, set()).add(rel.space)
        elif rel.kind == VIRTUAL and rel.geometry is not None:
            virtual_groups.setdefault(rel.geometry, set()).add(rel.space)

    for door_id in sorted(door_spaces):
        door = doors[door_id]
        incident = sorted(door_spaces[door_id])
        for i, a in enumerate(incident):
            for b in incident[i + 1:]:
                cost = (distance(nodes[a].centroid, door.center)
                        + distance(door.center, nodes[b].centroid))
                add_edge(a, b, door_id, cost, door.center, door.width, door.height)

    for geometry_id in sorted(virtual_groups):
        incident = sorted(virtual_groups[geometry_id])
        for i, a in enumerate(incident):
            for b in incident[i + 1:]:
                cost = distance(nodes[a].centroid, nodes[b].centroid)
                add_edge(a, b, VIRTUAL_VIA, cost)

    adjacency: dict[str, list[TopoEdge]] = {}
    for edge in edges:
        adjacency.setdefault(edge.node_a, []).append(edge)
        adjacency.setdefault(edge.node_b, []).append(edge)

    return TopoMap(
        nodes=nodes,
        edges=tuple(edges),
        warnings=tuple(warnings),
        _adjacency={k: tuple(v) for k, v in adjacency.items()},
    )


def room_of_point(model: BuildingModel, point: tuple[float, float]) -> str | None:
    """Space containing the point, boundary included.

    A point on a shared wall segment touches several spaces; the raw
    even-odd test is not symmetric there, so every space the point is
    inside or on the boundary of is a candidate and the lexicographically
    smallest GlobalId wins."""
    x, y = point
    candidates = [
        s.global_id for s in model.spaces if s.polygon.contains_or_boundary(x, y)
    ]
    return min(candidates) if candidates else None


def resolve_space(model: BuildingModel, ref: str) -> str:
    """Accept a space GlobalId or a long name; return the GlobalId."""
    if model.space_by_id(ref) is not None:
        return ref
    matches = sorted(s.global_id for s in model.spaces if s.long_name == ref)
    if matches:
        return matches[0]
    raise UnknownSpaceError(ref)


def plan_path(topo: TopoMap, start: str, goal: str) -> Route:
    """Minimum-cost route; equal-cost ties pick the lexicographically
    smallest node-id sequence."""
    if start not in topo.nodes:
        raise UnknownSpaceError(start)
    if goal not in topo.nodes:
        raise UnknownSpaceError(goal)
    if start == goal:
        node = topo.nodes[start]
        waypoint = Waypoint(kind="room", point=node.centroid, room=start)
        return Route((start,), (waypoint,), 0.0, ())

    # heap entries order by (cost, node sequence): the first time a node is
    # settled it carries the cheapest, lexicographically smallest path; the
    # counter keeps parallel equal-cost edges from comparing TopoEdge values
    heap: list[tuple[float, tuple[str, ...], int, tuple[TopoEdge, ...]]] = [
        (0.0, (start,), 0, ())
    ]
    counter = 0
    settled: set[str] = set()
    while heap:
        cost, path, _, used = heapq.heappop(heap)
        current = path[-1]
        if current in settled:
            continue
        settled.add(current)
        if current == goal:
            return Route(path, _waypoints(topo, path, used), cost, used)
        for edge in topo.edges_of(current):
            other = edge.other(current)
            if other not in settled:
                counter += 1
                heapq.heappush(
                    heap,
                    (cost + edge.length_cost, path + (other,), counter, used + (edge,)),
                )
    raise NoRouteError(start, goal)


def _waypoints(topo: TopoMap, path: tuple[str, ...],
               edges: tuple[TopoEdge, ...]) -> tuple[Waypoint, ...]:
    points: list[Waypoint] = []
    for i, space_id in enumerate(path):
        node = topo.nodes[space_id]
        points.append(Waypoint(kind="room", point=node.centroid, room=space_id))
        if i < len(edges):
            edge = edges[i]
            if edge.via != VIRTUAL_VIA:
                next_node = topo.nodes[path[i + 1]]
                points.append(Waypoint(
                    kind="door",
                    point=edge.door_center,
                    via=edge.via,
                    width=edge.width,
                    height=edge.height,
                    grid_trust=next_node.sensor_unreliable,
                ))
    return tuple(points)


def waypoints(route: Route) -> tuple[Waypoint, ...]:
    return route.waypoints


def export_topo(topo: TopoMap) -> str:
    """Line-oriented graph document: header, sorted nodes, sorted edges."""
    lines = ["topomap v1"]
    for space_id in sorted(topo.nodes):
        node = topo.nodes[space_id]
        tags = ",".join(node.function_tags) or "-"
        lines.append(
            "node {} {} {!r} {!r} {} {} {}".format(
                space_id, json.dumps(node.long_name),
                node.centroid[0], node.centroid[1],
                node.storey, "unreliable" if node.sensor_unreliable else "ok", tags,
            )
        )
    for edge in sorted(topo.edges, key=lambda e: (e.node_a, e.node_b, e.via)):
        parts = [
            "edge", edge.node_a, edge.node_b, edge.via, repr(edge.length_cost)
        ]
        if edge.via != VIRTUAL_VIA:
            parts += [repr(edge.door_center[0]), repr(edge.door_center[1]),
                      repr(edge.width), repr(edge.height)]
        lines.append(" ".join(parts))
    for warning in topo.warnings:
        lines.append(f"# warning: {warning}")
    return "\n".join(lines) + "\n"


def brute_force_cost(topo: TopoMap, start: str, goal: str) -> float | None:
    """Exhaustive simple-path search; test oracle for small graphs."""
    best = math.inf

    def walk(current: str, visited: set[str], cost: float):
        nonlocal best
        if current == goal:
            best = min(best, cost)
            return
        for edge in topo.edges_of(current):
            other = edge.other(current)
            if other not in visited:
                walk(other, visited | {other}, cost + edge.length_cost)

    walk(start, {start}, 0.0)
    return None if math.isinf(best) else best
