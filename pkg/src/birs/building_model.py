"""Plan-view building model extracted from a parsed IFC entity graph.

The reduction is deliberately two-dimensional: every product placement is
composed down to a planar pose plus a separate elevation, and product
bodies contribute the cross-section of their vertical extrusion at one cut
height per storey. Anything that cannot be reduced that way is skipped and
explained in the extraction report instead of failing the whole model.
"""

from __future__ import annotations

import fnmatch
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import DegeneratePolygon, Polygon2D, Pose2D, wrap_angle
from .step_parser import (
    EntityGraph,
    EnumValue,
    Ref,
    StepEntity,
    TypedValue,
    UNSET,
    entities_of_type,
    resolve_ref,
)

LOGGER = logging.getLogger(__name__)

_AXIS_TOL = 1e-6

#: IFC product types treated as plan-view landmarks, mapped to class names
#: as they appear in the ontology.
LANDMARK_CLASSES = {
    "IFCWALL": "IfcWall",
    "IFCWALLSTANDARDCASE": "IfcWall",
    "IFCCURTAINWALL": "IfcCurtainWall",
    "IFCCOLUMN": "IfcColumn",
    "IFCDOOR": "IfcDoor",
    "IFCRAILING": "IfcRailing",
    "IFCSTAIR": "IfcStair",
}

PHYSICAL = "PHYSICAL"
VIRTUAL = "VIRTUAL"


# ---------------------------------------------------------------- errors


class ModelError(Exception):
    """Base class for plan-view reduction failures."""


class PlacementCycleError(ModelError):
    def __init__(self, chain: tuple[int, ...]):
        super().__init__("placement chain revisits " + "->".join(f"#{i}" for i in chain))
        self.chain = chain


class NonPlanarAxisError(ModelError):
    def __init__(self, entity_id: int, detail: str):
        super().__init__(f"#{entity_id}: {detail}")
        self.entity_id = entity_id


class UnsupportedRepresentationError(ModelError):
    def __init__(self, type_name: str):
        super().__init__(f"unsupported representation: {type_name}")
        self.type_name = type_name


class DegenerateProfileError(ModelError):
    def __init__(self, entity_id: int, detail: str):
        super().__init__(f"#{entity_id}: degenerate profile ({detail})")
        self.entity_id = entity_id


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class MaterialInfo:
    name: str
    sensor_visible: bool


@dataclass(frozen=True)
class StoreyRec:
    global_id: str
    name: str
    elevation: float


@dataclass(frozen=True)
class Landmark:
    global_id: str
    ifc_class: str
    pose: Pose2D
    elevation: float
    footprint: Polygon2D
    material: MaterialInfo
    storey: str | None


@dataclass(frozen=True)
class DoorRec:
    global_id: str
    width: float
    height: float
    center: tuple[float, float]
    host_wall: str | None = None


@dataclass(frozen=True)
class SpaceRec:
    global_id: str
    long_name: str
    polygon: Polygon2D
    centroid: tuple[float, float]
    storey: str | None
    function_tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class BoundaryRel:
    space: str
    element: str | None
    kind: str  # PHYSICAL or VIRTUAL
    geometry: int | None = None  # shared connection-geometry entity id


@dataclass(frozen=True)
class Issue:
    """One skipped or suspect entity in the extraction report."""

    entity_id: int
    global_id: str | None
    error: str
    detail: str


@dataclass
class BuildingModel:
    project_name: str
    storeys: list[StoreyRec] = field(default_factory=list)
    spaces: list[SpaceRec] = field(default_factory=list)
    landmarks: list[Landmark] = field(default_factory=list)
    doors: list[DoorRec] = field(default_factory=list)
    boundaries: list[BoundaryRel] = field(default_factory=list)
    unit_scale: float = 1.0

    def space_by_id(self, global_id: str) -> SpaceRec | None:
        for space in self.spaces:
            if space.global_id == global_id:
                return space
        return None

    def space_by_long_name(self, long_name: str) -> SpaceRec | None:
        for space in self.spaces:
            if space.long_name == long_name:
                return space
        return None

    def landmark_by_id(self, global_id: str) -> Landmark | None:
        for lm in self.landmarks:
            if lm.global_id == global_id:
                return lm
        return None

    def storey_by_id(self, global_id: str | None) -> StoreyRec | None:
        for storey in self.storeys:
            if storey.global_id == global_id:
                return storey
        return None


# ------------------------------------------------------- value helpers


def _num(value, default: float | None = None) -> float | None:
    if isinstance(value, bool):
        return default
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, TypedValue):
        return _num(value.value, default)
    return default


def _text(value, default: str = "") -> str:
    return value if isinstance(value, str) else default


def _ref_id(value) -> int | None:
    return value.entity_id if isinstance(value, Ref) else None


def _coords(graph: EntityGraph, value) -> tuple[float, ...]:
    entity = resolve_ref(graph, value)
    raw = entity.args[0] if entity.args else ()
    return tuple(_num(v, 0.0) for v in raw)


# ---------------------------------------------------------- placements


def _axis_placement_3d(graph: EntityGraph, entity: StepEntity,
                       scale: float) -> tuple[Pose2D, float]:
    """Planar pose + z offset of one IFCAXIS2PLACEMENT3D."""
    loc = _coords(graph, entity.args[0])
    x = loc[0] * scale if len(loc) > 0 else 0.0
    y = loc[1] * scale if len(loc) > 1 else 0.0
    z = loc[2] * scale if len(loc) > 2 else 0.0

    axis = entity.args[1] if len(entity.args) > 1 else UNSET
    if axis is not UNSET:
        ax = _coords(graph, axis)
        ax3 = (ax + (0.0, 0.0, 0.0))[:3]
        norm = max((ax3[0] ** 2 + ax3[1] ** 2 + ax3[2] ** 2) ** 0.5, 1e-300)
        ux, uy, uz = (c / norm for c in ax3)
        if abs(ux) > _AXIS_TOL or abs(uy) > _AXIS_TOL or abs(uz - 1.0) > _AXIS_TOL:
            raise NonPlanarAxisError(entity.entity_id, "axis is not +z")

    theta = 0.0
    ref = entity.args[2] if len(entity.args) > 2 else UNSET
    if ref is not UNSET:
        rx_ry = _coords(graph, ref)
        rx = rx_ry[0] if len(rx_ry) > 0 else 1.0
        ry = rx_ry[1] if len(rx_ry) > 1 else 0.0
        rz = rx_ry[2] if len(rx_ry) > 2 else 0.0
        if abs(rz) > _AXIS_TOL:
            raise NonPlanarAxisError(entity.entity_id, "reference direction leaves the plan")
        theta = math.atan2(ry, rx)
    return Pose2D(x, y, wrap_angle(theta)), z


def _axis_placement_2d(graph: EntityGraph, entity: StepEntity, scale: float) -> Pose2D:
    loc = _coords(graph, entity.args[0])
    x = loc[0] * scale if len(loc) > 0 else 0.0
    y = loc[1] * scale if len(loc) > 1 else 0.0
    theta = 0.0
    ref = entity.args[1] if len(entity.args) > 1 else UNSET
    if ref is not UNSET:
        r = _coords(graph, ref)
        theta = math.atan2(r[1] if len(r) > 1 else 0.0, r[0] if len(r) > 0 else 1.0)
    return Pose2D(x, y, wrap_angle(theta))


def compose_placement(graph: EntityGraph, placement_id: int | Ref,
                      scale: float = 1.0) -> tuple[Pose2D, float]:
    """World pose and elevation of an IFCLOCALPLACEMENT chain.

    Rotations must be pure z rotations and axes must point +z within 1e-6;
    chains that revisit a placement raise PlacementCycleError.
    """
    chain: list[StepEntity] = []
    seen: set[int] = set()
    current = placement_id
    while current is not None and current is not UNSET:
        entity = resolve_ref(graph, current)
        if entity.entity_id in seen:
            raise PlacementCycleError(tuple(e.entity_id for e in chain) + (entity.entity_id,))
        seen.add(entity.entity_id)
        chain.append(entity)
        current = entity.args[0] if entity.args else UNSET
        if current is not UNSET and not isinstance(current, Ref):
            current = UNSET

    pose = Pose2D(0.0, 0.0, 0.0)
    elevation = 0.0
    for entity in reversed(chain):  # root first
        rel = entity.args[1] if len(entity.args) > 1 else UNSET
        if rel is UNSET:
            continue
        rel_entity = resolve_ref(graph, rel)
        local, dz = _axis_placement_3d(graph, rel_entity, scale)
        pose = pose.compose(local)
        elevation += dz
    return pose, elevation


# ----------------------------------------------------------- profiles


def _profile_polygon(graph: EntityGraph, profile: StepEntity,
                     scale: float) -> Polygon2D:
    if profile.type_name == "IFCRECTANGLEPROFILEDEF":
        pos = profile.args[2] if len(profile.args) > 2 else UNSET
        pose = Pose2D(0.0, 0.0, 0.0)
        if pos is not UNSET:
            pose = _axis_placement_2d(graph, resolve_ref(graph, pos), scale)
        xdim = _num(profile.args[3])
        ydim = _num(profile.args[4])
        if not xdim or not ydim or xdim <= 0 or ydim <= 0:
            raise DegenerateProfileError(profile.entity_id, "non-positive rectangle dims")
        hx = 0.5 * xdim * scale
        hy = 0.5 * ydim * scale
        corners = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
        return Polygon2D.make(pose.apply(x, y) for x, y in corners)

    if profile.type_name == "IFCARBITRARYCLOSEDPROFILEDEF":
        curve = resolve_ref(graph, profile.args[2])
        if curve.type_name != "IFCPOLYLINE":
            raise UnsupportedRepresentationError(curve.type_name)
        points = [_coords(graph, p) for p in curve.args[0]]
        try:
            return Polygon2D.make((p[0] * scale, p[1] * scale) for p in points)
        except DegeneratePolygon as err:
            raise DegenerateProfileError(profile.entity_id, str(err)) from None

    raise UnsupportedRepresentationError(profile.type_name)


def _find_extruded_solid(graph: EntityGraph, product: StepEntity) -> StepEntity:
    rep = product.args[6] if len(product.args) > 6 else UNSET
    if rep is UNSET or not isinstance(rep, Ref):
        raise UnsupportedRepresentationError("missing representation")
    shape = resolve_ref(graph, rep)
    seen_types: list[str] = []
    reps = shape.args[2] if len(shape.args) > 2 and isinstance(shape.args[2], tuple) else ()
    for rep_ref in reps:
        sub = resolve_ref(graph, rep_ref)
        items = sub.args[3] if len(sub.args) > 3 and isinstance(sub.args[3], tuple) else ()
        for item_ref in items:
            item = resolve_ref(graph, item_ref)
            if item.type_name == "IFCEXTRUDEDAREASOLID":
                return item
            seen_types.append(item.type_name)
    raise UnsupportedRepresentationError(seen_types[0] if seen_types else "empty shape")


def footprint(graph: EntityGraph, product_id: int, cut_height: float,
              scale: float = 1.0) -> Polygon2D | None:
    """Horizontal cross-section of a product at one world height.

    Returns None when the product's extrusion does not span cut_height.
    Only vertical extrusions of rectangle/polyline profiles are supported.
    """
    product = graph.entities[product_id]
    solid = _find_extruded_solid(graph, product)

    direction = _coords(graph, solid.args[2])
    d3 = (direction + (0.0, 0.0, 0.0))[:3]
    norm = max((d3[0] ** 2 + d3[1] ** 2 + d3[2] ** 2) ** 0.5, 1e-300)
    dx, dy, dz = (c / norm for c in d3)
    if abs(dx) > _AXIS_TOL or abs(dy) > _AXIS_TOL or dz <= 0.0:
        raise UnsupportedRepresentationError("non-vertical extrusion")

    depth = _num(solid.args[3])
    if depth is None or depth <= 0:
        raise DegenerateProfileError(solid.entity_id, "non-positive extrusion depth")

    solid_pose = Pose2D(0.0, 0.0, 0.0)
    solid_z = 0.0
    pos = solid.args[1]
    if pos is not UNSET:
        solid_pose, solid_z = _axis_placement_3d(graph, resolve_ref(graph, pos), scale)

    placement = product.args[5] if len(product.args) > 5 else UNSET
    if placement is UNSET:
        object_pose, object_z = Pose2D(0.0, 0.0, 0.0), 0.0
    else:
        object_pose, object_z = compose_placement(graph, placement, scale)

    base = object_z + solid_z
    top = base + depth * scale
    if not (base - 1e-9 <= cut_height <= top + 1e-9):
        return None

    profile = _profile_polygon(graph, resolve_ref(graph, solid.args[0]), scale)
    world = object_pose.compose(solid_pose)
    return profile.transformed(world)


# ----------------------------------------------------------- materials


def material_of(graph: EntityGraph, product_id: int) -> str:
    """Material name associated to a product, or "UNKNOWN"."""
    for rel in entities_of_type(graph, "IFCRELASSOCIATESMATERIAL"):
        related = rel.args[4] if len(rel.args) > 4 and isinstance(rel.args[4], tuple) else ()
        if not any(_ref_id(r) == product_id for r in related):
            continue
        mat_ref = rel.args[5] if len(rel.args) > 5 else UNSET
        if not isinstance(mat_ref, Ref):
            continue
        material = resolve_ref(graph, mat_ref)
        if material.type_name == "IFCMATERIAL" and material.args:
            name = _text(material.args[0])
            if name:
                return name
        if material.args and isinstance(material.args[0], str):
            return material.args[0]
    return "UNKNOWN"


# -------------------------------------------------- visibility rules


DEFAULT_VISIBILITY_RULES: tuple[tuple[str, bool], ...] = (("Glass*", False),)

_TRUE_WORDS = {"true", "yes", "visible", "1"}
_FALSE_WORDS = {"false", "no", "invisible", "0"}


@dataclass(frozen=True)
class VisibilityTable:
    """Ordered material-name patterns; first match decides sensor visibility.

    Names not matched by any rule are visible. The shipped default marks
    glass-like materials invisible to the mapping sensor.
    """

    rules: tuple[tuple[str, bool], ...] = DEFAULT_VISIBILITY_RULES

    def lookup(self, material_name: str) -> bool:
        name = material_name.lower()
        for pattern, visible in self.rules:
            if fnmatch.fnmatch(name, pattern.lower()):
                return visible
        return True


def parse_visibility_table(text: str) -> VisibilityTable:
    """Parse ``pattern: true|false`` lines; blank lines and ``#`` comments
    are ignored; shipped defaults stay as the fallback rules."""
    rules: list[tuple[str, bool]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        pattern, sep, value = line.partition(":")
        word = value.strip().lower()
        if not sep or not pattern.strip():
            raise ValueError(f"visibility table line {lineno}: expected 'pattern: value'")
        if word in _TRUE_WORDS:
            visible = True
        elif word in _FALSE_WORDS:
            visible = False
        else:
            raise ValueError(f"visibility table line {lineno}: bad value {value.strip()!r}")
        rules.append((pattern.strip(), visible))
    return VisibilityTable(tuple(rules) + DEFAULT_VISIBILITY_RULES)


def load_visibility_table(path: str | Path) -> VisibilityTable:
    return parse_visibility_table(Path(path).read_text(encoding="utf-8"))


# ------------------------------------------------------ function tags


_KEYWORD_TAGS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("CORRIDOR", ("corridor",)),
    ("COULOIR", ("corridor",)),
    ("VESTIBULE", ("vestibule",)),
    ("HALL", ("hall",)),
    ("W.C.", ("washroom",)),
    ("TOILETTE", ("washroom",)),
    ("BUREAU", ("office",)),
    ("ENTREPRENEUR", ("contractor", "contractor_office")),
    ("ESCALIER", ("stair",)),
)


def parse_function_tags(text: str) -> dict[str, tuple[str, ...]]:
    """Overrides document: ``LONG NAME: tag1,tag2`` per line."""
    overrides: dict[str, tuple[str, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, tags = line.partition(":")
        if not sep or not name.strip():
            raise ValueError(f"function tags line {lineno}: expected 'long name: tags'")
        parsed = tuple(t.strip() for t in tags.split(",") if t.strip())
        overrides[name.strip().upper()] = parsed
    return overrides


def load_function_tags(path: str | Path) -> dict[str, tuple[str, ...]]:
    return parse_function_tags(Path(path).read_text(encoding="utf-8"))


def tags_for(long_name: str, overrides: dict[str, tuple[str, ...]] | None = None) -> tuple[str, ...]:
    upper = long_name.upper()
    tags: set[str] = set()
    for keyword, keyword_tags in _KEYWORD_TAGS:
        if keyword in upper:
            tags.update(keyword_tags)
    if overrides:
        tags.update(overrides.get(upper, ()))
    return tuple(sorted(tags))


# ------------------------------------------------------------- units


_SI_PREFIX = {
    "EXA": 1e18, "PETA": 1e15, "TERA": 1e12, "GIGA": 1e9, "MEGA": 1e6,
    "KILO": 1e3, "HECTO": 1e2, "DECA": 1e1, "DECI": 1e-1, "CENTI": 1e-2,
    "MILLI": 1e-3, "MICRO": 1e-6, "NANO": 1e-9,
}


def _is_length_unit(entity: StepEntity) -> bool:
    for arg in entity.args:
        if isinstance(arg, EnumValue) and arg.name == "LENGTHUNIT":
            return True
    return False


def _si_unit_scale(entity: StepEntity) -> float:
    scale = 1.0
    for arg in entity.args:
        if isinstance(arg, EnumValue) and arg.name in _SI_PREFIX:
            scale *= _SI_PREFIX[arg.name]
    return scale


def unit_scale(graph: EntityGraph) -> float:
    """Factor converting model length units into meters (default 1.0)."""
    for entity in entities_of_type(graph, "IFCCONVERSIONBASEDUNIT"):
        if not _is_length_unit(entity):
            continue
        factor_ref = entity.args[3] if len(entity.args) > 3 else UNSET
        if not isinstance(factor_ref, Ref):
            continue
        measure = resolve_ref(graph, factor_ref)
        value = _num(measure.args[0] if measure.args else None, 1.0)
        inner = 1.0
        unit_ref = measure.args[1] if len(measure.args) > 1 else UNSET
        if isinstance(unit_ref, Ref):
            inner_entity = resolve_ref(graph, unit_ref)
            if inner_entity.type_name == "IFCSIUNIT":
                inner = _si_unit_scale(inner_entity)
        return float(value) * inner
    for entity in entities_of_type(graph, "IFCSIUNIT"):
        if _is_length_unit(entity):
            return _si_unit_scale(entity)
    return 1.0


# -------------------------------------------------------- boundaries


def space_boundaries(graph: EntityGraph) -> list[BoundaryRel]:
    """All space-boundary relations, in entity-id order.

    A relation without a building element, or flagged virtual, is VIRTUAL;
    the connection-geometry entity id (when given) pairs the two sides of
    an open, doorless transition."""
    out: list[BoundaryRel] = []
    for rel in entities_of_type(graph, "IFCRELSPACEBOUNDARY"):
        space_ref = rel.args[4] if len(rel.args) > 4 else UNSET
        if not isinstance(space_ref, Ref):
            continue
        space = resolve_ref(graph, space_ref)
        space_gid = _text(space.args[0] if space.args else None)

        element_gid: str | None = None
        element_ref = rel.args[5] if len(rel.args) > 5 else UNSET
        if isinstance(element_ref, Ref):
            element = resolve_ref(graph, element_ref)
            element_gid = _text(element.args[0] if element.args else None) or None

        geometry = _ref_id(rel.args[6]) if len(rel.args) > 6 else None

        flag = rel.args[7] if len(rel.args) > 7 else UNSET
        virtual_flag = isinstance(flag, EnumValue) and flag.name == "VIRTUAL"
        kind = VIRTUAL if (element_gid is None or virtual_flag) else PHYSICAL
        out.append(BoundaryRel(space=space_gid, element=element_gid, kind=kind, geometry=geometry))
    return out


# -------------------------------------------------------- extraction


def _global_id(entity: StepEntity) -> str:
    return _text(entity.args[0] if entity.args else None)


def extract_model(graph: EntityGraph, *,
                  cut_offset: float = 1.0,
                  visibility: VisibilityTable | None = None,
                  tag_overrides: dict[str, tuple[str, ...]] | None = None,
                  ) -> tuple[BuildingModel, list[Issue]]:
    """Reduce a parsed graph to the plan-view model.

    Per-element failures (unsupported bodies, degenerate profiles, bad
    placements, duplicate ids) are collected as issues; the returned model
    holds the valid subset. Cut height is each element's storey elevation
    plus ``cut_offset``.
    """
    vis = visibility or VisibilityTable()
    scale = unit_scale(graph)
    issues: list[Issue] = []

    project_name = ""
    projects = entities_of_type(graph, "IFCPROJECT")
    if projects:
        project_name = _text(projects[0].args[2] if len(projects[0].args) > 2 else None)

    storeys: list[StoreyRec] = []
    storey_elevations: dict[str, float] = {}
    for entity in entities_of_type(graph, "IFCBUILDINGSTOREY"):
        gid = _global_id(entity)
        name = _text(entity.args[2] if len(entity.args) > 2 else None)
        elevation = _num(entity.args[9] if len(entity.args) > 9 else None)
        if elevation is None:
            try:
                _, elevation = compose_placement(graph, entity.args[5], scale) \
                    if len(entity.args) > 5 and isinstance(entity.args[5], Ref) else (None, 0.0)
            except ModelError as err:
                issues.append(Issue(entity.entity_id, gid, type(err).__name__, str(err)))
                elevation = 0.0
        else:
            elevation *= scale
        storeys.append(StoreyRec(gid, name, float(elevation)))
        storey_elevations[gid] = float(elevation)

    # entity id -> storey GlobalId, from both containment relation kinds
    containment: dict[int, str] = {}
    for rel in entities_of_type(graph, "IFCRELAGGREGATES"):
        relating = rel.args[4] if len(rel.args) > 4 else UNSET
        related = rel.args[5] if len(rel.args) > 5 and isinstance(rel.args[5], tuple) else ()
        if isinstance(relating, Ref):
            parent = resolve_ref(graph, relating)
            if parent.type_name == "IFCBUILDINGSTOREY":
                for child in related:
                    cid = _ref_id(child)
                    if cid is not None:
                        containment[cid] = _global_id(parent)
    for rel in entities_of_type(graph, "IFCRELCONTAINEDINSPATIALSTRUCTURE"):
        related = rel.args[4] if len(rel.args) > 4 and isinstance(rel.args[4], tuple) else ()
        relating = rel.args[5] if len(rel.args) > 5 else UNSET
        if isinstance(relating, Ref):
            parent = resolve_ref(graph, relating)
            if parent.type_name == "IFCBUILDINGSTOREY":
                for child in related:
                    cid = _ref_id(child)
                    if cid is not None:
                        containment[cid] = _global_id(parent)

    def cut_height_for(entity_id: int) -> tuple[float, str | None]:
        storey_gid = containment.get(entity_id)
        base = storey_elevations.get(storey_gid, 0.0) if storey_gid else 0.0
        return base + cut_offset, storey_gid

    # door openings: door entity id -> host wall GlobalId
    opening_host: dict[int, str] = {}
    for rel in entities_of_type(graph, "IFCRELVOIDSELEMENT"):
        wall_ref = rel.args[4] if len(rel.args) > 4 else UNSET
        opening_ref = rel.args[5] if len(rel.args) > 5 else UNSET
        if isinstance(wall_ref, Ref) and isinstance(opening_ref, Ref):
            opening_host[opening_ref.entity_id] = _global_id(resolve_ref(graph, wall_ref))
    door_host: dict[int, str] = {}
    for rel in entities_of_type(graph, "IFCRELFILLSELEMENT"):
        opening_ref = rel.args[4] if len(rel.args) > 4 else UNSET
        filler_ref = rel.args[5] if len(rel.args) > 5 else UNSET
        if isinstance(opening_ref, Ref) and isinstance(filler_ref, Ref):
            host = opening_host.get(opening_ref.entity_id)
            if host:
                door_host[filler_ref.entity_id] = host

    landmarks: list[Landmark] = []
    doors: list[DoorRec] = []
    seen_gids: set[str] = set()

    for type_name, ifc_class in LANDMARK_CLASSES.items():
        for entity in entities_of_type(graph, type_name):
            gid = _global_id(entity)
            if gid in seen_gids:
                issues.append(Issue(entity.entity_id, gid, "DuplicateGlobalId",
                                    f"GlobalId {gid!r} already used"))
                continue
            cut, storey_gid = cut_height_for(entity.entity_id)
            try:
                placement = entity.args[5] if len(entity.args) > 5 else UNSET
                if isinstance(placement, Ref):
                    pose, elevation = compose_placement(graph, placement, scale)
                else:
                    pose, elevation = Pose2D(0.0, 0.0, 0.0), 0.0
                poly = footprint(graph, entity.entity_id, cut, scale)
            except ModelError as err:
                issues.append(Issue(entity.entity_id, gid, type(err).__name__, str(err)))
                continue
            if poly is None:
                issues.append(Issue(entity.entity_id, gid, "OutsideCut",
                                    f"extrusion does not span cut height {cut}"))
                continue
            name = material_of(graph, entity.entity_id)
            material = MaterialInfo(name, vis.lookup(name))
            landmarks.append(Landmark(gid, ifc_class, pose, elevation, poly, material, storey_gid))
            seen_gids.add(gid)

            if ifc_class == "IfcDoor":
                height = _num(entity.args[8] if len(entity.args) > 8 else None, 0.0) or 0.0
                width = _num(entity.args[9] if len(entity.args) > 9 else None, 0.0) or 0.0
                doors.append(DoorRec(
                    global_id=gid,
                    width=width * scale,
                    height=height * scale,
                    center=poly.centroid,
                    host_wall=door_host.get(entity.entity_id),
                ))

    spaces: list[SpaceRec] = []
    for entity in entities_of_type(graph, "IFCSPACE"):
        gid = _global_id(entity)
        if gid in seen_gids:
            issues.append(Issue(entity.entity_id, gid, "DuplicateGlobalId",
                                f"GlobalId {gid!r} already used"))
            continue
        cut, storey_gid = cut_height_for(entity.entity_id)
        try:
            poly = footprint(graph, entity.entity_id, cut, scale)
        except ModelError as err:
            issues.append(Issue(entity.entity_id, gid, type(err).__name__, str(err)))
            continue
        if poly is None:
            issues.append(Issue(entity.entity_id, gid, "OutsideCut",
                                f"extrusion does not span cut height {cut}"))
            continue
        long_name = _text(entity.args[7] if len(entity.args) > 7 else None) \
            or _text(entity.args[2] if len(entity.args) > 2 else None)
        spaces.append(SpaceRec(
            global_id=gid,
            long_name=long_name,
            polygon=poly,
            centroid=poly.centroid,
            storey=storey_gid,
            function_tags=tags_for(long_name, tag_overrides),
        ))
        seen_gids.add(gid)

    boundaries = space_boundaries(graph)
    known = seen_gids | {s.global_id for s in storeys}
    for rel in boundaries:
        if rel.element is not None and rel.element not in known:
            issues.append(Issue(-1, rel.element, "UnresolvedBoundary",
                                f"boundary of {rel.space!r} names element {rel.element!r}"
                                " that was not extracted"))

    model = BuildingModel(
        project_name=project_name,
        storeys=storeys,
        spaces=spaces,
        landmarks=landmarks,
        doors=doors,
        boundaries=boundaries,
        unit_scale=scale,
    )
    if issues:
        LOGGER.info("extraction finished with %d issue(s)", len(issues))
    return model, issues
