"""Class taxonomy and triple store for building contents.

The taxonomy bridges an upper ontology (entity/physical/abstract split),
robotics map concepts (metric, topological and occupancy-grid maps), and
the building-element classes that matter for plan-view navigation. Parsed
building models are classified into instances carrying material,
visibility, centroid, containment and connectivity assertions, all
queryable through conjunctive triple patterns with subclass inference on
type. The builtin subclass edges are immutable; everything else may be
asserted at runtime.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover
    from .building_model import BuildingModel
    from .gis_ingest import SiteModel

_PREFIXES = frozenset({"sumo", "cora", "corax", "mdr", "birs", "ifc", "inst", "rdf", "rdfs"})


class OntologyError(Exception):
    """Base class for store violations."""


class UnknownClassError(OntologyError):
    def __init__(self, iri: "Iri"):
        super().__init__(f"unknown class {iri}")
        self.iri = iri


class UnknownPredicateError(OntologyError):
    def __init__(self, iri: "Iri"):
        super().__init__(f"unknown predicate {iri}")
        self.iri = iri


class TaxonomyMutationError(OntologyError):
    def __init__(self, iri: "Iri"):
        super().__init__(f"builtin class {iri} cannot be re-parented")
        self.iri = iri


class CycleIntroducedError(OntologyError):
    def __init__(self, child: "Iri", parent: "Iri"):
        super().__init__(f"{child} subClassOf {parent} would introduce a cycle")
        self.child = child
        self.parent = parent


@dataclass(frozen=True)
class Iri:
    """A prefixed name from the closed namespace set."""

    prefix: str
    local: str

    def __post_init__(self):
        if self.prefix not in _PREFIXES:
            raise ValueError(f"unknown prefix {self.prefix!r}")

    def __str__(self) -> str:
        return f"{self.prefix}:{self.local}"


@dataclass(frozen=True)
class Var:
    """A query variable; renders as ?name."""

    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


#: Literal objects are str, bool, int, float, or an (x, y) point tuple.
Literal = object

Triple = tuple  # (Iri, Iri, Iri | Literal)


def _iri(prefix: str, local: str) -> Iri:
    return Iri(prefix, local)


RDF_TYPE = _iri("rdf", "type")
RDFS_SUBCLASS_OF = _iri("rdfs", "subClassOf")
HAS_MATERIAL = _iri("birs", "hasMaterial")
BOUNDED_BY = _iri("birs", "boundedBy")
HAS_CENTROID = _iri("birs", "hasCentroid")
LOCATED_ON_STOREY = _iri("birs", "locatedOnStorey")
CONNECTS_TO = _iri("birs", "connectsTo")
SENSOR_VISIBLE = _iri("birs", "sensorVisible")
LONG_NAME = _iri("birs", "longName")
HAS_FUNCTION_TAG = _iri("birs", "hasFunctionTag")

VOCABULARY = frozenset({
    RDF_TYPE, RDFS_SUBCLASS_OF, HAS_MATERIAL, BOUNDED_BY, HAS_CENTROID,
    LOCATED_ON_STOREY, CONNECTS_TO, SENSOR_VISIBLE, LONG_NAME, HAS_FUNCTION_TAG,
})

# upper-ontology anchors
ENTITY = _iri("sumo", "Entity")
PHYSICAL = _iri("sumo", "Physical")
ABSTRACT = _iri("sumo", "Abstract")
OBJECT = _iri("sumo", "Object")
PROCESS = _iri("sumo", "Process")
CONTENT_BEARING_OBJECT = _iri("cora", "ContentBearingObject")
PHYSICAL_ENVIRONMENT = _iri("corax", "PhysicalEnvironment")
REGION = _iri("cora", "Region")
MAP = _iri("mdr", "Map")
METRIC_MAP = _iri("mdr", "MetricMap")
TOPOLOGICAL_MAP = _iri("mdr", "TopologicalMap")
CONTINUOUS_METRIC_MAP = _iri("mdr", "ContinuousMetricMap")
DISCRETE_METRIC_MAP = _iri("mdr", "DiscreteMetricMap")
OCCUPANCY_GRID_MAP = _iri("mdr", "OccupancyGridMap")
SPATIAL_STRUCTURE_ELEMENT = _iri("birs", "SpatialStructureElement")
TOPOGRAPHY = _iri("birs", "Topography")
LANDMARK = _iri("birs", "Landmark")
SPACE = _iri("birs", "Space")
UNCERTAINTY = _iri("birs", "Uncertainty")
BUILDING_ELEMENT = _iri("birs", "BuildingElement")
EXISTING_BUILDING = _iri("birs", "ExistingBuilding")
WATER_SURFACE = _iri("birs", "WaterSurface")
VEGETATION = _iri("birs", "Vegetation")

IFC_WALL = _iri("ifc", "IfcWall")
IFC_CURTAIN_WALL = _iri("ifc", "IfcCurtainWall")
IFC_COLUMN = _iri("ifc", "IfcColumn")
IFC_DOOR = _iri("ifc", "IfcDoor")
IFC_RAILING = _iri("ifc", "IfcRailing")
IFC_STAIR = _iri("ifc", "IfcStair")

#: The immutable subclass skeleton: (child, parent) pairs.
BUILTIN_EDGES: tuple[tuple[Iri, Iri], ...] = (
    (PHYSICAL, ENTITY),
    (ABSTRACT, ENTITY),
    (OBJECT, PHYSICAL),
    (PROCESS, PHYSICAL),
    (_iri("sumo", "Quantity"), ABSTRACT),
    (_iri("sumo", "Attribute"), ABSTRACT),
    (_iri("sumo", "SetOrClass"), ABSTRACT),
    (_iri("sumo", "Relation"), ABSTRACT),
    (_iri("sumo", "Proposition"), ABSTRACT),
    (PHYSICAL_ENVIRONMENT, OBJECT),
    (REGION, PHYSICAL_ENVIRONMENT),
    (MAP, CONTENT_BEARING_OBJECT),
    (METRIC_MAP, MAP),
    (TOPOLOGICAL_MAP, MAP),
    (CONTINUOUS_METRIC_MAP, METRIC_MAP),
    (DISCRETE_METRIC_MAP, METRIC_MAP),
    (OCCUPANCY_GRID_MAP, DISCRETE_METRIC_MAP),
    (SPATIAL_STRUCTURE_ELEMENT, PHYSICAL_ENVIRONMENT),
    (TOPOGRAPHY, PHYSICAL_ENVIRONMENT),
    (LANDMARK, REGION),
    (SPACE, REGION),
    (UNCERTAINTY, REGION),
    (BUILDING_ELEMENT, LANDMARK),
    (IFC_WALL, BUILDING_ELEMENT),
    (IFC_CURTAIN_WALL, BUILDING_ELEMENT),
    (IFC_COLUMN, BUILDING_ELEMENT),
    (IFC_DOOR, BUILDING_ELEMENT),
    (IFC_RAILING, BUILDING_ELEMENT),
    (IFC_STAIR, BUILDING_ELEMENT),
    (EXISTING_BUILDING, TOPOGRAPHY),
    (WATER_SURFACE, TOPOGRAPHY),
    (VEGETATION, TOPOGRAPHY),
)

#: Companion classes present as taxonomy nodes without subclass assertions
#: or instances.
EXTRA_CLASS_NODES: tuple[Iri, ...] = (
    _iri("cora", "Robot"),
    _iri("cora", "RobotGroup"),
    _iri("cora", "RoboticSystem"),
    _iri("cora", "RoboticEnvironment"),
    _iri("corax", "Design"),
)

_BUILTIN_CHILDREN = frozenset(child for child, _ in BUILTIN_EDGES)

#: Pairs of classes whose instance sets must stay disjoint.
DISJOINT_PAIRS: tuple[tuple[Iri, Iri], ...] = (
    (OBJECT, PROCESS),
    (CONTINUOUS_METRIC_MAP, DISCRETE_METRIC_MAP),
)

#: GIS feature categories to topography classes.
TOPOGRAPHY_CLASSES = {
    "ExistingBuilding": EXISTING_BUILDING,
    "WaterSurface": WATER_SURFACE,
    "Vegetation": VEGETATION,
}


class TripleStore:
    """Triples plus the subclass graph and simple join queries."""

    def __init__(self):
        self._triples: set[Triple] = set()
        self._by_predicate: dict[Iri, set[Triple]] = {}
        self._parents: dict[Iri, set[Iri]] = {}
        self._classes: set[Iri] = set()

    # -------------------------------------------------- construction

    def _add_raw(self, subject: Iri, predicate: Iri, obj) -> None:
        triple = (subject, predicate, obj)
        if triple in self._triples:
            return
        self._triples.add(triple)
        self._by_predicate.setdefault(predicate, set()).add(triple)
        if predicate == RDFS_SUBCLASS_OF:
            self._parents.setdefault(subject, set()).add(obj)
            self._classes.add(subject)
            self._classes.add(obj)
        elif predicate == RDF_TYPE:
            self._classes.add(obj)

    def register_class(self, iri: Iri) -> None:
        self._classes.add(iri)

    def assert_triple(self, subject: Iri, predicate: Iri, obj) -> None:
        """Add one triple, guarding the taxonomy skeleton.

        Re-asserting an existing triple is a no-op. Asserting a new parent
        for a builtin class fails; so does any subclass edge that would
        close a cycle."""
        if predicate not in VOCABULARY:
            raise UnknownPredicateError(predicate)
        if (subject, predicate, obj) in self._triples:
            return
        if predicate == RDFS_SUBCLASS_OF:
            if not isinstance(obj, Iri):
                raise ValueError("subClassOf object must be a class IRI")
            if subject in _BUILTIN_CHILDREN:
                raise TaxonomyMutationError(subject)
            if subject == obj or self.is_reachable(obj, subject):
                raise CycleIntroducedError(subject, obj)
        self._add_raw(subject, predicate, obj)

    # ------------------------------------------------------ taxonomy

    def is_reachable(self, child: Iri, ancestor: Iri) -> bool:
        """True when ancestor is reachable from child over subclass edges."""
        if child == ancestor:
            return True
        stack = [child]
        seen = {child}
        while stack:
            current = stack.pop()
            for parent in self._parents.get(current, ()):
                if parent == ancestor:
                    return True
                if parent not in seen:
                    seen.add(parent)
                    stack.append(parent)
        return False

    def is_subclass_of(self, child: Iri, ancestor: Iri) -> bool:
        """Reflexive-transitive subclass test over known classes."""
        if child not in self._classes:
            raise UnknownClassError(child)
        if ancestor not in self._classes:
            raise UnknownClassError(ancestor)
        return self.is_reachable(child, ancestor)

    def subclass_edges(self) -> set[tuple[Iri, Iri]]:
        return {(s, o) for s, p, o in self._by_predicate.get(RDFS_SUBCLASS_OF, ())}

    def known_classes(self) -> set[Iri]:
        return set(self._classes)

    def descendants(self, ancestor: Iri) -> set[Iri]:
        """ancestor plus every known class below it."""
        return {cls for cls in self._classes if self.is_reachable(cls, ancestor)}

    # ------------------------------------------------------- lookup

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._triples

    def __eq__(self, other) -> bool:
        if not isinstance(other, TripleStore):
            return NotImplemented
        return self._triples == other._triples

    def triples(self) -> set[Triple]:
        return set(self._triples)

    def instances_of(self, cls: Iri, inferred: bool = True) -> list[Iri]:
        """Subjects typed at cls; with inference, at any descendant."""
        if cls not in self._classes:
            raise UnknownClassError(cls)
        targets = self.descendants(cls) if inferred else {cls}
        found = {s for s, _, o in self._by_predicate.get(RDF_TYPE, ()) if o in targets}
        return sorted(found, key=_sort_key)

    def query(self, patterns: Iterable[tuple]) -> list[dict[str, object]]:
        """Conjunctive match of (s, p, o) patterns.

        Constants are Iris or literals, variables are Var. Type patterns
        with a constant class match instances of subclasses too. Results
        are every consistent binding, sorted deterministically."""
        pattern_list = [tuple(p) for p in patterns]
        for _, predicate, _ in pattern_list:
            if isinstance(predicate, Iri) and predicate not in VOCABULARY:
                raise UnknownPredicateError(predicate)

        results: set[tuple] = set()
        var_names = sorted({term.name for pat in pattern_list
                            for term in pat if isinstance(term, Var)})

        def backtrack(index: int, binding: dict[str, object]):
            if index == len(pattern_list):
                results.add(tuple(binding.get(name) for name in var_names))
                return
            subject, predicate, obj = (
                _substitute(term, binding) for term in pattern_list[index]
            )
            for s, p, o in self._candidates(predicate):
                new = dict(binding)
                if not _unify(subject, s, new):
                    continue
                if not _unify(predicate, p, new):
                    continue
                if p == RDF_TYPE and isinstance(obj, Iri):
                    # inferred typing: the asserted class may be a descendant
                    if not (o in self._classes and self.is_reachable(o, obj)):
                        continue
                elif not _unify(obj, o, new):
                    continue
                backtrack(index + 1, new)

        backtrack(0, {})
        rows = [dict(zip(var_names, values)) for values in
                sorted(results, key=lambda vals: tuple(_sort_key(v) for v in vals))]
        return rows

    def _candidates(self, predicate) -> Iterable[Triple]:
        if isinstance(predicate, Iri):
            return self._by_predicate.get(predicate, ())
        return self._triples

    # ---------------------------------------------------- validation

    def validate_disjoint(self) -> list[tuple[Iri, Iri, Iri]]:
        """Instances typed under both halves of a disjoint class pair."""
        violations = []
        for left, right in DISJOINT_PAIRS:
            in_left = set(self.instances_of(left)) if left in self._classes else set()
            in_right = set(self.instances_of(right)) if right in self._classes else set()
            for instance in sorted(in_left & in_right, key=_sort_key):
                violations.append((instance, left, right))
        return violations

    def validate_acyclic(self) -> bool:
        """True when subclass edges form a DAG (they always should)."""
        colors: dict[Iri, int] = {}

        def visit(node: Iri) -> bool:
            colors[node] = 1
            for parent in self._parents.get(node, ()):
                state = colors.get(parent, 0)
                if state == 1:
                    return False
                if state == 0 and not visit(parent):
                    return False
            colors[node] = 2
            return True

        return all(visit(node) for node in list(self._parents) if colors.get(node, 0) == 0)


def _substitute(term, binding: dict[str, object]):
    if isinstance(term, Var) and term.name in binding:
        return binding[term.name]
    return term


def _unify(pattern_term, value, binding: dict[str, object]) -> bool:
    if isinstance(pattern_term, Var):
        binding[pattern_term.name] = value
        return True
    return pattern_term == value


def _sort_key(value) -> tuple:
    if isinstance(value, Iri):
        return (0, value.prefix, value.local)
    if isinstance(value, bool):
        return (1, "bool", str(value))
    if isinstance(value, (int, float)):
        return (1, "num", f"{float(value):.17g}", repr(value))
    if isinstance(value, str):
        return (1, "str", value)
    if isinstance(value, tuple):
        return (1, "point") + tuple(repr(float(c)) for c in value)
    return (2, repr(value))


def builtin_taxonomy() -> TripleStore:
    """A fresh store holding exactly the builtin subclass assertions."""
    store = TripleStore()
    for child, parent in BUILTIN_EDGES:
        store._add_raw(child, RDFS_SUBCLASS_OF, parent)
    for node in EXTRA_CLASS_NODES:
        store.register_class(node)
    return store


# ------------------------------------------------------ classification


def instance_iri(global_id: str) -> Iri:
    return Iri("inst", global_id)


_IFC_CLASS_IRIS = {
    "IfcWall": IFC_WALL,
    "IfcCurtainWall": IFC_CURTAIN_WALL,
    "IfcColumn": IFC_COLUMN,
    "IfcDoor": IFC_DOOR,
    "IfcRailing": IFC_RAILING,
    "IfcStair": IFC_STAIR,
}


def classify_model(model: "BuildingModel") -> TripleStore:
    """Builtin taxonomy plus one instance per storey, space, landmark and
    door, with material, visibility, centroid, containment, boundary and
    door-connectivity assertions."""
    store = builtin_taxonomy()

    for storey in model.storeys:
        node = instance_iri(storey.global_id)
        store.assert_triple(node, RDF_TYPE, SPATIAL_STRUCTURE_ELEMENT)
        store.assert_triple(node, LONG_NAME, storey.name)

    for space in model.spaces:
        node = instance_iri(space.global_id)
        store.assert_triple(node, RDF_TYPE, SPACE)
        store.assert_triple(node, LONG_NAME, space.long_name)
        store.assert_triple(node, HAS_CENTROID, tuple(space.centroid))
        if space.storey:
            store.assert_triple(node, LOCATED_ON_STOREY, instance_iri(space.storey))
        for tag in space.function_tags:
            store.assert_triple(node, HAS_FUNCTION_TAG, tag)

    for landmark in model.landmarks:
        node = instance_iri(landmark.global_id)
        store.assert_triple(node, RDF_TYPE, _IFC_CLASS_IRIS[landmark.ifc_class])
        store.assert_triple(node, HAS_MATERIAL, landmark.material.name)
        store.assert_triple(node, SENSOR_VISIBLE, landmark.material.sensor_visible)
        store.assert_triple(node, HAS_CENTROID, tuple(landmark.footprint.centroid))
        if landmark.storey:
            store.assert_triple(node, LOCATED_ON_STOREY, instance_iri(landmark.storey))

    door_ids = {door.global_id for door in model.doors}
    landmark_ids = {lm.global_id for lm in model.landmarks}
    door_rooms: dict[str, set[str]] = {}
    for rel in model.boundaries:
        if rel.element and rel.element in landmark_ids:
            store.assert_triple(instance_iri(rel.space), BOUNDED_BY, instance_iri(rel.element))
        if rel.element in door_ids:
            door_rooms.setdefault(rel.element, set()).add(rel.space)
    for rooms in door_rooms.values():
        ordered = sorted(rooms)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1:]:
                store.assert_triple(instance_iri(a), CONNECTS_TO, instance_iri(b))
                store.assert_triple(instance_iri(b), CONNECTS_TO, instance_iri(a))
    return store


def classify_site(site: "SiteModel") -> TripleStore:
    """classify_model extended with one topography instance per obstacle."""
    store = classify_model(site.building)
    for obstacle in site.obstacles:
        node = instance_iri(obstacle.feature_id)
        store.assert_triple(node, RDF_TYPE, TOPOGRAPHY_CLASSES[obstacle.category])
        store.assert_triple(node, HAS_CENTROID, tuple(obstacle.polygon.centroid))
    return store


# -------------------------------------------------------- serialization

_IRI_RE = re.compile(r"([a-z]+):([A-Za-z0-9_.\-]+)")
_POINT_RE = re.compile(r"point\((.+),(.+)\)")


def _term_text(value) -> str:
    if isinstance(value, Iri):
        return str(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=True)
    if isinstance(value, tuple) and len(value) == 2:
        return f"point({value[0]!r},{value[1]!r})"
    raise TypeError(f"cannot serialize literal {value!r}")


def export_ntriples(store: TripleStore) -> str:
    """One sorted `s p o .` line per triple."""
    lines = []
    for s, p, o in sorted(store.triples(),
                          key=lambda t: (_sort_key(t[0]), _sort_key(t[1]), _sort_key(t[2]))):
        lines.append(f"{_term_text(s)} {_term_text(p)} {_term_text(o)} .")
    return "\n".join(lines) + ("\n" if lines else "")


def _parse_term(text: str):
    if text.startswith('"'):
        return json.loads(text)
    if text == "true":
        return True
    if text == "false":
        return False
    point = _POINT_RE.fullmatch(text)
    if point:
        return (float(point.group(1)), float(point.group(2)))
    iri = _IRI_RE.fullmatch(text)
    if iri:
        return Iri(iri.group(1), iri.group(2))
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_ntriples(text: str) -> TripleStore:
    """Inverse of export_ntriples; input is trusted (our own exports)."""
    store = TripleStore()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not line.endswith(" ."):
            raise ValueError(f"line {lineno}: missing terminal ' .'")
        body = line[:-2]
        subject_text, _, rest = body.partition(" ")
        predicate_text, _, object_text = rest.partition(" ")
        store._add_raw(
            _parse_term(subject_text),
            _parse_term(predicate_text),
            _parse_term(object_text),
        )
    for node in EXTRA_CLASS_NODES:
        store.register_class(node)
    return store
