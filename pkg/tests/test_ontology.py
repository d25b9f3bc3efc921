from __future__ import annotations

import pytest

from birs import ontology as ont
from birs.ontology import Iri, Var

from modelkit import door, landmark, make_model, phys, rect, space

# Independent transcription of the subclass skeleton: every edge as a
# "child -> parent" string, compared verbatim against the store.
EXPECTED_EDGES = {
    "sumo:Physical -> sumo:Entity",
    "sumo:Abstract -> sumo:Entity",
    "sumo:Object -> sumo:Physical",
    "sumo:Process -> sumo:Physical",
    "sumo:Quantity -> sumo:Abstract",
    "sumo:Attribute -> sumo:Abstract",
    "sumo:SetOrClass -> sumo:Abstract",
    "sumo:Relation -> sumo:Abstract",
    "sumo:Proposition -> sumo:Abstract",
    "corax:PhysicalEnvironment -> sumo:Object",
    "cora:Region -> corax:PhysicalEnvironment",
    "mdr:Map -> cora:ContentBearingObject",
    "mdr:MetricMap -> mdr:Map",
    "mdr:TopologicalMap -> mdr:Map",
    "mdr:ContinuousMetricMap -> mdr:MetricMap",
    "mdr:DiscreteMetricMap -> mdr:MetricMap",
    "mdr:OccupancyGridMap -> mdr:DiscreteMetricMap",
    "birs:SpatialStructureElement -> corax:PhysicalEnvironment",
    "birs:Topography -> corax:PhysicalEnvironment",
    "birs:Landmark -> cora:Region",
    "birs:Space -> cora:Region",
    "birs:Uncertainty -> cora:Region",
    "birs:BuildingElement -> birs:Landmark",
    "ifc:IfcWall -> birs:BuildingElement",
    "ifc:IfcCurtainWall -> birs:BuildingElement",
    "ifc:IfcColumn -> birs:BuildingElement",
    "ifc:IfcDoor -> birs:BuildingElement",
    "ifc:IfcRailing -> birs:BuildingElement",
    "ifc:IfcStair -> birs:BuildingElement",
    "birs:ExistingBuilding -> birs:Topography",
    "birs:WaterSurface -> birs:Topography",
    "birs:Vegetation -> birs:Topography",
}


def test_builtin_edges_exact():
    store = ont.builtin_taxonomy()
    got = {f"{c} -> {p}" for c, p in store.subclass_edges()}
    assert got == EXPECTED_EDGES
    assert len(got) == 32


def test_companion_classes_known_without_edges():
    store = ont.builtin_taxonomy()
    robot = Iri("cora", "Robot")
    assert robot in store.known_classes()
    assert store.is_subclass_of(robot, robot)
    assert not store.is_subclass_of(robot, ont.ENTITY)
    assert Iri("corax", "Design") in store.known_classes()


def test_required_subclass_answers():
    store = ont.builtin_taxonomy()
    assert store.is_subclass_of(ont.IFC_WALL, ont.LANDMARK)
    assert store.is_subclass_of(ont.OCCUPANCY_GRID_MAP, ont.MAP)
    assert store.is_subclass_of(ont.IFC_DOOR, ont.ENTITY)
    assert not store.is_subclass_of(ont.SPACE, ont.LANDMARK)
    assert not store.is_subclass_of(ont.LANDMARK, ont.IFC_WALL)


def test_subclass_reflexive_and_antisymmetric():
    store = ont.builtin_taxonomy()
    classes = sorted(store.known_classes(), key=str)
    for cls in classes:
        assert store.is_subclass_of(cls, cls)
    for a in classes:
        for b in classes:
            if a != b:
                assert not (store.is_reachable(a, b) and store.is_reachable(b, a))
    assert store.validate_acyclic()


def test_unknown_class_rejected():
    store = ont.builtin_taxonomy()
    with pytest.raises(ont.UnknownClassError):
        store.is_subclass_of(Iri("birs", "Spaceship"), ont.ENTITY)
    with pytest.raises(ont.UnknownClassError):
        store.instances_of(Iri("birs", "Spaceship"))


def test_closed_prefix_set():
    with pytest.raises(ValueError):
        Iri("foaf", "Person")


def test_builtin_reparent_rejected():
    store = ont.builtin_taxonomy()
    with pytest.raises(ont.TaxonomyMutationError):
        store.assert_triple(ont.LANDMARK, ont.RDFS_SUBCLASS_OF, ont.ABSTRACT)
    # re-asserting the existing edge is a silent no-op
    store.assert_triple(ont.LANDMARK, ont.RDFS_SUBCLASS_OF, ont.REGION)
    assert len(store.subclass_edges()) == 32


def test_cycle_rejected():
    store = ont.builtin_taxonomy()
    with pytest.raises(ont.CycleIntroducedError):
        store.assert_triple(ont.ENTITY, ont.RDFS_SUBCLASS_OF, ont.LANDMARK)
    a, b = Iri("birs", "A"), Iri("birs", "B")
    store.assert_triple(a, ont.RDFS_SUBCLASS_OF, b)
    with pytest.raises(ont.CycleIntroducedError):
        store.assert_triple(b, ont.RDFS_SUBCLASS_OF, a)
    with pytest.raises(ont.CycleIntroducedError):
        store.assert_triple(a, ont.RDFS_SUBCLASS_OF, a)


def test_extension_under_builtin_class():
    store = ont.builtin_taxonomy()
    elevator = Iri("birs", "Elevator")
    store.assert_triple(elevator, ont.RDFS_SUBCLASS_OF, ont.BUILDING_ELEMENT)
    assert store.is_subclass_of(elevator, ont.LANDMARK)
    store.assert_triple(Iri("inst", "EL1"), ont.RDF_TYPE, elevator)
    assert Iri("inst", "EL1") in store.instances_of(ont.LANDMARK)


def test_unknown_predicate_rejected():
    store = ont.builtin_taxonomy()
    with pytest.raises(ont.UnknownPredicateError):
        store.assert_triple(Iri("inst", "X"), Iri("birs", "hasColour"), "red")
    with pytest.raises(ont.UnknownPredicateError):
        store.query([(Var("s"), Iri("birs", "hasColour"), Var("o"))])


def test_instances_of_inference_toggle():
    store = ont.builtin_taxonomy()
    wall, spc = Iri("inst", "W1"), Iri("inst", "SP1")
    store.assert_triple(wall, ont.RDF_TYPE, ont.IFC_WALL)
    store.assert_triple(spc, ont.RDF_TYPE, ont.SPACE)
    assert store.instances_of(ont.LANDMARK) == [wall]
    assert store.instances_of(ont.LANDMARK, inferred=False) == []
    assert store.instances_of(ont.REGION) == [spc, wall]
    assert store.instances_of(ont.IFC_WALL, inferred=False) == [wall]


# ------------------------------------------------------------- queries


def _wc_store() -> ont.TripleStore:
    store = ont.builtin_taxonomy()
    wc, hall = Iri("inst", "SP-WC"), Iri("inst", "SP-HALL")
    store.assert_triple(wc, ont.RDF_TYPE, ont.SPACE)
    store.assert_triple(wc, ont.LONG_NAME, "W.C. HOMMES 2002")
    store.assert_triple(hall, ont.RDF_TYPE, ont.SPACE)
    store.assert_triple(hall, ont.LONG_NAME, "HALL 2044")
    store.assert_triple(Iri("inst", "W1"), ont.RDF_TYPE, ont.IFC_WALL)
    store.assert_triple(Iri("inst", "W1"), ont.HAS_MATERIAL, "Concrete")
    return store


def test_query_space_by_long_name():
    store = _wc_store()
    rows = store.query([
        (Var("s"), ont.RDF_TYPE, ont.SPACE),
        (Var("s"), ont.LONG_NAME, "W.C. HOMMES 2002"),
    ])
    assert rows == [{"s": Iri("inst", "SP-WC")}]


def test_query_type_uses_subclass_inference():
    store = _wc_store()
    rows = store.query([(Var("x"), ont.RDF_TYPE, ont.LANDMARK)])
    assert rows == [{"x": Iri("inst", "W1")}]
    rows = store.query([(Var("x"), ont.RDF_TYPE, ont.REGION)])
    assert [r["x"].local for r in rows] == ["SP-HALL", "SP-WC", "W1"]


def test_query_join_and_order_deterministic():
    store = _wc_store()
    rows = store.query([
        (Var("s"), ont.RDF_TYPE, ont.SPACE),
        (Var("s"), ont.LONG_NAME, Var("n")),
    ])
    assert rows == [
        {"s": Iri("inst", "SP-HALL"), "n": "HALL 2044"},
        {"s": Iri("inst", "SP-WC"), "n": "W.C. HOMMES 2002"},
    ]
    # same result regardless of pattern order
    swapped = store.query([
        (Var("s"), ont.LONG_NAME, Var("n")),
        (Var("s"), ont.RDF_TYPE, ont.SPACE),
    ])
    assert swapped == rows


def test_query_no_match_is_empty():
    store = _wc_store()
    assert store.query([(Var("s"), ont.LONG_NAME, "SALLE 9999")]) == []


# -------------------------------------------------------- classification


def _two_room_model():
    sp_a = space("SA", "BUREAU 1", rect(0, 0, 4, 3), tags=("office",))
    sp_b = space("SB", "COULOIR 1", rect(4, 0, 8, 3), tags=("corridor",))
    wall = landmark("W1", "IfcWall", rect(3.9, 0, 4.1, 3), material="Glass",
                    visible=False)
    dr_poly = rect(3.9, 1.0, 4.1, 2.0)
    dr_lm = landmark("D1", "IfcDoor", dr_poly)
    dr = door("D1", dr_poly, host="W1")
    model = make_model(
        spaces=[sp_a, sp_b],
        landmarks=[wall, dr_lm],
        doors=[dr],
        boundaries=[phys("SA", "W1"), phys("SB", "W1"),
                    phys("SA", "D1"), phys("SB", "D1")],
    )
    return model


def test_classify_model_core_triples():
    store = ont.classify_model(_two_room_model())
    sa, sb = Iri("inst", "SA"), Iri("inst", "SB")
    w1, d1 = Iri("inst", "W1"), Iri("inst", "D1")
    st1 = Iri("inst", "ST1")

    assert (sa, ont.RDF_TYPE, ont.SPACE) in store
    assert (sa, ont.LONG_NAME, "BUREAU 1") in store
    assert (sa, ont.HAS_FUNCTION_TAG, "office") in store
    assert (sa, ont.HAS_CENTROID, (2.0, 1.5)) in store
    assert (sa, ont.LOCATED_ON_STOREY, st1) in store
    assert (st1, ont.RDF_TYPE, ont.SPATIAL_STRUCTURE_ELEMENT) in store

    assert (w1, ont.RDF_TYPE, ont.IFC_WALL) in store
    assert (w1, ont.HAS_MATERIAL, "Glass") in store
    assert (w1, ont.SENSOR_VISIBLE, False) in store
    assert (d1, ont.RDF_TYPE, ont.IFC_DOOR) in store

    assert (sa, ont.BOUNDED_BY, w1) in store
    assert (sb, ont.BOUNDED_BY, w1) in store
    # the shared door links the rooms both ways
    assert (sa, ont.CONNECTS_TO, sb) in store
    assert (sb, ont.CONNECTS_TO, sa) in store


def test_classify_model_queryable():
    store = ont.classify_model(_two_room_model())
    rows = store.query([
        (Var("s"), ont.RDF_TYPE, ont.SPACE),
        (Var("s"), ont.LONG_NAME, "COULOIR 1"),
    ])
    assert rows == [{"s": Iri("inst", "SB")}]
    # which rooms touch something made of glass?
    rows = store.query([
        (Var("e"), ont.HAS_MATERIAL, "Glass"),
        (Var("s"), ont.BOUNDED_BY, Var("e")),
    ])
    assert [(r["s"].local, r["e"].local) for r in rows] == [("SA", "W1"), ("SB", "W1")]


def test_disjointness_validation():
    store = ont.builtin_taxonomy()
    assert store.validate_disjoint() == []
    node = Iri("inst", "ODD")
    store.assert_triple(node, ont.RDF_TYPE, ont.OBJECT)
    store.assert_triple(node, ont.RDF_TYPE, ont.PROCESS)
    assert store.validate_disjoint() == [(node, ont.OBJECT, ont.PROCESS)]


# --------------------------------------------------------- serialization


def test_ntriples_round_trip():
    store = ont.classify_model(_two_room_model())
    text = ont.export_ntriples(store)
    assert ont.parse_ntriples(text) == store
    # stable: serializing twice yields identical bytes
    assert ont.export_ntriples(ont.parse_ntriples(text)) == text


def test_ntriples_shape():
    store = ont.builtin_taxonomy()
    store.assert_triple(Iri("inst", "SP1"), ont.RDF_TYPE, ont.SPACE)
    store.assert_triple(Iri("inst", "SP1"), ont.LONG_NAME, 'SALLE "A"')
    store.assert_triple(Iri("inst", "SP1"), ont.HAS_CENTROID, (1.5, -2.0))
    store.assert_triple(Iri("inst", "SP1"), ont.SENSOR_VISIBLE, True)
    text = ont.export_ntriples(store)
    lines = text.splitlines()
    assert all(line.endswith(" .") for line in lines)
    assert 'inst:SP1 birs:longName "SALLE \\"A\\"" .' in lines
    assert "inst:SP1 birs:hasCentroid point(1.5,-2.0) ." in lines
    assert "inst:SP1 birs:sensorVisible true ." in lines
    assert "inst:SP1 rdf:type birs:Space ." in lines
    assert lines == sorted(lines)


def test_parse_ntriples_rejects_garbage():
    with pytest.raises(ValueError):
        ont.parse_ntriples("inst:A rdf:type birs:Space\n")
