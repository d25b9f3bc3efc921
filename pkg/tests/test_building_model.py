from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from birs import building_model as bm
from birs.geometry import Pose2D
from birs.step_parser import parse_spf

from modelkit import mini_model_records, spf


# ---------------------------------------------------------- placements


def test_compose_two_translations():
    graph = parse_spf(spf(
        "#1=IFCCARTESIANPOINT((1.,2.,0.));",
        "#2=IFCAXIS2PLACEMENT3D(#1,$,$);",
        "#3=IFCLOCALPLACEMENT($,#2);",
        "#4=IFCCARTESIANPOINT((3.,0.,0.));",
        "#5=IFCAXIS2PLACEMENT3D(#4,$,$);",
        "#6=IFCLOCALPLACEMENT(#3,#5);",
    ))
    pose, elevation = bm.compose_placement(graph, 6)
    assert (pose.x, pose.y, pose.theta) == pytest.approx((4.0, 2.0, 0.0))
    assert elevation == 0.0


def test_compose_rotation_then_translation():
    graph = parse_spf(spf(
        "#1=IFCCARTESIANPOINT((0.,0.,0.));",
        "#2=IFCDIRECTION((0.,1.,0.));",
        "#3=IFCAXIS2PLACEMENT3D(#1,$,#2);",
        "#4=IFCLOCALPLACEMENT($,#3);",
        "#5=IFCCARTESIANPOINT((1.,0.,0.));",
        "#6=IFCAXIS2PLACEMENT3D(#5,$,$);",
        "#7=IFCLOCALPLACEMENT(#4,#6);",
    ))
    pose, _ = bm.compose_placement(graph, 7)
    assert (pose.x, pose.y) == pytest.approx((0.0, 1.0), abs=1e-12)
    assert pose.theta == pytest.approx(math.pi / 2)


def test_compose_accumulates_elevation():
    graph = parse_spf(spf(
        "#1=IFCCARTESIANPOINT((0.,0.,4.));",
        "#2=IFCAXIS2PLACEMENT3D(#1,$,$);",
        "#3=IFCLOCALPLACEMENT($,#2);",
        "#4=IFCCARTESIANPOINT((0.,0.,0.5));",
        "#5=IFCAXIS2PLACEMENT3D(#4,$,$);",
        "#6=IFCLOCALPLACEMENT(#3,#5);",
    ))
    _, elevation = bm.compose_placement(graph, 6)
    assert elevation == pytest.approx(4.5)


def test_compose_cycle_detected():
    graph = parse_spf(spf(
        "#1=IFCCARTESIANPOINT((0.,0.,0.));",
        "#2=IFCAXIS2PLACEMENT3D(#1,$,$);",
        "#3=IFCLOCALPLACEMENT(#6,#2);",
        "#6=IFCLOCALPLACEMENT(#3,#2);",
    ))
    with pytest.raises(bm.PlacementCycleError) as err:
        bm.compose_placement(graph, 6)
    assert 6 in err.value.chain and 3 in err.value.chain


def test_compose_rejects_tilted_axis():
    graph = parse_spf(spf(
        "#1=IFCCARTESIANPOINT((0.,0.,0.));",
        "#2=IFCDIRECTION((0.,0.1,0.9949874371066199));",
        "#3=IFCAXIS2PLACEMENT3D(#1,#2,$);",
        "#4=IFCLOCALPLACEMENT($,#3);",
    ))
    with pytest.raises(bm.NonPlanarAxisError):
        bm.compose_placement(graph, 4)


# ----------------------------------------------------------- footprint


WALL_RECORDS = [
    "#10=IFCCARTESIANPOINT((0.,0.,0.));",
    "#11=IFCAXIS2PLACEMENT3D(#10,$,$);",
    "#12=IFCLOCALPLACEMENT($,#11);",
    "#13=IFCRECTANGLEPROFILEDEF(.AREA.,$,$,1.,0.2);",
    "#14=IFCDIRECTION((0.,0.,1.));",
    "#15=IFCEXTRUDEDAREASOLID(#13,$,#14,3.);",
    "#16=IFCSHAPEREPRESENTATION($,'Body','SweptSolid',(#15));",
    "#17=IFCPRODUCTDEFINITIONSHAPE($,$,(#16));",
    "#18=IFCWALL('W1',$,'wall',$,$,#12,#17,$);",
]


def test_footprint_rectangle_at_identity():
    graph = parse_spf(spf(*WALL_RECORDS))
    poly = bm.footprint(graph, 18, 1.0)
    assert poly is not None
    assert sorted(poly.vertices) == [(-0.5, -0.1), (-0.5, 0.1), (0.5, -0.1), (0.5, 0.1)]
    assert poly.area == pytest.approx(0.2)


def test_footprint_above_extrusion_is_none():
    graph = parse_spf(spf(*WALL_RECORDS))
    assert bm.footprint(graph, 18, 5.0) is None
    assert bm.footprint(graph, 18, 3.0) is not None  # closed interval


def test_footprint_rotated_placement_preserves_area():
    records = [r for r in WALL_RECORDS if not r.startswith("#11")]
    records += [
        "#19=IFCDIRECTION((0.,1.,0.));",
        "#11=IFCAXIS2PLACEMENT3D(#10,$,#19);",
    ]
    graph = parse_spf(spf(*records))
    poly = bm.footprint(graph, 18, 1.0)
    assert poly.area == pytest.approx(0.2)
    xs = sorted(x for x, _ in poly.vertices)
    assert xs == pytest.approx([-0.1, -0.1, 0.1, 0.1])  # long side now along y


def test_footprint_polyline_profile():
    graph = parse_spf(spf(
        "#10=IFCCARTESIANPOINT((0.,0.,0.));",
        "#11=IFCAXIS2PLACEMENT3D(#10,$,$);",
        "#12=IFCLOCALPLACEMENT($,#11);",
        "#20=IFCCARTESIANPOINT((0.,0.));",
        "#21=IFCCARTESIANPOINT((4.,0.));",
        "#22=IFCCARTESIANPOINT((4.,3.));",
        "#23=IFCCARTESIANPOINT((0.,3.));",
        "#24=IFCPOLYLINE((#20,#21,#22,#23,#20));",
        "#13=IFCARBITRARYCLOSEDPROFILEDEF(.AREA.,$,#24);",
        "#14=IFCDIRECTION((0.,0.,1.));",
        "#15=IFCEXTRUDEDAREASOLID(#13,$,#14,3.);",
        "#16=IFCSHAPEREPRESENTATION($,'Body','SweptSolid',(#15));",
        "#17=IFCPRODUCTDEFINITIONSHAPE($,$,(#16));",
        "#18=IFCSPACE('S1',$,'room',$,$,#12,#17,'ROOM 1',.ELEMENT.,$);",
    ))
    poly = bm.footprint(graph, 18, 1.0)
    assert poly.area == pytest.approx(12.0)
    assert poly.centroid == pytest.approx((2.0, 1.5))


def test_footprint_rejects_non_vertical_extrusion():
    records = [r if not r.startswith("#14") else "#14=IFCDIRECTION((0.,0.7071,0.7071));"
               for r in WALL_RECORDS]
    graph = parse_spf(spf(*records))
    with pytest.raises(bm.UnsupportedRepresentationError):
        bm.footprint(graph, 18, 1.0)


def test_footprint_rejects_unsupported_body():
    graph = parse_spf(spf(
        "#12=IFCLOCALPLACEMENT($,$);",
        "#15=IFCFACETEDBREP($);",
        "#16=IFCSHAPEREPRESENTATION($,'Body','Brep',(#15));",
        "#17=IFCPRODUCTDEFINITIONSHAPE($,$,(#16));",
        "#18=IFCWALL('W1',$,$,$,$,#12,#17,$);",
    ))
    with pytest.raises(bm.UnsupportedRepresentationError) as err:
        bm.footprint(graph, 18, 1.0)
    assert err.value.type_name == "IFCFACETEDBREP"


def test_footprint_degenerate_profile():
    records = [r if not r.startswith("#13") else
               "#13=IFCRECTANGLEPROFILEDEF(.AREA.,$,$,0.,0.2);" for r in WALL_RECORDS]
    graph = parse_spf(spf(*records))
    with pytest.raises(bm.DegenerateProfileError):
        bm.footprint(graph, 18, 1.0)


@given(st.floats(min_value=-3.0, max_value=3.0))
def test_footprint_area_invariant_under_rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    records = [r for r in WALL_RECORDS if not r.startswith("#11")]
    records += [
        f"#19=IFCDIRECTION(({c!r},{s!r},0.));",
        "#11=IFCAXIS2PLACEMENT3D(#10,$,#19);",
    ]
    graph = parse_spf(spf(*records))
    poly = bm.footprint(graph, 18, 1.0)
    assert poly.area == pytest.approx(0.2, rel=1e-9)


# ---------------------------------------------------------------- units


def test_unit_scale_si_milli():
    graph = parse_spf(spf("#1=IFCSIUNIT(*,.LENGTHUNIT.,.MILLI.,.METRE.);"))
    assert bm.unit_scale(graph) == pytest.approx(1e-3)


def test_unit_scale_conversion_based():
    graph = parse_spf(spf(
        "#1=IFCSIUNIT(*,.LENGTHUNIT.,$,.METRE.);",
        "#2=IFCMEASUREWITHUNIT(IFCRATIOMEASURE(0.3048),#1);",
        "#3=IFCCONVERSIONBASEDUNIT(*,.LENGTHUNIT.,'FOOT',#2);",
    ))
    assert bm.unit_scale(graph) == pytest.approx(0.3048)


def test_unit_scale_defaults_to_meters():
    graph = parse_spf(spf("#1=IFCWALL('W',$,$,$,$,$,$,$);"))
    assert bm.unit_scale(graph) == 1.0


def test_unit_scale_applied_to_footprint():
    records = list(WALL_RECORDS)
    records[3] = "#13=IFCRECTANGLEPROFILEDEF(.AREA.,$,$,1000.,200.);"
    records[5] = "#15=IFCEXTRUDEDAREASOLID(#13,$,#14,3000.);"
    records.append("#30=IFCSIUNIT(*,.LENGTHUNIT.,.MILLI.,.METRE.);")
    graph = parse_spf(spf(*records))
    poly = bm.footprint(graph, 18, 1.0, scale=bm.unit_scale(graph))
    assert poly.area == pytest.approx(0.2)


# ------------------------------------------------------------ material


def test_material_of_direct_association():
    graph = parse_spf(spf(
        *WALL_RECORDS,
        "#40=IFCMATERIAL('Glass');",
        "#41=IFCRELASSOCIATESMATERIAL('RM1',$,$,$,(#18),#40);",
    ))
    assert bm.material_of(graph, 18) == "Glass"


def test_material_of_missing_is_unknown():
    graph = parse_spf(spf(*WALL_RECORDS))
    assert bm.material_of(graph, 18) == "UNKNOWN"


# ---------------------------------------------------------- visibility


def test_default_visibility_marks_glass_invisible():
    table = bm.VisibilityTable()
    assert table.lookup("Glass") is False
    assert table.lookup("glass fiber panel") is False
    assert table.lookup("Concrete") is True
    assert table.lookup("UNKNOWN") is True


def test_parse_visibility_table_first_match_wins():
    table = bm.parse_visibility_table(
        "# rules\nMirror*: invisible\nGlass door: true\n"
    )
    assert table.lookup("Mirror 2mm") is False
    assert table.lookup("Glass door") is True
    assert table.lookup("Glass") is False  # default still applies


def test_parse_visibility_table_bad_value():
    with pytest.raises(ValueError):
        bm.parse_visibility_table("Glass*: maybe\n")


# ------------------------------------------------------- function tags


def test_tags_for_builtin_keywords():
    assert "corridor" in bm.tags_for("CORRIDOR OUEST 2019")
    assert "washroom" in bm.tags_for("W.C. HOMMES 2002")
    office = bm.tags_for("BUREAU ENTREPRENEUR 2050")
    assert {"office", "contractor", "contractor_office"} <= set(office)


def test_tags_for_overrides_merge():
    overrides = bm.parse_function_tags("ESPACE CLLABORATIF 2004: open_space\n")
    tags = bm.tags_for("ESPACE CLLABORATIF 2004", overrides)
    assert "open_space" in tags
    assert tags == tuple(sorted(tags))


# ---------------------------------------------------------- boundaries


def test_space_boundaries_physical_and_virtual():
    graph = parse_spf(spf(
        "#1=IFCSPACE('SA',$,$,$,$,$,$,'A',.ELEMENT.,$);",
        "#2=IFCSPACE('SB',$,$,$,$,$,$,'B',.ELEMENT.,$);",
        "#3=IFCWALL('W1',$,$,$,$,$,$,$);",
        "#4=IFCCONNECTIONSURFACEGEOMETRY($,$);",
        "#5=IFCRELSPACEBOUNDARY('B1',$,$,$,#1,#3,$,.PHYSICAL.,.INTERNAL.);",
        "#6=IFCRELSPACEBOUNDARY('B2',$,$,$,#1,$,#4,.VIRTUAL.,.INTERNAL.);",
        "#7=IFCRELSPACEBOUNDARY('B3',$,$,$,#2,$,#4,.VIRTUAL.,.INTERNAL.);",
    ))
    rels = bm.space_boundaries(graph)
    assert rels[0] == bm.BoundaryRel("SA", "W1", bm.PHYSICAL, None)
    assert rels[1].kind == bm.VIRTUAL and rels[1].geometry == 4
    assert rels[2].space == "SB" and rels[2].geometry == 4


# ---------------------------------------------------------- extraction


def test_extract_mini_model():
    graph = parse_spf(spf(*mini_model_records()))
    model, issues = bm.extract_model(graph)
    assert issues == []
    assert model.project_name == "Pavilion"
    assert [s.name for s in model.storeys] == ["NIVEAU 2"]

    space = model.space_by_long_name("BUREAU 1")
    assert space is not None
    assert space.polygon.area == pytest.approx(12.0)
    assert space.centroid == pytest.approx((2.0, 1.5))
    assert space.storey == "ST1"
    assert "office" in space.function_tags

    wall = model.landmark_by_id("W1")
    assert wall.ifc_class == "IfcWall"
    assert wall.material == bm.MaterialInfo("Glass", False)
    assert wall.storey == "ST1"
    assert wall.footprint.area == pytest.approx(0.8)

    door = model.doors[0]
    assert door.global_id == "D1"
    assert (door.width, door.height) == pytest.approx((1.0, 2.1))
    assert door.center == pytest.approx((1.0, 0.0))
    assert door.host_wall == "W1"
    assert model.landmark_by_id("D1").ifc_class == "IfcDoor"

    kinds = {(rel.space, rel.element, rel.kind) for rel in model.boundaries}
    assert ("SP1", "W1", bm.PHYSICAL) in kinds
    assert ("SP1", "D1", bm.PHYSICAL) in kinds


def test_extract_reports_unsupported_representation_and_keeps_rest():
    records = mini_model_records() + [
        "#90=IFCFACETEDBREP($);",
        "#91=IFCSHAPEREPRESENTATION($,'Body','Brep',(#90));",
        "#92=IFCPRODUCTDEFINITIONSHAPE($,$,(#91));",
        "#93=IFCWALL('W2',$,'brep wall',$,$,#7,#92,$);",
    ]
    graph = parse_spf(spf(*records))
    model, issues = bm.extract_model(graph)
    assert model.landmark_by_id("W1") is not None
    assert model.landmark_by_id("W2") is None
    kinds = [issue.error for issue in issues]
    assert kinds.count("UnsupportedRepresentationError") == 1


def test_extract_reports_duplicate_global_id():
    records = mini_model_records() + [
        "#95=IFCWALL('W1',$,'again',$,$,#42,#46,$);",
    ]
    graph = parse_spf(spf(*records))
    model, issues = bm.extract_model(graph)
    assert len([lm for lm in model.landmarks if lm.global_id == "W1"]) == 1
    assert any(issue.error == "DuplicateGlobalId" for issue in issues)


def test_extract_skips_element_outside_cut():
    records = mini_model_records()
    records = [r if not r.startswith("#44") else
               "#44=IFCEXTRUDEDAREASOLID(#43,$,#26,0.5);" for r in records]
    graph = parse_spf(spf(*records))
    model, issues = bm.extract_model(graph)
    assert model.landmark_by_id("W1") is None
    assert any(issue.error == "OutsideCut" for issue in issues)


def test_extract_respects_storey_elevation_for_cut():
    records = mini_model_records()
    # storey at 4 m; wall extrudes from its placement z=0 to 3 m, so the
    # default cut at 5 m misses it unless the wall is lifted too
    records = [r if not r.startswith("#8=") else
               "#8=IFCBUILDINGSTOREY('ST1',$,'NIVEAU 2',$,$,#7,$,'NIVEAU 2',.ELEMENT.,4.);"
               for r in records]
    records = [r if not r.startswith("#5=") else
               "#5=IFCCARTESIANPOINT((0.,0.,4.));" for r in records]
    graph = parse_spf(spf(*records))
    model, issues = bm.extract_model(graph)
    assert model.landmark_by_id("W1") is not None
    assert model.landmark_by_id("W1").elevation == pytest.approx(4.0)
