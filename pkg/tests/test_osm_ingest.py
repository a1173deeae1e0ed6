import pytest

from healthyparks.geometry import PolygonWithHoles, geodesic_area, point_in_polygon
from healthyparks.osm_ingest import (
    DEFAULT_PARK_RULES,
    EmptyExtract,
    Kind,
    MalformedInput,
    ParkRules,
    assemble_parks,
    collect_facilities,
    load_extract,
)

from helpers import FIXTURE_OSM
from oracles import qmc_intersection_area_ha, scan_osm_counts


@pytest.fixture(scope="module")
def store():
    return load_extract(FIXTURE_OSM)


@pytest.fixture(scope="module")
def parks(store):
    return collect_facilities(store, assemble_parks(store))


def by_name(parks, name):
    return next(p for p in parks if p.name == name)


def write(tmp_path, body, name="x.osm"):
    p = tmp_path / name
    p.write_text(f'<?xml version="1.0"?>\n<osm version="0.6">\n{body}\n</osm>\n', encoding="utf-8")
    return p


def test_raw_counts_match_text_scan(store):
    scan = scan_osm_counts(FIXTURE_OSM)
    rep = store.report
    assert rep.raw_nodes == scan["node"]
    assert rep.raw_ways == scan["way"]
    assert rep.raw_relations == scan["relation"]
    assert rep.tagged_nodes == scan["tagged_nodes"] == len(store.nodes)


def test_fixture_object_counts(store):
    rep = store.report
    assert (rep.raw_nodes, rep.raw_ways, rep.raw_relations) == (200, 16, 2)
    assert rep.skipped_ways == 1
    assert rep.areas_from_relations == 2
    # the open footway and the untagged member ways are not areas
    assert rep.areas_from_ways == 10
    assert len(store.areas) == 12


def test_objects_are_sorted_and_valid(store):
    ids = [o.id for o in store.nodes]
    assert ids == sorted(ids)
    for o in store.areas:
        for poly in o.polygons:
            for ring in (poly.outer, *poly.holes):
                assert ring.vertices[0] == ring.vertices[-1] and len(ring.vertices) >= 4
    assert store.get(Kind.NODE, store.nodes[3].id) is store.nodes[3]
    assert store.get(Kind.NODE, -5) is None


def test_reingest_is_identical(store):
    again = load_extract(FIXTURE_OSM)
    assert again.nodes == store.nodes and again.areas == store.areas


def test_missing_node_way_is_skipped(tmp_path):
    body = """
  <node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.001"/><node id="3" lat="0.001" lon="0.001"/>
  <way id="10"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="1"/><tag k="leisure" v="park"/></way>
  <way id="11"><nd ref="1"/><nd ref="2"/><nd ref="99"/><nd ref="1"/><tag k="leisure" v="park"/></way>"""
    s = load_extract(write(tmp_path, body))
    assert s.report.skipped_ways == 1
    assert [a.ref for a in s.areas] == ["w10"]


def test_empty_and_malformed_inputs(tmp_path):
    empty = tmp_path / "empty.osm"
    empty.write_bytes(b"")
    with pytest.raises(EmptyExtract):
        load_extract(empty)
    with pytest.raises(EmptyExtract):
        load_extract(write(tmp_path, "", "none.osm"))
    bad = tmp_path / "bad.osm"
    bad.write_text("<osm><node id='1' lat='x' lon='0'/></osm>")
    with pytest.raises(MalformedInput):
        load_extract(bad)
    broken = tmp_path / "broken.osm"
    broken.write_text("<osm><node id='1'")
    with pytest.raises(MalformedInput):
        load_extract(broken)
    with pytest.raises(MalformedInput):
        load_extract(write(tmp_path, "", "fake.pbf"))


def test_duplicate_tag_keys_keep_first(tmp_path):
    body = '<node id="1" lat="1" lon="1"><tag k="amenity" v="bench"/><tag k="amenity" v="cafe"/></node>'
    s = load_extract(write(tmp_path, body))
    assert s.nodes[0].tags == (("amenity", "bench"),)


def test_five_parks_with_nesting(parks):
    assert [p.park_id for p in parks] == ["r11", "r12", "w101", "w106", "w113"]
    rose = by_name(parks, "Rose Garden Park")
    assert rose.contained_in == ("r12",)
    assert by_name(parks, "Hilltop Park").contained_in == ()
    for p in parks:
        assert p.area_ha == pytest.approx(geodesic_area(p.boundary), rel=1e-3)


def test_park_areas_match_layout(parks):
    expected = {"Riverside Park": 10.0, "Old Wood Park": 9.0 - 0.25, "Central Square Park": 1.2,
                "Hilltop Park": 20.0, "Rose Garden Park": 1.0}
    for name, ha in expected.items():
        assert by_name(parks, name).area_ha == pytest.approx(ha, rel=2e-3), name


def test_garden_rule(store):
    garden = next(a for a in store.areas if a.tag("leisure") == "garden")
    default = assemble_parks(store, DEFAULT_PARK_RULES)
    assert garden.ref not in {p.park_id for p in default}
    assert len(default) == 5
    extended = assemble_parks(store, ParkRules.of(("leisure", "park"), ("leisure", "garden")))
    assert len(extended) == 6 and garden.ref in {p.park_id for p in extended}
    any_leisure = assemble_parks(store, ParkRules.of(("leisure", None)))
    # leisure=pitch counts as well under a wildcard rule
    assert len(any_leisure) == 7


def test_river_overlap_is_four_hectares(store, parks):
    riverside = by_name(parks, "Riverside Park")
    river = next(o for o, _ in riverside.spaces if o.tag("water") == "river")
    overlap = dict((o.id, a) for o, a in riverside.spaces)[river.id]
    oracle = qmc_intersection_area_ha(riverside.boundary[0].outer.vertices, river.polygons[0].outer.vertices)
    assert overlap == pytest.approx(oracle, rel=0.01)
    assert overlap == pytest.approx(4.0, rel=0.01)


def test_boundary_vertex_tree_counts(parks):
    riverside = by_name(parks, "Riverside Park")
    corner = riverside.boundary[0].outer.vertices[0]
    assert any(e.point == corner and e.tag("natural") == "tree" for e in riverside.elements)


def test_hole_excludes_elements(store, parks):
    oldwood = by_name(parks, "Old Wood Park")
    hole = PolygonWithHoles(oldwood.boundary[0].holes[0])
    in_hole = [n for n in store.nodes if point_in_polygon(n.point, hole)]
    assert [n.tag("amenity") for n in in_hole] == ["bench"]
    attached = {e.id for e in oldwood.elements}
    assert in_hole[0].id not in attached


def test_element_and_space_invariants(store, parks):
    node_ids = {n.id for n in store.nodes}
    for p in parks:
        ids = [e.id for e in p.elements]
        assert len(ids) == len(set(ids))
        assert set(ids) <= node_ids
        for e in p.elements:
            assert point_in_polygon(e.point, p.boundary)
        for obj, overlap in p.spaces:
            assert 0 < overlap <= min(p.area_ha, geodesic_area(obj.polygons)) + 1e-6
            assert obj.id != p.source_id


def test_nested_park_elements_count_in_both(parks):
    rose = {e.id for e in by_name(parks, "Rose Garden Park").elements}
    hill = {e.id for e in by_name(parks, "Hilltop Park").elements}
    assert rose and rose <= hill


def test_outside_bench_not_attached(store, parks):
    attached = {e.id for p in parks for e in p.elements}
    far = [n for n in store.nodes if n.point[0] > 8.53]
    assert far and all(n.id not in attached for n in far)


def test_bench_at_centroid_is_an_element(tmp_path):
    body = """
  <node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.002"/><node id="3" lat="0.002" lon="0.002"/><node id="4" lat="0.002" lon="0"/>
  <node id="5" lat="0.001" lon="0.001"><tag k="amenity" v="bench"/></node>
  <way id="10"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><nd ref="1"/><tag k="leisure" v="park"/></way>"""
    s = load_extract(write(tmp_path, body))
    (park,) = collect_facilities(s, assemble_parks(s))
    assert [e.id for e in park.elements] == [5]


def test_self_intersecting_park_dropped(tmp_path):
    body = """
  <node id="1" lat="0" lon="0"/><node id="2" lat="0.001" lon="0.001"/><node id="3" lat="0" lon="0.001"/><node id="4" lat="0.001" lon="0"/>
  <way id="10"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><nd ref="1"/><tag k="leisure" v="park"/></way>"""
    s = load_extract(write(tmp_path, body))
    report = s.report
    assert assemble_parks(s, report=report) == []
    assert report.invalid_parks == 1


def test_pbf_matches_xml(tmp_path, store):
    osmium = pytest.importorskip("osmium")
    out = tmp_path / "mini.osm.pbf"
    with osmium.SimpleWriter(str(out)) as writer:
        for obj in osmium.FileProcessor(str(FIXTURE_OSM)):
            if obj.is_node():
                writer.add_node(obj)
            elif obj.is_way():
                writer.add_way(obj)
            else:
                writer.add_relation(obj)
    pbf = load_extract(out)
    assert [o.id for o in pbf.nodes] == [o.id for o in store.nodes]
    assert [o.tags for o in pbf.areas] == [o.tags for o in store.areas]
    for a, b in zip(pbf.areas, store.areas):
        assert geodesic_area(a.polygons) == pytest.approx(geodesic_area(b.polygons), rel=1e-6)
