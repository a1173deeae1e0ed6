"""Read OpenStreetMap extracts and assemble parks with their facilities.

The OSM model is reduced to two roles: tagged nodes become point objects
(park *elements*) and closed ways / multipolygon relations become area objects
(park *spaces*). Area ids follow the osmium convention: ``2 * way_id`` for
ways and ``2 * relation_id + 1`` for relations.
"""

from __future__ import annotations

import logging
import os
import xml.etree.ElementTree as ET
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

import numpy as np
import shapely

from .geometry import (
    GeometryError,
    Point,
    PolygonWithHoles,
    Ring,
    bounds,
    centroid,
    geodesic_area,
    intersection_area,
    points_in_polygon,
    ring_is_simple,
    to_shapely,
)

log = logging.getLogger(__name__)

__all__ = [
    "Kind",
    "TaggedObject",
    "ObjectStore",
    "IngestReport",
    "ParkRecord",
    "ParkRules",
    "DEFAULT_PARK_RULES",
    "MalformedInput",
    "EmptyExtract",
    "load_extract",
    "assemble_parks",
    "collect_facilities",
]

# Closed ways carrying one of these keys are lines unless tagged area=yes.
LINEAR_KEYS = frozenset({"highway", "barrier", "railway", "waterway", "power", "route"})
OVERLAP_TOL_HA = 1e-6


class MalformedInput(ValueError):
    """The extract could not be parsed."""


class EmptyExtract(ValueError):
    """The extract parsed but holds no OSM objects."""


class Kind(str, Enum):
    NODE = "node"
    AREA = "area"


Tags = tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class TaggedObject:
    id: int
    kind: Kind
    tags: Tags
    geometry: Union[Point, tuple[PolygonWithHoles, ...]]

    def __post_init__(self) -> None:
        keys = [k for k, _ in self.tags]
        if len(keys) != len(set(keys)):
            raise ValueError(f"duplicate tag keys on object {self.id}")

    @property
    def point(self) -> Point:
        if self.kind is not Kind.NODE:
            raise AttributeError("area objects have no single point")
        return self.geometry  # type: ignore[return-value]

    @property
    def polygons(self) -> tuple[PolygonWithHoles, ...]:
        if self.kind is not Kind.AREA:
            raise AttributeError("node objects have no polygons")
        return self.geometry  # type: ignore[return-value]

    @property
    def ref(self) -> str:
        """Short OSM reference such as ``n12``, ``w34`` or ``r5``."""
        if self.kind is Kind.NODE:
            return f"n{self.id}"
        return f"r{self.id // 2}" if self.id % 2 else f"w{self.id // 2}"

    def tag(self, key: str) -> Optional[str]:
        for k, v in self.tags:
            if k == key:
                return v
        return None


@dataclass
class IngestReport:
    """Counters collected while reading an extract and building parks."""

    raw_nodes: int = 0
    raw_ways: int = 0
    raw_relations: int = 0
    tagged_nodes: int = 0
    areas_from_ways: int = 0
    areas_from_relations: int = 0
    skipped_ways: int = 0
    skipped_relations: int = 0
    invalid_rings: int = 0
    ignored_relations: int = 0
    parks: int = 0
    invalid_parks: int = 0
    invalid_spaces: int = 0
    nested_parks: int = 0

    def to_text(self) -> str:
        return "".join(f"{name} {value}\n" for name, value in vars(self).items())


@dataclass(frozen=True)
class ObjectStore:
    """Immutable, id-sorted collection of node and area objects."""

    nodes: tuple[TaggedObject, ...]
    areas: tuple[TaggedObject, ...]
    report: IngestReport = field(compare=False)

    def __post_init__(self) -> None:
        lons = np.array([n.point[0] for n in self.nodes], dtype=float)
        lats = np.array([n.point[1] for n in self.nodes], dtype=float)
        object.__setattr__(self, "_lons", lons)
        object.__setattr__(self, "_lats", lats)
        object.__setattr__(self, "_area_bounds", [bounds(a.polygons) for a in self.areas])

    def __len__(self) -> int:
        return len(self.nodes) + len(self.areas)

    def __iter__(self):
        yield from self.nodes
        yield from self.areas

    def get(self, kind: Kind, obj_id: int) -> Optional[TaggedObject]:
        pool = self.nodes if kind is Kind.NODE else self.areas
        lo, hi = 0, len(pool)
        while lo < hi:
            mid = (lo + hi) // 2
            if pool[mid].id < obj_id:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(pool) and pool[lo].id == obj_id:
            return pool[lo]
        return None


# ---------------------------------------------------------------------------
# raw parsing


@dataclass
class _Raw:
    node_coords: dict[int, Point] = field(default_factory=dict)
    node_tags: dict[int, Tags] = field(default_factory=dict)
    ways: dict[int, tuple[tuple[int, ...], Tags]] = field(default_factory=dict)
    relations: dict[int, tuple[tuple[tuple[str, int, str], ...], Tags]] = field(
        default_factory=dict
    )


def _dedupe_tags(pairs: Iterable[tuple[str, str]]) -> Tags:
    seen: dict[str, str] = {}
    for k, v in pairs:
        seen.setdefault(k, v)
    return tuple(seen.items())


def _parse_xml(path: str) -> _Raw:
    raw = _Raw()
    try:
        context = ET.iterparse(path, events=("start", "end"))
        _, root = next(context)
        if root.tag != "osm":
            raise MalformedInput(f"{path}: root element is <{root.tag}>, expected <osm>")
        for event, elem in context:
            if event != "end" or elem.tag not in ("node", "way", "relation"):
                continue
            try:
                obj_id = int(elem.attrib["id"])
                tags = _dedupe_tags(
                    (t.attrib["k"], t.attrib["v"]) for t in elem.iter("tag")
                )
                if elem.tag == "node":
                    lon = float(elem.attrib["lon"])
                    lat = float(elem.attrib["lat"])
                    if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
                        raise MalformedInput(f"{path}: node {obj_id} out of range")
                    raw.node_coords[obj_id] = (lon, lat)
                    if tags:
                        raw.node_tags[obj_id] = tags
                elif elem.tag == "way":
                    refs = tuple(int(nd.attrib["ref"]) for nd in elem.iter("nd"))
                    raw.ways[obj_id] = (refs, tags)
                else:
                    members = tuple(
                        (m.attrib["type"], int(m.attrib["ref"]), m.attrib.get("role", ""))
                        for m in elem.iter("member")
                    )
                    raw.relations[obj_id] = (members, tags)
            except (KeyError, ValueError) as exc:
                if isinstance(exc, MalformedInput):
                    raise
                raise MalformedInput(f"{path}: bad <{elem.tag}> element: {exc}") from exc
            root.clear()
    except ET.ParseError as exc:
        raise MalformedInput(f"{path}: {exc}") from exc
    except StopIteration as exc:
        raise EmptyExtract(f"{path}: empty file") from exc
    return raw


def _parse_pbf(path: str) -> _Raw:
    try:
        import osmium
    except ImportError as exc:  # pragma: no cover - depends on optional extra
        raise MalformedInput("reading PBF requires the 'osmium' package") from exc

    raw = _Raw()

    class Handler(osmium.SimpleHandler):
        def node(self, n):
            raw.node_coords[n.id] = (n.location.lon, n.location.lat)
            if len(n.tags):
                raw.node_tags[n.id] = _dedupe_tags((t.k, t.v) for t in n.tags)

        def way(self, w):
            raw.ways[w.id] = (
                tuple(nd.ref for nd in w.nodes),
                _dedupe_tags((t.k, t.v) for t in w.tags),
            )

        def relation(self, r):
            members = tuple((m.type, m.ref, m.role) for m in r.members)
            type_names = {"n": "node", "w": "way", "r": "relation"}
            members = tuple((type_names.get(t, t), ref, role) for t, ref, role in members)
            raw.relations[r.id] = (members, _dedupe_tags((t.k, t.v) for t in r.tags))

    try:
        Handler().apply_file(path, locations=False)
    except RuntimeError as exc:
        raise MalformedInput(f"{path}: {exc}") from exc
    return raw


# ---------------------------------------------------------------------------
# materialisation


def _way_is_area(refs: Sequence[int], tags: Tags) -> bool:
    if len(refs) < 4 or refs[0] != refs[-1] or not tags:
        return False
    d = dict(tags)
    if d.get("area") == "no":
        return False
    if d.get("area") == "yes":
        return True
    return not (LINEAR_KEYS & d.keys())


def _make_ring(coords: Sequence[Point]) -> Optional[Ring]:
    try:
        return Ring.from_coords(coords)
    except GeometryError:
        return None


def _join_segments(segments: list[list[int]]) -> Optional[list[list[int]]]:
    """Join open node-id sequences end to end into closed rings."""
    rings: list[list[int]] = []
    pending = [list(s) for s in segments if len(s) >= 2]
    while pending:
        current = pending.pop(0)
        while current[0] != current[-1]:
            for i, seg in enumerate(pending):
                if seg[0] == current[-1]:
                    current.extend(seg[1:])
                elif seg[-1] == current[-1]:
                    current.extend(reversed(seg[:-1]))
                elif seg[-1] == current[0]:
                    current[:0] = seg[:-1]
                elif seg[0] == current[0]:
                    current[:0] = list(reversed(seg[1:]))
                else:
                    continue
                pending.pop(i)
                break
            else:
                return None
        rings.append(current)
    return rings


def _assemble_multipolygon(
    rel_id: int, members, raw: _Raw, report: IngestReport
) -> Optional[tuple[PolygonWithHoles, ...]]:
    outer_segs: list[list[int]] = []
    inner_segs: list[list[int]] = []
    for mtype, ref, role in members:
        if mtype != "way":
            continue
        if ref not in raw.ways:
            log.debug("relation %d: missing member way %d", rel_id, ref)
            report.skipped_relations += 1
            return None
        refs = raw.ways[ref][0]
        (inner_segs if role == "inner" else outer_segs).append(list(refs))
    outer_rings = _join_segments(outer_segs)
    inner_rings = _join_segments(inner_segs)
    if not outer_rings or inner_rings is None:
        report.invalid_rings += 1
        return None

    def to_coords(ids):
        return [raw.node_coords[i] for i in ids]

    try:
        outers = [to_coords(r) for r in outer_rings]
        inners = [to_coords(r) for r in inner_rings]
    except KeyError:
        report.skipped_relations += 1
        return None
    outer_objs = [_make_ring(c) for c in outers]
    inner_objs = [_make_ring(c) for c in inners]
    if any(r is None for r in outer_objs + inner_objs):
        report.invalid_rings += 1
        return None
    outer_shapes = [shapely.Polygon(r.vertices) for r in outer_objs]
    holes: list[list[Ring]] = [[] for _ in outer_objs]
    for ring in inner_objs:
        probe = shapely.Polygon(ring.vertices)
        owner = next(
            (i for i, shp in enumerate(outer_shapes) if shp.is_valid and shp.covers(probe)),
            None,
        )
        if owner is None:
            report.invalid_rings += 1
            return None
        holes[owner].append(ring)
    try:
        return tuple(PolygonWithHoles(o, tuple(h)) for o, h in zip(outer_objs, holes))
    except GeometryError:
        report.invalid_rings += 1
        return None


def _materialize(raw: _Raw) -> ObjectStore:
    report = IngestReport(
        raw_nodes=len(raw.node_coords),
        raw_ways=len(raw.ways),
        raw_relations=len(raw.relations),
    )
    if not (raw.node_coords or raw.ways or raw.relations):
        raise EmptyExtract("extract contains no objects")

    nodes = [
        TaggedObject(nid, Kind.NODE, tags, raw.node_coords[nid])
        for nid, tags in raw.node_tags.items()
    ]

    areas: list[TaggedObject] = []
    for wid, (refs, tags) in raw.ways.items():
        if any(r not in raw.node_coords for r in refs):
            log.debug("way %d references a missing node", wid)
            report.skipped_ways += 1
            continue
        if not _way_is_area(refs, tags):
            continue
        ring = _make_ring([raw.node_coords[r] for r in refs])
        if ring is None:
            report.invalid_rings += 1
            continue
        areas.append(TaggedObject(2 * wid, Kind.AREA, tags, (PolygonWithHoles(ring),)))
        report.areas_from_ways += 1

    for rid, (members, tags) in raw.relations.items():
        d = dict(tags)
        if d.get("type") != "multipolygon":
            report.ignored_relations += 1
            continue
        area_tags = tuple((k, v) for k, v in tags if k != "type")
        if not area_tags:
            report.ignored_relations += 1
            continue
        polys = _assemble_multipolygon(rid, members, raw, report)
        if polys is None:
            continue
        areas.append(TaggedObject(2 * rid + 1, Kind.AREA, area_tags, polys))
        report.areas_from_relations += 1

    nodes.sort(key=lambda o: o.id)
    areas.sort(key=lambda o: o.id)
    report.tagged_nodes = len(nodes)
    return ObjectStore(tuple(nodes), tuple(areas), report)


def load_extract(path: Union[str, os.PathLike], format: Optional[str] = None) -> ObjectStore:
    """Parse an ``.osm`` XML or ``.osm.pbf`` extract into an :class:`ObjectStore`.

    ``format`` is ``"xml"`` or ``"pbf"``; when omitted it is inferred from the
    file name. Ways with missing nodes and relations with missing members are
    skipped and counted in ``store.report``.
    """
    path = os.fspath(path)
    if format is None:
        format = "pbf" if path.endswith(".pbf") else "xml"
    if format not in ("xml", "pbf"):
        raise ValueError(f"unknown extract format {format!r}")
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    if os.path.getsize(path) == 0:
        raise EmptyExtract(f"{path}: empty file")
    with open(path, "rb") as fh:
        head = fh.read(64).lstrip()
    looks_xml = head.startswith(b"<")
    if format == "xml" and not looks_xml:
        raise MalformedInput(f"{path}: not an XML extract")
    if format == "pbf" and looks_xml:
        raise MalformedInput(f"{path}: not a PBF extract")
    raw = _parse_xml(path) if format == "xml" else _parse_pbf(path)
    return _materialize(raw)


# ---------------------------------------------------------------------------
# parks


@dataclass(frozen=True)
class ParkRules:
    """Tag predicates selecting park areas; a value of ``None`` matches any value."""

    predicates: frozenset[tuple[str, Optional[str]]]

    def __post_init__(self) -> None:
        if not self.predicates:
            raise ValueError("park rules must not be empty")

    @classmethod
    def of(cls, *pairs: tuple[str, Optional[str]]) -> ParkRules:
        return cls(frozenset(pairs))

    def matches(self, tags: Tags) -> bool:
        for k, v in tags:
            if (k, v) in self.predicates or (k, None) in self.predicates:
                return True
        return False


DEFAULT_PARK_RULES = ParkRules.of(("leisure", "park"))


@dataclass(frozen=True)
class ParkRecord:
    park_id: str
    name: Optional[str]
    boundary: tuple[PolygonWithHoles, ...]
    area_ha: float
    centroid: Point
    elements: tuple[TaggedObject, ...] = ()
    spaces: tuple[tuple[TaggedObject, float], ...] = ()
    contained_in: tuple[str, ...] = ()
    source_id: int = 0


def _polygon_is_valid(polys: Sequence[PolygonWithHoles]) -> bool:
    for p in polys:
        for ring in (p.outer, *p.holes):
            if not ring_is_simple(ring.vertices):
                return False
    return bool(to_shapely(polys).is_valid)


def assemble_parks(
    store: ObjectStore,
    park_rules: ParkRules = DEFAULT_PARK_RULES,
    report: Optional[IngestReport] = None,
) -> list[ParkRecord]:
    """One :class:`ParkRecord` per area matching ``park_rules``, sorted by park id.

    Self-intersecting boundaries are dropped and counted. Parks lying inside
    another park are kept and annotated through ``contained_in``.
    """
    report = report if report is not None else IngestReport()
    candidates = []
    for obj in store.areas:
        if not park_rules.matches(obj.tags):
            continue
        if not _polygon_is_valid(obj.polygons):
            log.warning("dropping park %s: invalid boundary", obj.ref)
            report.invalid_parks += 1
            continue
        area = geodesic_area(obj.polygons)
        if area <= 0.0:
            report.invalid_parks += 1
            continue
        candidates.append((obj, area))

    parks = []
    for obj, area in candidates:
        b = bounds(obj.polygons)
        containers = []
        for other, other_area in candidates:
            if other is obj or other_area < area:
                continue
            ob = bounds(other.polygons)
            if not (ob[0] <= b[0] and ob[1] <= b[1] and ob[2] >= b[2] and ob[3] >= b[3]):
                continue
            if intersection_area(obj.polygons, other.polygons) >= area * (1 - 1e-6):
                containers.append(other.ref)
        if containers:
            report.nested_parks += 1
        parks.append(
            ParkRecord(
                park_id=obj.ref,
                name=obj.tag("name"),
                boundary=obj.polygons,
                area_ha=area,
                centroid=centroid(obj.polygons),
                contained_in=tuple(sorted(containers)),
                source_id=obj.id,
            )
        )
    parks.sort(key=lambda p: p.park_id)
    report.parks = len(parks)
    return parks


def collect_facilities(
    store: ObjectStore,
    parks: Sequence[ParkRecord],
    report: Optional[IngestReport] = None,
) -> list[ParkRecord]:
    """Attach contained nodes and overlapping areas to every park.

    Nodes on a park boundary count as inside. Areas contribute their overlap
    area in hectares; an object inside two overlapping parks is given to both.
    """
    report = report if report is not None else IngestReport()
    lons, lats = store._lons, store._lats  # type: ignore[attr-defined]
    area_bounds = store._area_bounds  # type: ignore[attr-defined]
    valid_cache: dict[int, bool] = {}
    out = []
    for park in parks:
        minx, miny, maxx, maxy = bounds(park.boundary)
        cand = np.nonzero((lons >= minx) & (lons <= maxx) & (lats >= miny) & (lats <= maxy))[0]
        inside = points_in_polygon(lons[cand], lats[cand], park.boundary)
        elements = tuple(store.nodes[i] for i in cand[inside])

        spaces = []
        for obj, ob in zip(store.areas, area_bounds):
            if obj.id == park.source_id:
                continue
            if ob[0] > maxx or ob[2] < minx or ob[1] > maxy or ob[3] < miny:
                continue
            if obj.id not in valid_cache:
                valid_cache[obj.id] = _polygon_is_valid(obj.polygons)
                if not valid_cache[obj.id]:
                    report.invalid_spaces += 1
            if not valid_cache[obj.id]:
                continue
            overlap = intersection_area(park.boundary, obj.polygons)
            if overlap > 0.0:
                overlap = min(overlap, park.area_ha, geodesic_area(obj.polygons))
                spaces.append((obj, overlap))
        out.append(replace(park, elements=elements, spaces=tuple(spaces)))
    return out
