"""Planar and spherical geometry on lon/lat coordinates.

Coordinates are ``(lon, lat)`` tuples in WGS84 degrees. Areas are measured on a
sphere and returned in hectares; distances in metres.

Point-in-polygon, area and distance are implemented here directly. The polygon
boolean used by :func:`intersection_area` is delegated to shapely (GEOS), run on
the raw lon/lat plane with a 1e-9 degree snapping grid, and its result is
re-measured with :func:`geodesic_area`.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np
import shapely
from shapely.geometry import LinearRing
from shapely.geometry import MultiPolygon as _ShapelyMultiPolygon
from shapely.geometry import Polygon as _ShapelyPolygon

__all__ = [
    "EARTH_RADIUS_M",
    "SNAP_GRID_DEG",
    "Point",
    "Ring",
    "PolygonWithHoles",
    "Shape",
    "GeometryError",
    "point_in_polygon",
    "points_in_polygon",
    "geodesic_area",
    "intersection_area",
    "haversine_distance",
    "centroid",
    "bounds",
    "bounds_overlap",
    "ring_is_simple",
    "parts",
]

EARTH_RADIUS_M = 6_371_008.8
SNAP_GRID_DEG = 1e-9
# Boundary tolerance for point-in-polygon, in degrees (about 1 micrometre).
BOUNDARY_TOL_DEG = 1e-11
M2_PER_HA = 10_000.0

Point = tuple[float, float]


class GeometryError(ValueError):
    """Raised when a ring or polygon violates its structural invariants."""


def _check_point(p: Point) -> None:
    lon, lat = p
    if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
        raise GeometryError(f"coordinate out of range: {p!r}")


@dataclass(frozen=True)
class Ring:
    """A closed vertex sequence: first vertex equals last, at least four vertices."""

    vertices: tuple[Point, ...]

    def __post_init__(self) -> None:
        v = self.vertices
        if len(v) < 4:
            raise GeometryError(f"ring needs at least 4 vertices, got {len(v)}")
        if v[0] != v[-1]:
            raise GeometryError("ring is not closed")
        for a, b in zip(v, v[1:]):
            if a == b:
                raise GeometryError(f"consecutive duplicate vertex {a!r}")
        for p in v:
            _check_point(p)

    @classmethod
    def from_coords(cls, coords: Iterable[Sequence[float]]) -> Ring:
        """Build a ring, closing it and dropping consecutive duplicates as needed."""
        pts: list[Point] = []
        for c in coords:
            p = (float(c[0]), float(c[1]))
            if not pts or pts[-1] != p:
                pts.append(p)
        if pts and pts[0] != pts[-1]:
            pts.append(pts[0])
        return cls(tuple(pts))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    def reversed(self) -> Ring:
        return Ring(tuple(reversed(self.vertices)))


@dataclass(frozen=True)
class PolygonWithHoles:
    outer: Ring
    holes: tuple[Ring, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.holes, tuple):
            object.__setattr__(self, "holes", tuple(self.holes))
        outer_only = _RingSet(self.outer, ())
        for hole in self.holes:
            arr = hole.as_array()
            if not outer_only.contains(arr[:, 0], arr[:, 1]).all():
                raise GeometryError("hole is not inside the outer ring")

    @classmethod
    def from_coords(
        cls,
        outer: Iterable[Sequence[float]],
        holes: Iterable[Iterable[Sequence[float]]] = (),
    ) -> PolygonWithHoles:
        return cls(Ring.from_coords(outer), tuple(Ring.from_coords(h) for h in holes))


Shape = Union[PolygonWithHoles, Sequence[PolygonWithHoles]]


def parts(shape: Shape) -> tuple[PolygonWithHoles, ...]:
    """Normalise a polygon or a multipolygon (sequence of polygons) to a tuple."""
    if isinstance(shape, PolygonWithHoles):
        return (shape,)
    return tuple(shape)


# ---------------------------------------------------------------------------
# point in polygon


def _ring_winding(x: np.ndarray, y: np.ndarray, ring: np.ndarray):
    """Winding numbers and on-boundary mask of points against one closed ring."""
    wn = np.zeros(x.shape, dtype=np.int64)
    on = np.zeros(x.shape, dtype=bool)
    for (ax, ay), (bx, by) in zip(ring[:-1], ring[1:]):
        ex, ey = bx - ax, by - ay
        cross = ex * (y - ay) - ey * (x - ax)
        seg_len = math.hypot(ex, ey)
        dot = ex * (x - ax) + ey * (y - ay)
        tol = BOUNDARY_TOL_DEG * seg_len
        on |= (np.abs(cross) <= tol) & (dot >= -tol) & (dot <= seg_len * seg_len + tol)
        up = (ay <= y) & (by > y) & (cross > 0)
        down = (ay > y) & (by <= y) & (cross < 0)
        wn += up.astype(np.int64) - down.astype(np.int64)
    return wn, on


class _RingSet:
    """Cached arrays and bounding box for vectorised containment tests."""

    def __init__(self, outer: Ring, holes: Sequence[Ring]):
        self.outer = outer.as_array()
        self.holes = [h.as_array() for h in holes]
        self.minx, self.miny = self.outer.min(axis=0)
        self.maxx, self.maxy = self.outer.max(axis=0)

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        tol = BOUNDARY_TOL_DEG
        result = np.zeros(x.shape, dtype=bool)
        cand = (
            (x >= self.minx - tol)
            & (x <= self.maxx + tol)
            & (y >= self.miny - tol)
            & (y <= self.maxy + tol)
        )
        if not cand.any():
            return result
        cx, cy = x[cand], y[cand]
        wn, on = _ring_winding(cx, cy, self.outer)
        inside = (wn != 0) | on
        for hole in self.holes:
            hwn, hon = _ring_winding(cx, cy, hole)
            # a point on a hole's edge lies on the polygon boundary
            inside &= (hwn == 0) | hon
        result[cand] = inside
        return result


def points_in_polygon(lons, lats, shape: Shape) -> np.ndarray:
    """Vectorised :func:`point_in_polygon`; boundary points count as inside."""
    lons = np.asarray(lons, dtype=float)
    lats = np.asarray(lats, dtype=float)
    inside = np.zeros(lons.shape, dtype=bool)
    for poly in parts(shape):
        inside |= _RingSet(poly.outer, poly.holes).contains(lons, lats)
    return inside


def point_in_polygon(p: Point, poly: Shape) -> bool:
    """True iff ``p`` is inside the outer ring and outside every hole.

    Points on any ring (outer or hole) count as inside.
    """
    return bool(points_in_polygon([p[0]], [p[1]], poly)[0])


# ---------------------------------------------------------------------------
# area


def _wrap_pi(d: np.ndarray) -> np.ndarray:
    return (d + np.pi) % (2.0 * np.pi) - np.pi


def _planar_collinear(xy: np.ndarray) -> bool:
    d = xy - xy[0]
    cross = d[1:, 0] * d[:-1, 1] - d[1:, 1] * d[:-1, 0]
    scale = max(float(np.abs(d).max()), 1e-300)
    return bool(np.all(np.abs(cross) <= 1e-12 * scale * scale))


def _ring_area_m2(xy: np.ndarray) -> float:
    """Unsigned spherical area of a closed ring with great-circle edges.

    Sums the signed excess of the triangle formed by each edge and the pole.
    """
    if len(xy) < 4 or _planar_collinear(xy):
        return 0.0
    lam = np.radians(xy[:, 0])
    phi = np.radians(xy[:, 1])
    dlam = _wrap_pi(lam[1:] - lam[:-1])
    t1 = np.tan(phi[:-1] / 2.0)
    t2 = np.tan(phi[1:] / 2.0)
    excess = 2.0 * np.arctan2(np.tan(dlam / 2.0) * (t1 + t2), 1.0 + t1 * t2)
    return abs(float(excess.sum())) * EARTH_RADIUS_M**2


def geodesic_area(poly: Shape) -> float:
    """Area in hectares on the sphere of radius ``EARTH_RADIUS_M``, holes subtracted.

    Orientation does not matter. Degenerate (collinear) rings measure 0.
    """
    total = 0.0
    for p in parts(poly):
        a = _ring_area_m2(p.outer.as_array())
        for h in p.holes:
            a -= _ring_area_m2(h.as_array())
        total += max(a, 0.0)
    return total / M2_PER_HA


def _shapely_polygon_area_ha(g) -> float:
    total = 0.0
    for poly in getattr(g, "geoms", [g]):
        if poly.geom_type != "Polygon" or poly.is_empty:
            continue
        a = _ring_area_m2(np.asarray(poly.exterior.coords))
        for interior in poly.interiors:
            a -= _ring_area_m2(np.asarray(interior.coords))
        total += max(a, 0.0)
    return total / M2_PER_HA


def to_shapely(shape: Shape):
    polys = [
        _ShapelyPolygon(p.outer.vertices, [h.vertices for h in p.holes])
        for p in parts(shape)
    ]
    if len(polys) == 1:
        return polys[0]
    return _ShapelyMultiPolygon(polys)


def _polygonal_parts(g):
    if g.is_empty:
        return []
    if g.geom_type == "Polygon":
        return [g]
    if g.geom_type in ("MultiPolygon", "GeometryCollection"):
        out = []
        for sub in g.geoms:
            out.extend(_polygonal_parts(sub))
        return out
    return []


def intersection_area(a: Shape, b: Shape) -> float:
    """Area in hectares of ``a`` intersected with ``b``; 0 for disjoint inputs."""
    if not bounds_overlap(bounds(a), bounds(b)):
        return 0.0
    ga, gb = to_shapely(a), to_shapely(b)
    try:
        inter = shapely.intersection(ga, gb, grid_size=SNAP_GRID_DEG)
    except shapely.errors.GEOSException:
        return 0.0
    return sum(_shapely_polygon_area_ha(p) for p in _polygonal_parts(inter))


# ---------------------------------------------------------------------------
# misc


def haversine_distance(p: Point, q: Point) -> float:
    """Great-circle distance in metres."""
    lon1, lat1 = map(math.radians, p)
    lon2, lat2 = map(math.radians, q)
    h = (
        math.sin((lat2 - lat1) / 2.0) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _ring_moments(xy: np.ndarray) -> tuple[float, float, float]:
    x0, y0 = xy[:-1, 0], xy[:-1, 1]
    x1, y1 = xy[1:, 0], xy[1:, 1]
    c = x0 * y1 - x1 * y0
    return float(c.sum() / 2.0), float(((x0 + x1) * c).sum() / 6.0), float(((y0 + y1) * c).sum() / 6.0)


def centroid(shape: Shape) -> Point:
    """Area-weighted centroid in the lon/lat plane."""
    a_tot = mx_tot = my_tot = 0.0
    for p in parts(shape):
        rings = [(p.outer, 1.0)] + [(h, -1.0) for h in p.holes]
        for ring, sign in rings:
            a, mx, my = _ring_moments(ring.as_array())
            # normalise orientation so holes subtract
            s = sign if a >= 0 else -sign
            a_tot += s * a
            mx_tot += s * mx
            my_tot += s * my
    if a_tot == 0.0:
        xy = np.vstack([q.outer.as_array()[:-1] for q in parts(shape)])
        return float(xy[:, 0].mean()), float(xy[:, 1].mean())
    return mx_tot / a_tot, my_tot / a_tot


Bounds = tuple[float, float, float, float]


def bounds(shape: Shape) -> Bounds:
    xy = np.vstack([p.outer.as_array() for p in parts(shape)])
    return float(xy[:, 0].min()), float(xy[:, 1].min()), float(xy[:, 0].max()), float(xy[:, 1].max())


def bounds_overlap(a: Bounds, b: Bounds) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def ring_is_simple(coords: Sequence[Point]) -> bool:
    """True for a closed ring of at least four vertices without self-intersections."""
    if len(coords) < 4 or coords[0] != coords[-1]:
        return False
    try:
        return bool(LinearRing(coords).is_simple)
    except (ValueError, shapely.errors.GEOSException):
        return False
