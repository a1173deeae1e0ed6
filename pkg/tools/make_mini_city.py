"""Regenerate the bundled mini-city fixture under fixtures/mini_city/.

Layout in metres east/north of (8.5, 47.37):

    A  Riverside Park        way       x 0..400,      y 0..250     river crosses y 100..200
    B  Old Wood Park         relation  x -1000..-700, y 0..300     hole x -875..-825, y 125..175
    C  Central Square Park   way       x 600..720,    y -400..-300 pitch of 0.4 ha
    D  Hilltop Park          relation  x 1200..1700,  y 0..400     outer ring split in two ways
    E  Rose Garden Park      way       x 1300..1400,  y 100..200   nested inside D

Run from the repository root: ``python3 tools/make_mini_city.py``.
"""

from __future__ import annotations

import math
import random
from pathlib import Path
from xml.sax.saxutils import quoteattr

LON0, LAT0 = 8.5, 47.37
R = 6_371_008.8
OUT = Path(__file__).resolve().parent.parent / "fixtures" / "mini_city"

ELEMENT_POOL = [
    (("amenity", "bench"), ("backrest", "yes"), ("source", "survey")),
    (("amenity", "bench"), ("material", "wood")),
    (("natural", "tree"), ("leaf_type", "broadleaved"), ("species", "Tilia cordata")),
    (("natural", "tree"),),
    (("leisure", "playground"),),
    (("leisure", "picnic_table"),),
    (("leisure", "fitness_station"), ("sport", "fitness")),
    (("amenity", "drinking_water"),),
    (("waste", "trash"), ("amenity", "waste_basket")),
    (("historic", "memorial"), ("memorial", "plaque"), ("name", "Old Mill")),
    (("tourism", "artwork"), ("artwork_type", "statue")),
    (("tourism", "information"), ("information", "board"), ("board_type", "nature")),
    (("amenity", "fountain"),),
    (("amenity", "bicycle_parking"), ("capacity", "8")),
    (("name", "Unnamed Spot"), ("source", "Bing")),
]


def lonlat(x: float, y: float) -> tuple[float, float]:
    lat = LAT0 + math.degrees(y / R)
    lon = LON0 + math.degrees(x / (R * math.cos(math.radians(LAT0))))
    return round(lon, 7), round(lat, 7)


class Builder:
    def __init__(self) -> None:
        self.nodes: list[tuple[int, float, float, tuple]] = []
        self.ways: list[tuple[int, list[int], tuple]] = []
        self.relations: list[tuple[int, list[tuple[str, int, str]], tuple]] = []
        self._nid = 1000
        self._wid = 100
        self._rid = 10

    def node(self, x: float, y: float, tags: tuple = ()) -> int:
        self._nid += 1
        lon, lat = lonlat(x, y)
        self.nodes.append((self._nid, lon, lat, tags))
        return self._nid

    def way(self, refs: list[int], tags: tuple = ()) -> int:
        self._wid += 1
        self.ways.append((self._wid, refs, tags))
        return self._wid

    def rect(self, x0, y0, x1, y1, tags: tuple = (), corner_tags: tuple = ()) -> tuple[int, list[int]]:
        a = self.node(x0, y0, corner_tags)
        b, c, d = self.node(x1, y0), self.node(x1, y1), self.node(x0, y1)
        refs = [a, b, c, d, a]
        return self.way(refs, tags), refs

    def relation(self, members: list[tuple[str, int, str]], tags: tuple) -> int:
        self._rid += 1
        self.relations.append((self._rid, members, tags))
        return self._rid

    def scatter(self, rng: random.Random, n: int, box, avoid=None) -> None:
        x0, y0, x1, y1 = box
        placed = 0
        while placed < n:
            x, y = rng.uniform(x0 + 5, x1 - 5), rng.uniform(y0 + 5, y1 - 5)
            if avoid and avoid[0] - 5 <= x <= avoid[2] + 5 and avoid[1] - 5 <= y <= avoid[3] + 5:
                continue
            self.node(x, y, rng.choice(ELEMENT_POOL))
            placed += 1

    def to_xml(self) -> str:
        lines = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6" generator="make_mini_city">']

        def tag_lines(tags, indent="    "):
            return [f"{indent}<tag k={quoteattr(k)} v={quoteattr(v)}/>" for k, v in tags]

        for nid, lon, lat, tags in self.nodes:
            if tags:
                lines.append(f'  <node id="{nid}" lat="{lat:.7f}" lon="{lon:.7f}">')
                lines += tag_lines(tags)
                lines.append("  </node>")
            else:
                lines.append(f'  <node id="{nid}" lat="{lat:.7f}" lon="{lon:.7f}"/>')
        for wid, refs, tags in self.ways:
            lines.append(f'  <way id="{wid}">')
            lines += [f'    <nd ref="{r}"/>' for r in refs]
            lines += tag_lines(tags)
            lines.append("  </way>")
        for rid, members, tags in self.relations:
            lines.append(f'  <relation id="{rid}">')
            lines += [f'    <member type="{t}" ref="{r}" role="{role}"/>' for t, r, role in members]
            lines += tag_lines(tags)
            lines.append("  </relation>")
        lines.append("</osm>")
        return "\n".join(lines) + "\n"


def build() -> Builder:
    rng = random.Random(20240501)
    b = Builder()

    # A: the corner vertex carries a tree, so a boundary node must count as inside
    b.rect(0, 0, 400, 250, (("leisure", "park"), ("name", "Riverside Park")), corner_tags=(("natural", "tree"),))
    b.rect(-100, 100, 500, 200, (("natural", "water"), ("water", "river"), ("name", "Mill River")))
    b.scatter(rng, 40, (0, 0, 400, 250))

    # B: multipolygon with a hole; a bench sits inside the hole
    outer, _ = b.rect(-1000, 0, -700, 300)
    inner, _ = b.rect(-875, 125, -825, 175)
    b.relation([("way", outer, "outer"), ("way", inner, "inner")],
               (("type", "multipolygon"), ("leisure", "park"), ("name", "Old Wood Park")))
    b.node(-850, 150, (("amenity", "bench"),))
    b.rect(-800, 200, -600, 300, (("natural", "wood"), ("leaf_type", "mixed")))
    b.scatter(rng, 30, (-1000, 0, -700, 300), avoid=(-875, 125, -825, 175))

    # C: one pitch that maps to two categories
    b.rect(600, -400, 720, -300, (("leisure", "park"), ("name", "Central Square Park")))
    b.rect(620, -380, 700, -330, (("leisure", "pitch"), ("sport", "basketball"), ("amenity", "community_centre")))
    b.scatter(rng, 12, (600, -400, 720, -300))

    # D: outer ring split into two open ways
    p = [b.node(1200, 0), b.node(1700, 0), b.node(1700, 400), b.node(1200, 400)]
    w1 = b.way([p[0], p[1], p[2]])
    w2 = b.way([p[2], p[3], p[0]])
    b.relation([("way", w1, "outer"), ("way", w2, "outer")],
               (("type", "multipolygon"), ("leisure", "park"), ("name", "Hilltop Park")))
    b.rect(1500, 250, 1600, 350, (("leisure", "garden"), ("garden:type", "community")))
    b.rect(1450, 50, 1470, 70, (("building", "yes"),))
    b.rect(1220, 300, 1300, 380, (("landuse", "forest"),))
    b.scatter(rng, 45, (1200, 0, 1700, 400), avoid=(1300, 100, 1400, 200))

    # E: nested in D; its elements belong to both parks
    b.rect(1300, 100, 1400, 200, (("leisure", "park"), ("name", "Rose Garden Park")))
    b.rect(1320, 120, 1360, 160, (("landuse", "flowerbed"),))
    b.scatter(rng, 15, (1300, 100, 1400, 200))

    # outside every park
    b.node(2500, 2500, (("amenity", "bench"),))
    f = [b.node(-200, -200), b.node(0, -300), b.node(300, -250)]
    b.way(f, (("highway", "footway"),))
    # references a node that is not in the extract
    g = b.node(900, 900)
    b.way([g, 999_999, g], (("highway", "path"),))
    return b


EXTERNAL = """park_id,total_images,physical,nature,environmental,social,cultural
r11,420,12,30,4,9,3
r12,610,20,25,9,18,6
w101,300,8,21,3,14,2
w106,180,5,2,1,9,1
w113,260,6,7,4,3,2
"""

SURVEY = """category,park_name
nature,Old Wood Park
nature,riverside park
physical,Hilltop Park
social,Riverside Park
cultural,Nowhere Park
"""

GOLD = """key,value,category
amenity,bench,social
natural,tree,nature
leisure,playground,physical
leisure,pitch,physical
tourism,artwork,cultural
waste,trash,environmental
amenity,parking,none
highway,footway,physical
historic,memorial,cultural
leisure,picnic_table,social
natural,water,nature
landuse,allotments,environmental
amenity,cafe,social
man_made,beehive,environmental
building,yes,none
tourism,viewpoint,nature
"""

PREDICTIONS = """key,value,main,main_rel,secondary,secondary_rel
amenity,bench,social,80,physical,40
natural,tree,nature,95,environmental,60
leisure,playground,physical,90,social,70
leisure,pitch,physical,95,social,30
tourism,artwork,cultural,90,social,20
waste,trash,environmental,85,none,0
amenity,parking,physical,60,none,0
highway,footway,physical,70,nature,50
historic,memorial,cultural,95,none,0
leisure,picnic_table,social,80,nature,55
natural,water,nature,90,environmental,45
landuse,allotments,environmental,75,nature,65
amenity,cafe,social,95,none,0
man_made,beehive,nature,60,environmental,58
building,yes,none,70,social,20
tourism,viewpoint,nature,85,cultural,35
"""


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "mini_city.osm", "w", encoding="utf-8", newline="") as fh:
        fh.write(build().to_xml())
    for name, text in (("external.csv", EXTERNAL), ("survey.csv", SURVEY),
                       ("gold.csv", GOLD), ("predictions.csv", PREDICTIONS)):
        with open(OUT / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


if __name__ == "__main__":
    main()
