"""Shared generators for randomized test inputs."""

from __future__ import annotations

import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURE_DIR = ROOT / "fixtures" / "mini_city"
FIXTURE_OSM = FIXTURE_DIR / "mini_city.osm"
FIXTURE_CONFIG = ROOT / "configs" / "mini_city.toml"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden" / "mini_city"


def star_ring(rng: random.Random, cx: float, cy: float, r_min: float, r_max: float, k: int):
    """Closed star-shaped (hence simple) ring with ``k`` vertices around (cx, cy).

    One vertex is drawn per equal angular sector, so consecutive angles differ
    by less than two sectors.
    """
    sector = 2 * math.pi / k
    angles = [(i + rng.uniform(0.05, 0.95)) * sector for i in range(k)]
    pts = []
    for a in angles:
        r = rng.uniform(r_min, r_max)
        pts.append((cx + r * math.cos(a), cy + r * math.sin(a)))
    return pts + [pts[0]]


def random_polygon(rng: random.Random, cx: float, cy: float, size: float, with_hole: bool = False):
    """Random simple polygon; an optional hole stays clear of every outer edge."""
    if with_hole:
        outer = star_ring(rng, cx, cy, 0.5 * size, size, rng.randint(6, 24))
        return outer, [star_ring(rng, cx, cy, 0.05 * size, 0.2 * size, rng.randint(3, 8))]
    return star_ring(rng, cx, cy, 0.3 * size, size, rng.randint(3, 24)), []


def square_ring(lon0: float, lat0: float, dlon: float, dlat: float):
    return [(lon0, lat0), (lon0 + dlon, lat0), (lon0 + dlon, lat0 + dlat), (lon0, lat0 + dlat), (lon0, lat0)]


PIPELINE = ("ingest", "score", "equity", "export")


def two_city_config(tmp: Path) -> Path:
    """Config naming the fixture twice, so ``--jobs`` has work to spread."""
    text = FIXTURE_CONFIG.read_text().split("[eval]")[0]
    fixture = str(FIXTURE_DIR)
    text = text.replace("../fixtures/mini_city", fixture)
    twin = text.replace("[city.mini_city", "[city.mini_twin")
    path = tmp / "two.toml"
    path.write_text(text + "\n" + twin)
    return path


def run_pipeline(config: Path, out: Path, jobs: int = 1, steps=PIPELINE) -> None:
    from healthyparks.cli import main

    for step in steps:
        code = main(["--config", str(config), "--out", str(out), "--jobs", str(jobs), step])
        if code != 0:
            raise AssertionError(f"{step} exited with {code}")


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}
