"""Command line pipeline: ingest, score, equity, validate, eval, export.

Every per-city command reads and writes files below ``OUT/<city key>/``::

    ingest    counts.csv, ingest_report.txt
    score     scores.csv, fits.csv, orthogonality.csv
    equity    disparity.csv, quartiles.csv
    validate  validation.csv (and percentile.csv with a survey file)
    export    parks.geojson

``eval`` is not tied to a city and writes ``OUT/eval_report.txt`` and
``OUT/eval_sweep.csv``. Exit status is 1 for bad input files and 2 for
configuration problems.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from . import __version__
from .classifier_eval import MissingPrediction, format_report, load_gold, load_predictions, threshold_sweep
from .config import CityConfig, Config, ConfigError, load_config
from .equity import DegenerateInput, InsufficientParks, disparity_report, distance_correlation, quartile_analysis
from .geometry import GeometryError, PolygonWithHoles, Ring, haversine_distance
from .lexicon import CATEGORIES, FacilityCounts, count_facilities, load_lexicon, load_stoplists
from .osm_ingest import EmptyExtract, IngestReport, MalformedInput, assemble_parks, collect_facilities, load_extract
from .scoring import InsufficientData, score_city
from .tables import SchemaError, fmt, parse_float, read_rows, write_table
from .validation import (
    CitySkipped,
    EmptyInput,
    correlate,
    load_external_counts,
    load_survey,
    percentile_ranking,
    resolve_park_names,
    score_external,
)

log = logging.getLogger("healthyparks")

EXIT_INPUT = 1
EXIT_CONFIG = 2

COUNT_COLUMNS = tuple(f"{c.value}_{kind}" for c in CATEGORIES for kind in ("elements", "spaces"))
COUNTS_HEADER = ("park_id", "name", "area_ha", "lat", "lon", *COUNT_COLUMNS)
CAT_NAMES = tuple(c.value for c in CATEGORIES)
SCORES_HEADER = ("city", "park_id", "name", "area_ha", *CAT_NAMES, "overall", "sparse_flags")
FITS_HEADER = ("city", "category", "kind", "intercept", "slope", "r2", "n")
ORTHO_HEADER = ("city", "category", "r", "n", "degenerate")
DISPARITY_HEADER = ("city", *CAT_NAMES, "mean")
QUARTILES_HEADER = (
    "city", "category", "q1_mean", "q2_mean", "q3_mean", "q4_mean", "p12", "p23", "p34", "pcc_logdist",
)
VALIDATION_HEADER = ("city", "status", "n_parks", *CAT_NAMES, "mean_pcc")
PERCENTILE_HEADER = ("city", "category", "n_named", "n_unknown", "percentile")
SWEEP_HEADER = ("threshold", "precision", "recall", "f1_weighted", "f1_main", "reliability_ratio")


class InputError(Exception):
    """A required input file is missing or unusable."""


# ---------------------------------------------------------------------------
# intermediate tables


@dataclass(frozen=True)
class CountRow:
    park_id: str
    name: str
    area_ha: float
    lat: float
    lon: float
    counts: FacilityCounts


def read_counts(path: Path) -> list[CountRow]:
    _require(path)
    rows = []
    seen = set()
    for line, r in read_rows(path, COUNTS_HEADER):
        num = {k: parse_float(path, line, r[k], k) for k in COUNTS_HEADER[2:]}
        if num["area_ha"] <= 0:
            raise SchemaError(path, line, "area_ha must be positive")
        if any(num[k] < 0 for k in COUNT_COLUMNS):
            raise SchemaError(path, line, "counts must be non-negative")
        if r["park_id"] in seen:
            raise SchemaError(path, line, f"duplicate park_id {r['park_id']}")
        seen.add(r["park_id"])
        elements = {c: num[f"{c.value}_elements"] for c in CATEGORIES}
        spaces = {c: num[f"{c.value}_spaces"] for c in CATEGORIES}
        rows.append(
            CountRow(r["park_id"], r["name"], num["area_ha"], num["lat"], num["lon"],
                     FacilityCounts(r["park_id"], elements, spaces))
        )
    return rows


@dataclass(frozen=True)
class ScoreRow:
    city: str
    park_id: str
    name: str
    area_ha: float
    scores: dict
    overall: float
    sparse_flags: str


def read_scores(path: Path) -> list[ScoreRow]:
    _require(path)
    rows = []
    for line, r in read_rows(path, SCORES_HEADER):
        scores = {c: parse_float(path, line, r[c.value], c.value) for c in CATEGORIES}
        rows.append(
            ScoreRow(r["city"], r["park_id"], r["name"], parse_float(path, line, r["area_ha"], "area_ha"),
                     scores, parse_float(path, line, r["overall"], "overall"), r["sparse_flags"])
        )
    return rows


def _require(path: Optional[Path], what: str = "input file") -> None:
    if path is None or not path.is_file():
        raise InputError(f"{what} not found: {path}")


# ---------------------------------------------------------------------------
# per-city commands


@dataclass(frozen=True)
class Job:
    command: str
    city: CityConfig
    out: Path
    counts: Optional[Path] = None
    verbose: int = 0


def _load_parks(city: CityConfig, report: Optional[IngestReport] = None):
    if not city.extract.is_file():
        raise ConfigError(f"{city.key}: extract not found: {city.extract}")
    try:
        store = load_extract(city.extract)
    except OSError as exc:
        raise InputError(f"{city.extract}: {exc.strerror or exc}") from None
    report = report if report is not None else store.report
    parks = assemble_parks(store, city.park_rules, report)
    return store, parks


def cmd_ingest(job: Job) -> list[Path]:
    city, out = job.city, job.out
    store, parks = _load_parks(city)
    parks = collect_facilities(store, parks, store.report)
    lexicon, stop = load_lexicon(), load_stoplists()
    rows = []
    for park in parks:
        fc = count_facilities(park, lexicon, stop)
        values = []
        for c in CATEGORIES:
            values += [fmt(fc.element_count(c)), fmt(fc.space_area_ha(c))]
        lon, lat = park.centroid
        rows.append((park.park_id, park.name or "", fmt(park.area_ha), fmt(lat), fmt(lon), *values))
    counts_path, report_path = out / "counts.csv", out / "ingest_report.txt"
    write_table(counts_path, COUNTS_HEADER, rows)
    with open(report_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(store.report.to_text())
    log.info("%s: %d parks", city.key, len(parks))
    return [counts_path, report_path]


def cmd_score(job: Job) -> list[Path]:
    city, out = job.city, job.out
    count_rows = read_counts(job.counts or out / "counts.csv")
    areas = {r.park_id: r.area_ha for r in count_rows}
    result = score_city([r.counts for r in count_rows], areas, city.thresholds, city.key)
    by_park = result.by_park()
    score_rows = []
    for r in sorted(count_rows, key=lambda r: r.park_id):
        s = by_park[r.park_id]
        score_rows.append(
            (city.key, r.park_id, r.name, fmt(r.area_ha), *(fmt(s.combined[c]) for c in CATEGORIES),
             fmt(s.overall), ";".join(s.sparse_labels()))
        )
    fit_rows = [
        (city.key, f.category.value, f.kind.value, fmt(f.intercept), fmt(f.slope), fmt(f.r_squared), f.n_included)
        for f in result.fits
    ]
    ortho_rows = [
        (city.key, c.value, fmt(r), n, int(deg)) for c, (r, n, deg) in result.orthogonality.items()
    ]
    paths = [out / "scores.csv", out / "fits.csv", out / "orthogonality.csv"]
    write_table(paths[0], SCORES_HEADER, score_rows)
    write_table(paths[1], FITS_HEADER, fit_rows)
    write_table(paths[2], ORTHO_HEADER, ortho_rows)
    return paths


def _score_maps(rows: Sequence[ScoreRow]) -> dict:
    return {r.park_id: r.scores for r in rows}


def cmd_equity(job: Job) -> list[Path]:
    city, out = job.city, job.out
    score_rows = read_scores(out / "scores.csv")
    count_rows = {r.park_id: r for r in read_counts(out / "counts.csv")}
    scores = _score_maps(score_rows)
    missing = sorted(set(scores) - set(count_rows))
    if missing:
        raise InputError(f"{out / 'counts.csv'}: no row for park {missing[0]}")
    distances = {
        pid: haversine_distance(city.center, (count_rows[pid].lon, count_rows[pid].lat)) for pid in scores
    }

    try:
        rep = disparity_report(city.key, scores)
        disparity = [(city.key, *(fmt(rep.gini[c]) for c in CATEGORIES), fmt(rep.mean_gini))]
    except DegenerateInput as exc:
        log.warning("%s: no disparity index: %s", city.key, exc)
        disparity = [(city.key, *([""] * (len(CATEGORIES) + 1)))]

    try:
        pcc = {c: fmt(r) for c, (r, _) in distance_correlation(scores, distances).items()}
    except DegenerateInput as exc:
        log.warning("%s: no distance correlation: %s", city.key, exc)
        pcc = dict.fromkeys(CATEGORIES, "")
    try:
        q = quartile_analysis(scores, distances, city.key)
        quartiles = [
            (city.key, c.value, *(fmt(m) for m in q.means[c]), *(fmt(p) for p in q.p_values[c]), pcc[c])
            for c in CATEGORIES
        ]
    except InsufficientParks as exc:
        log.warning("%s", exc)
        quartiles = [(city.key, c.value, *([""] * 7), pcc[c]) for c in CATEGORIES]

    paths = [out / "disparity.csv", out / "quartiles.csv"]
    write_table(paths[0], DISPARITY_HEADER, disparity)
    write_table(paths[1], QUARTILES_HEADER, quartiles)
    return paths


def cmd_validate(job: Job) -> list[Path]:
    city, out = job.city, job.out
    if city.external is None and city.survey is None:
        log.warning("%s: no external counts or survey configured, nothing to validate", city.key)
        return []
    score_rows = read_scores(out / "scores.csv")
    osm = _score_maps(score_rows)
    paths = []

    if city.external is not None:
        _require(city.external, "external counts file")
        areas = {r.park_id: r.area_ha for r in score_rows}
        external = [e for e in load_external_counts(city.external) if e.park_id in areas]
        status, n, pccs, mean = "ok", 0, [""] * len(CATEGORIES), ""
        try:
            ext_scores = score_external(external, areas, city.thresholds, city.key)
            report = correlate(
                osm, ext_scores, {e.park_id: e.total_images for e in external},
                city.min_images, city.min_parks, city.key,
            )
            n = report.n_parks_used
            pccs = [fmt(report.pcc[c]) for c in CATEGORIES]
            mean = fmt(report.mean_pcc)
        except CitySkipped as exc:
            log.warning("skipping validation: %s", exc)
            status, n = "skipped", exc.n_parks
        except InsufficientData as exc:
            log.warning("skipping validation: %s", exc)
            status = "skipped"
        paths.append(out / "validation.csv")
        write_table(paths[-1], VALIDATION_HEADER, [(city.key, status, n, *pccs, mean)])

    if city.survey is not None:
        _require(city.survey, "survey file")
        survey = load_survey(city.survey)
        names = {r.park_id: r.name for r in score_rows}
        rows = []
        for c in CATEGORIES:
            ranking = sorted(osm, key=lambda pid: (-osm[pid][c], pid))
            named, unknown = resolve_park_names([n for cat, n in survey if cat is c], names)
            for u in unknown:
                log.warning("%s: survey park %r not found", city.key, u)
            try:
                value = fmt(percentile_ranking(named, ranking, {p: osm[p][c] for p in osm}))
            except EmptyInput:
                value = ""
            rows.append((city.key, c.value, len(named), len(unknown), value))
        paths.append(out / "percentile.csv")
        write_table(paths[-1], PERCENTILE_HEADER, rows)
    return paths


def _fixed(x: float, places: int) -> str:
    s = f"{x:.{places}f}"
    return s[1:] if s.startswith("-") and float(s) == 0.0 else s


def _json_str(s: str) -> str:
    import json

    return json.dumps(s, ensure_ascii=False)


def _oriented(ring: Ring, ccw: bool) -> tuple:
    v = ring.vertices
    signed = sum(v[i][0] * v[i + 1][1] - v[i + 1][0] * v[i][1] for i in range(len(v) - 1))
    return v if (signed > 0) == ccw else tuple(reversed(v))


def _geometry_json(polys: Sequence[PolygonWithHoles]) -> str:
    def ring_json(vertices) -> str:
        return "[" + ",".join(f"[{_fixed(x, 6)},{_fixed(y, 6)}]" for x, y in vertices) + "]"

    def poly_json(p: PolygonWithHoles) -> str:
        rings = [ring_json(_oriented(p.outer, True))] + [ring_json(_oriented(h, False)) for h in p.holes]
        return "[" + ",".join(rings) + "]"

    if len(polys) == 1:
        return '{"type":"Polygon","coordinates":' + poly_json(polys[0]) + "}"
    return '{"type":"MultiPolygon","coordinates":[' + ",".join(poly_json(p) for p in polys) + "]}"


def cmd_export(job: Job) -> list[Path]:
    city, out = job.city, job.out
    score_rows = read_scores(out / "scores.csv")
    _, parks = _load_parks(city, IngestReport())
    boundaries = {p.park_id: p.boundary for p in parks}
    features = []
    for r in sorted(score_rows, key=lambda r: r.park_id):
        if r.park_id not in boundaries:
            raise InputError(f"park {r.park_id} is not in extract {city.extract}")
        props = [
            f'"city":{_json_str(r.city)}',
            f'"park_id":{_json_str(r.park_id)}',
            f'"name":{_json_str(r.name)}',
            f'"area_ha":{_fixed(r.area_ha, 4)}',
            *(f'"{c.value}":{_fixed(r.scores[c], 4)}' for c in CATEGORIES),
            f'"overall":{_fixed(r.overall, 4)}',
            f'"sparse_flags":{_json_str(r.sparse_flags)}',
        ]
        features.append(
            '{"type":"Feature","id":' + _json_str(r.park_id)
            + ',"geometry":' + _geometry_json(boundaries[r.park_id])
            + ',"properties":{' + ",".join(props) + "}}"
        )
    path = out / "parks.geojson"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write('{"type":"FeatureCollection","features":[\n')
        fh.write(",\n".join(features))
        fh.write("\n]}\n")
    return [path]


COMMANDS: dict[str, Callable[[Job], list[Path]]] = {
    "ingest": cmd_ingest,
    "score": cmd_score,
    "equity": cmd_equity,
    "validate": cmd_validate,
    "export": cmd_export,
}

INPUT_ERRORS = (SchemaError, MalformedInput, EmptyExtract, GeometryError, InputError, UnicodeDecodeError)


def run_job(job: Job) -> tuple[int, str]:
    """Run one city command; returns ``(exit_code, message)`` so failures cross process boundaries."""
    _setup_logging(job.verbose)
    job.out.mkdir(parents=True, exist_ok=True)
    try:
        paths = COMMANDS[job.command](job)
    except ConfigError as exc:
        return EXIT_CONFIG, f"config error: {exc}"
    except INPUT_ERRORS as exc:
        return EXIT_INPUT, f"input error: {exc}"
    except OSError as exc:
        return EXIT_INPUT, f"input error: {exc}"
    return 0, " ".join(str(p) for p in paths)


# ---------------------------------------------------------------------------
# eval


def cmd_eval(gold_path: Path, pred_path: Path, thresholds: Sequence[float], out: Path) -> list[Path]:
    _require(gold_path, "gold file")
    _require(pred_path, "predictions file")
    gold = load_gold(gold_path)
    preds = load_predictions(pred_path)
    try:
        sweep = threshold_sweep(preds, gold, thresholds)
    except MissingPrediction as exc:
        raise InputError(f"{pred_path}: no prediction for gold tag {exc.args[0]}") from None
    except ValueError as exc:
        raise InputError(f"{pred_path}: {exc}") from None
    out.mkdir(parents=True, exist_ok=True)
    parts = []
    for t, rep in sweep:
        parts.append(format_report(rep, title=f"threshold {t:g}"))
        parts.append("f1_weighted == f1_main\n" if rep.f1_weighted == rep.f1_main else "f1_weighted != f1_main\n")
    report_path, sweep_path = out / "eval_report.txt", out / "eval_sweep.csv"
    with open(report_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(parts))
    write_table(
        sweep_path, SWEEP_HEADER,
        [(fmt(t), fmt(r.precision), fmt(r.recall), fmt(r.f1_weighted), fmt(r.f1_main), fmt(r.reliability_ratio))
         for t, r in sweep],
    )
    return [report_path, sweep_path]


# ---------------------------------------------------------------------------
# entry point


def _setup_logging(verbose: int) -> None:
    level = logging.WARNING if verbose <= 0 else logging.INFO if verbose == 1 else logging.DEBUG
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    root.setLevel(level)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="city configuration file (TOML)")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory (default: out)")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel worker processes across cities")
    common.add_argument("--verbose", "-v", action="count", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="healthyparks", description=__doc__.splitlines()[0], parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=f"run the {name} step")
        sp.add_argument("--city", action="append", help="restrict to this city key (repeatable)")
        if name == "score":
            sp.add_argument("--counts", type=Path, help="score this counts file instead of OUT/<city>/counts.csv")
    ev = sub.add_parser("eval", parents=[common], help="benchmark tag annotations against a gold standard")
    ev.add_argument("--gold", type=Path)
    ev.add_argument("--pred", type=Path)
    ev.add_argument("--thresholds", type=str, help="comma-separated reliability thresholds")
    return p


def _fail(code: int, message: str) -> int:
    print(f"healthyparks: {message}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    verbose = getattr(args, "verbose", 0)
    out = getattr(args, "out", Path("out"))
    jobs = getattr(args, "jobs", 1)
    config_path = getattr(args, "config", None)
    _setup_logging(verbose)
    if jobs < 1:
        return _fail(EXIT_CONFIG, "config error: --jobs must be at least 1")

    cfg: Optional[Config] = None
    if config_path is not None:
        try:
            cfg = load_config(config_path)
        except ConfigError as exc:
            return _fail(EXIT_CONFIG, f"config error: {exc}")

    if args.command == "eval":
        gold = args.gold or (cfg.eval.gold if cfg else None)
        pred = args.pred or (cfg.eval.predictions if cfg else None)
        if gold is None or pred is None:
            return _fail(EXIT_CONFIG, "config error: eval needs gold and prediction files")
        try:
            sweep = [float(t) for t in args.thresholds.split(",")] if args.thresholds else None
        except ValueError:
            return _fail(EXIT_CONFIG, f"config error: bad threshold list {args.thresholds!r}")
        if sweep is None:
            sweep = list(cfg.eval.thresholds) if cfg else [0.0, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
        try:
            cmd_eval(gold, pred, sweep, out)
        except (SchemaError, InputError, OSError) as exc:
            return _fail(EXIT_INPUT, f"input error: {exc}")
        return 0

    if cfg is None:
        return _fail(EXIT_CONFIG, "config error: --config is required")
    cities = list(cfg.cities)
    if args.city:
        try:
            cities = [cfg.city(k) for k in args.city]
        except ConfigError as exc:
            return _fail(EXIT_CONFIG, f"config error: {exc}")
    counts = getattr(args, "counts", None)
    if counts is not None and len(cities) != 1:
        return _fail(EXIT_CONFIG, "config error: --counts needs exactly one city")

    work = [Job(args.command, c, out / c.key, counts, verbose) for c in cities]
    if jobs == 1 or len(work) == 1:
        results = [run_job(j) for j in work]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            results = list(pool.map(run_job, work))

    status = 0
    for job, (code, message) in zip(work, results):
        if code:
            _fail(code, f"{job.city.key}: {message}")
            status = max(status, code)
        else:
            log.info("%s %s: wrote %s", job.command, job.city.key, message)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
