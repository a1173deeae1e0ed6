import csv
import math
import subprocess
import sys

import geojson
import pytest
from shapely.geometry import shape

from healthyparks.cli import COUNTS_HEADER, SCORES_HEADER, build_parser, main

from helpers import FIXTURE_CONFIG, FIXTURE_DIR, GOLDEN_DIR, run_pipeline, tree_bytes, two_city_config


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    run_pipeline(FIXTURE_CONFIG, out, steps=("ingest", "score", "equity", "validate", "export"))
    assert main(["--config", str(FIXTURE_CONFIG), "--out", str(out / "mini_city"), "eval"]) == 0
    return out / "mini_city"


def cells_match(a, b):
    if a == b:
        return True
    try:
        return math.isclose(float(a), float(b), rel_tol=1e-9, abs_tol=1e-12)
    except ValueError:
        return False


@pytest.mark.parametrize("name", sorted(p.name for p in GOLDEN_DIR.glob("*.csv")))
def test_csv_matches_golden(full_run, name):
    got = list(csv.reader(open(full_run / name, newline="")))
    want = list(csv.reader(open(GOLDEN_DIR / name, newline="")))
    assert len(got) == len(want) and got[0] == want[0]
    for g, w in zip(got, want):
        assert len(g) == len(w) and all(cells_match(x, y) for x, y in zip(g, w)), (g, w)


@pytest.mark.parametrize("name", ["ingest_report.txt", "eval_report.txt", "parks.geojson"])
def test_text_matches_golden(full_run, name):
    assert (full_run / name).read_text() == (GOLDEN_DIR / name).read_text()


def test_headers(full_run):
    assert next(csv.reader(open(full_run / "counts.csv"))) == list(COUNTS_HEADER)
    assert next(csv.reader(open(full_run / "scores.csv"))) == list(SCORES_HEADER)


def test_fixture_ingest_figures(full_run):
    report = dict(line.split() for line in (full_run / "ingest_report.txt").read_text().splitlines())
    assert report["parks"] == "5" and report["skipped_ways"] == "1" and report["nested_parks"] == "1"
    rows = {r["park_id"]: r for r in csv.DictReader(open(full_run / "counts.csv"))}
    assert set(rows) == {"r11", "r12", "w101", "w106", "w113"}
    # 10 ha park overlapped by 4 ha of river
    assert float(rows["w101"]["area_ha"]) == pytest.approx(10.0, rel=1e-3)
    assert float(rows["w101"]["nature_spaces"]) == pytest.approx(4.0, rel=1e-3)
    # the hole is not park
    assert float(rows["r11"]["area_ha"]) == pytest.approx(8.75, rel=1e-3)
    # pitch with two categories splits its area
    assert float(rows["w106"]["physical_spaces"]) == pytest.approx(0.2, rel=1e-3)
    assert float(rows["w106"]["social_spaces"]) == pytest.approx(0.2, rel=1e-3)


def test_geojson_is_valid(full_run):
    text = (full_run / "parks.geojson").read_text()
    fc = geojson.loads(text)
    assert fc.is_valid and len(fc["features"]) == 5
    areas = {r["park_id"]: float(r["area_ha"]) for r in csv.DictReader(open(full_run / "scores.csv"))}
    for feat in fc["features"]:
        geom = shape(feat["geometry"])
        assert geom.is_valid
        assert feat["id"] == feat["properties"]["park_id"]
        assert set(SCORES_HEADER) == set(feat["properties"])
        assert feat["properties"]["area_ha"] == pytest.approx(areas[feat["id"]], abs=1e-4)
        for poly in getattr(geom, "geoms", [geom]):
            assert poly.exterior.is_ccw
            assert all(not ring.is_ccw for ring in poly.interiors)
    holed = next(f for f in fc["features"] if f["id"] == "r11")
    assert len(holed["geometry"]["coordinates"]) == 2


def test_eval_report_marks_threshold_one(full_run):
    text = (full_run / "eval_report.txt").read_text()
    block = text.split("threshold 1\n")[1]
    assert "f1_weighted == f1_main" in block
    sweep = list(csv.DictReader(open(full_run / "eval_sweep.csv")))
    assert sweep[-1]["f1_weighted"] == sweep[-1]["f1_main"]


def test_validation_and_percentile(full_run):
    row = next(csv.DictReader(open(full_run / "validation.csv")))
    assert row["status"] == "ok" and row["n_parks"] == "4"
    pct = {r["category"]: r for r in csv.DictReader(open(full_run / "percentile.csv"))}
    assert pct["cultural"]["n_unknown"] == "1" and pct["cultural"]["percentile"] == ""


def test_runs_are_byte_identical_and_jobs_independent(tmp_path):
    cfg = two_city_config(tmp_path)
    outs = [tmp_path / "a", tmp_path / "b", tmp_path / "c"]
    run_pipeline(cfg, outs[0], jobs=1)
    run_pipeline(cfg, outs[1], jobs=1)
    run_pipeline(cfg, outs[2], jobs=4)
    first = tree_bytes(outs[0])
    assert len(first) > 10
    assert first == tree_bytes(outs[1]) == tree_bytes(outs[2])
    a, b = first["mini_city/scores.csv"], first["mini_twin/scores.csv"]
    assert a.replace(b"mini_city,", b"") == b.replace(b"mini_twin,", b"")


def test_city_filter_and_unknown_city(tmp_path):
    cfg = two_city_config(tmp_path)
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o"), "ingest", "--city", "mini_twin"]) == 0
    assert [p.name for p in (tmp_path / "o").iterdir()] == ["mini_twin"]
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o"), "ingest", "--city", "nope"]) == 2


def city_config(tmp_path, extract):
    p = tmp_path / "c.toml"
    p.write_text(f'[city.x]\ncenter = [8.5, 47.37]\nextract = "{extract}"\n')
    return p


def test_exit_codes(tmp_path, capsys):
    out = ["--out", str(tmp_path / "o")]
    assert main(["--config", str(city_config(tmp_path, tmp_path / "missing.osm")), *out, "ingest"]) == 2
    bad = tmp_path / "bad.osm"
    bad.write_text("<osm><node id='1' lat='1' lon='1'>")
    assert main(["--config", str(city_config(tmp_path, bad)), *out, "ingest"]) == 1
    empty = tmp_path / "empty.osm"
    empty.write_text("<osm version='0.6'></osm>")
    assert main(["--config", str(city_config(tmp_path, empty)), *out, "ingest"]) == 1
    assert main(["--config", str(tmp_path / "none.toml"), *out, "ingest"]) == 2
    assert main([*out, "ingest"]) == 2
    assert main(["--config", str(FIXTURE_CONFIG), *out, "--jobs", "0", "ingest"]) == 2
    capsys.readouterr()


def test_schema_error_names_line(tmp_path, capsys):
    counts = tmp_path / "counts.csv"
    lines = (GOLDEN_DIR / "counts.csv").read_text().splitlines()
    lines[3] = lines[3].replace("Riverside Park,", "Riverside Park,oops,", 1)
    counts.write_text("\n".join(lines) + "\n")
    code = main(["--config", str(FIXTURE_CONFIG), "--out", str(tmp_path / "o"), "score", "--counts", str(counts)])
    assert code == 1
    assert ":4:" in capsys.readouterr().err


def test_score_without_counts_is_input_error(tmp_path, capsys):
    assert main(["--config", str(FIXTURE_CONFIG), "--out", str(tmp_path / "o"), "score"]) == 1
    assert "counts" in capsys.readouterr().err


def test_eval_with_explicit_files(tmp_path):
    args = ["--out", str(tmp_path), "eval", "--gold", str(FIXTURE_DIR / "gold.csv"),
            "--pred", str(FIXTURE_DIR / "predictions.csv"), "--thresholds", "1.0"]
    assert main(args) == 0
    assert "f1_weighted == f1_main" in (tmp_path / "eval_report.txt").read_text()
    assert main(["--out", str(tmp_path), "eval", "--gold", "g.csv"]) == 2
    assert main([*args[:-1], "x,y"]) == 2


def test_global_flags_after_subcommand(tmp_path):
    ns = build_parser().parse_args(["ingest", "--config", "c.toml", "--out", str(tmp_path), "-vv"])
    assert str(ns.config) == "c.toml" and ns.verbose == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "healthyparks", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("healthyparks ")
    r = subprocess.run([sys.executable, "-m", "healthyparks", "--config", str(FIXTURE_CONFIG),
                        "--out", str(tmp_path), "ingest"], capture_output=True, text=True)
    assert r.returncode == 0
    assert (tmp_path / "mini_city" / "counts.csv").read_bytes() == (GOLDEN_DIR / "counts.csv").read_bytes()
