import logging

import pytest

from healthyparks.config import ConfigError, load_config, parse_park_rule

from helpers import FIXTURE_CONFIG, FIXTURE_OSM

BASE = """
[city.a]
center = [8.5, 47.37]
extract = "{osm}"
"""


def write(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text.replace("{osm}", str(FIXTURE_OSM)))
    return p


def test_fixture_config_loads(caplog):
    with caplog.at_level(logging.WARNING):
        cfg = load_config(FIXTURE_CONFIG)
    city = cfg.city("mini_city")
    assert city.extract == FIXTURE_OSM.resolve()
    assert city.thresholds.min_elements == 2.0 and city.min_parks == 3
    assert cfg.eval.thresholds[-1] == 1.0
    assert any("population" in r.message for r in caplog.records)


def test_defaults(tmp_path):
    city = load_config(write(tmp_path, BASE)).city("a")
    assert city.name == "a" and city.min_images == 250 and city.min_parks == 15
    assert city.external is None and city.warnings() == []
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, BASE)).city("b")


@pytest.mark.parametrize("extra", [
    'bogus = 1',
    'park_rules = []',
    'park_rules = ["leisure"]',
    'min_parks = -1',
    'name = 3',
])
def test_bad_city_fields(tmp_path, extra):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, BASE + extra + "\n"))


@pytest.mark.parametrize("text", [
    "",
    "[city.a]\ncenter = [8.5, 47.37]\n",
    '[city.a]\ncenter = [200, 47]\nextract = "x.osm"\n',
    '[city.a]\ncenter = [8.5]\nextract = "x.osm"\n',
    BASE + "[city.a.thresholds]\nmin_elements = 0\n",
    BASE + "[eval]\nthresholds = []\n",
    BASE + "[other]\nx = 1\n",
    "not toml = = =",
])
def test_invalid_configs(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.toml")


def test_selection_warnings(tmp_path):
    text = BASE + "[city.a.metadata]\npopulation = 100000\ninternet_share = 0.5\ntagged_area_share = 0.05\n"
    assert len(load_config(write(tmp_path, text)).city("a").warnings()) == 3


def test_park_rules():
    assert parse_park_rule("leisure=park") == ("leisure", "park")
    assert parse_park_rule("boundary=*") == ("boundary", None)
    with pytest.raises(ConfigError):
        parse_park_rule("=park")
