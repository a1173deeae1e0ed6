"""City configuration files.

A config is a TOML document with one ``[city.<key>]`` table per city::

    [city.mini]
    name = "Mini City"
    center = [8.5, 47.37]          # lon, lat
    extract = "mini_city.osm"      # relative to the config file
    park_rules = ["leisure=park"]  # "key=value" or "key=*"

    [city.mini.thresholds]
    min_elements = 2.0
    min_space_ha = 0.05

Optional per-city paths: ``external`` (external activity counts), ``survey``,
``gold`` and ``predictions``. Optional ``[city.<key>.metadata]`` carries
``population``, ``internet_share`` and ``tagged_area_share``; values outside
the usual city selection range only produce warnings. A top-level ``[eval]``
table may hold ``gold``, ``predictions`` and ``thresholds`` for ``eval``.
"""

from __future__ import annotations

import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .osm_ingest import DEFAULT_PARK_RULES, ParkRules
from .scoring import Thresholds

log = logging.getLogger(__name__)

__all__ = ["ConfigError", "CityConfig", "EvalConfig", "Config", "load_config", "parse_park_rule"]

DEFAULT_SWEEP = (0.0, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

MIN_POPULATION = 650_000
MIN_INTERNET_SHARE = 0.8
MIN_TAGGED_SHARE = 1 / 8


class ConfigError(ValueError):
    pass


def parse_park_rule(text: str) -> tuple[str, Optional[str]]:
    key, sep, value = text.partition("=")
    key, value = key.strip(), value.strip()
    if not sep or not key or not value:
        raise ConfigError(f"park rule {text!r} is not of the form key=value or key=*")
    return key, (None if value == "*" else value)


@dataclass(frozen=True)
class CityConfig:
    key: str
    name: str
    center: tuple[float, float]
    extract: Path
    park_rules: ParkRules = DEFAULT_PARK_RULES
    thresholds: Thresholds = Thresholds()
    external: Optional[Path] = None
    survey: Optional[Path] = None
    gold: Optional[Path] = None
    predictions: Optional[Path] = None
    min_images: int = 250
    min_parks: int = 15
    metadata: dict[str, float] = field(default_factory=dict)

    def warnings(self) -> list[str]:
        out = []
        m = self.metadata
        if "population" in m and m["population"] < MIN_POPULATION:
            out.append(f"{self.key}: population {m['population']:g} below {MIN_POPULATION}")
        if "internet_share" in m and m["internet_share"] < MIN_INTERNET_SHARE:
            out.append(f"{self.key}: internet share {m['internet_share']:g} below {MIN_INTERNET_SHARE}")
        if "tagged_area_share" in m and m["tagged_area_share"] < MIN_TAGGED_SHARE:
            out.append(f"{self.key}: tagged area share {m['tagged_area_share']:g} below 1/8")
        return out


@dataclass(frozen=True)
class EvalConfig:
    gold: Optional[Path] = None
    predictions: Optional[Path] = None
    thresholds: tuple[float, ...] = DEFAULT_SWEEP


@dataclass(frozen=True)
class Config:
    path: Path
    cities: tuple[CityConfig, ...]
    eval: EvalConfig = EvalConfig()

    def city(self, key: str) -> CityConfig:
        for c in self.cities:
            if c.key == key:
                return c
        raise ConfigError(f"no city {key!r} in {self.path}")


def _path(base: Path, value: Any, what: str) -> Path:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{what}: expected a path string")
    p = Path(value)
    return Path(os.path.normpath(p if p.is_absolute() else base / p))


def _number(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what}: expected a number")
    return float(value)


def _city(key: str, table: dict, base: Path) -> CityConfig:
    where = f"city.{key}"
    known = {
        "name", "center", "extract", "park_rules", "thresholds", "external", "survey",
        "gold", "predictions", "min_images", "min_parks", "metadata",
    }
    unknown = sorted(set(table) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {', '.join(unknown)}")
    if "extract" not in table:
        raise ConfigError(f"{where}: extract path is not set")
    center = table.get("center")
    if not isinstance(center, list) or len(center) != 2:
        raise ConfigError(f"{where}.center: expected [lon, lat]")
    lon, lat = (_number(v, f"{where}.center") for v in center)
    if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
        raise ConfigError(f"{where}.center: coordinates out of range")

    rules = table.get("park_rules", None)
    if rules is None:
        park_rules = DEFAULT_PARK_RULES
    else:
        if not isinstance(rules, list) or not rules or not all(isinstance(r, str) for r in rules):
            raise ConfigError(f"{where}.park_rules: expected a non-empty list of strings")
        park_rules = ParkRules.of(*(parse_park_rule(r) for r in rules))

    th_table = table.get("thresholds", {})
    if not isinstance(th_table, dict) or set(th_table) - {"min_elements", "min_space_ha"}:
        raise ConfigError(f"{where}.thresholds: expected min_elements and/or min_space_ha")
    defaults = Thresholds()
    try:
        thresholds = Thresholds(
            _number(th_table.get("min_elements", defaults.min_elements), f"{where}.thresholds.min_elements"),
            _number(th_table.get("min_space_ha", defaults.min_space_ha), f"{where}.thresholds.min_space_ha"),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}.thresholds: {exc}") from None

    metadata = table.get("metadata", {})
    if not isinstance(metadata, dict):
        raise ConfigError(f"{where}.metadata: expected a table")
    meta = {k: _number(v, f"{where}.metadata.{k}") for k, v in metadata.items()}

    def opt(name: str) -> Optional[Path]:
        return _path(base, table[name], f"{where}.{name}") if name in table else None

    def count(name: str, default: int) -> int:
        v = table.get(name, default)
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ConfigError(f"{where}.{name}: expected a non-negative integer")
        return v

    name = table.get("name", key)
    if not isinstance(name, str) or not name:
        raise ConfigError(f"{where}.name: expected a string")
    return CityConfig(
        key=key,
        name=name,
        center=(lon, lat),
        extract=_path(base, table["extract"], f"{where}.extract"),
        park_rules=park_rules,
        thresholds=thresholds,
        external=opt("external"),
        survey=opt("survey"),
        gold=opt("gold"),
        predictions=opt("predictions"),
        min_images=count("min_images", 250),
        min_parks=count("min_parks", 15),
        metadata=meta,
    )


def load_config(path: os.PathLike | str) -> Config:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent
    unknown = sorted(set(doc) - {"city", "eval"})
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys {', '.join(unknown)}")
    cities_table = doc.get("city", {})
    if not isinstance(cities_table, dict) or not cities_table:
        raise ConfigError(f"{path}: no [city.<key>] sections")
    cities = tuple(_city(k, v, base) for k, v in cities_table.items())

    ev = doc.get("eval", {})
    if not isinstance(ev, dict):
        raise ConfigError(f"{path}: [eval] must be a table")
    sweep = ev.get("thresholds", list(DEFAULT_SWEEP))
    if not isinstance(sweep, list) or not sweep:
        raise ConfigError("eval.thresholds: expected a non-empty list")
    eval_cfg = EvalConfig(
        gold=_path(base, ev["gold"], "eval.gold") if "gold" in ev else None,
        predictions=_path(base, ev["predictions"], "eval.predictions") if "predictions" in ev else None,
        thresholds=tuple(_number(t, "eval.thresholds") for t in sweep),
    )
    cfg = Config(path, cities, eval_cfg)
    for c in cities:
        for w in c.warnings():
            log.warning("%s", w)
    return cfg
