"""Cross-source validation of park scores.

External activity evidence (for instance photo labels already matched to OSM
tags) is scored with the same baseline-and-residual machinery as OSM elements,
then correlated with the OSM-derived scores. A percentile-ranking metric checks
how high the parks named by survey respondents sit in a score ranking.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lexicon import CATEGORIES, ActivityCategory, FacilityCounts, Stoplists, TagClassifier, clean_tags
from .scoring import FacilityKind, Thresholds, score_city
from .stats import pearson
from .tables import PathLike, SchemaError, parse_float, read_rows

log = logging.getLogger(__name__)

__all__ = [
    "ExternalActivityCounts",
    "ValidationReport",
    "CitySkipped",
    "EmptyInput",
    "score_external",
    "correlate",
    "percentile_ranking",
    "categorize_labels",
    "load_external_counts",
    "load_label_mapping",
    "load_survey",
    "resolve_park_names",
]

EXTERNAL_COLUMNS = ("park_id", "total_images", *(c.value for c in CATEGORIES))


class CitySkipped(Exception):
    """Too few parks qualified for validation in a city."""

    def __init__(self, city: str, n_parks: int, min_parks: int):
        self.city = city
        self.n_parks = n_parks
        self.min_parks = min_parks
        super().__init__(f"{city or 'city'}: {n_parks} qualifying parks, need {min_parks}")


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class ExternalActivityCounts:
    park_id: str
    labels: Mapping[ActivityCategory, float]
    total_images: int = 0

    def __post_init__(self) -> None:
        if self.total_images < 0 or any(v < 0 for v in self.labels.values()):
            raise ValueError(f"negative count for park {self.park_id}")


def score_external(
    counts: Sequence[ExternalActivityCounts],
    areas: Mapping[str, float],
    th: Thresholds = Thresholds(),
    city: str = "",
) -> dict[str, dict[ActivityCategory, float]]:
    """Park scores from external label counts, treated as a single element-like kind."""
    as_facilities = [FacilityCounts(c.park_id, dict(c.labels), {}) for c in counts]
    result = score_city(as_facilities, areas, th, city, kinds=(FacilityKind.ELEMENTS,))
    return {s.park_id: dict(s.combined) for s in result.scores}


@dataclass(frozen=True)
class ValidationReport:
    city: str
    n_parks_used: int
    pcc: Mapping[ActivityCategory, float]
    degenerate: tuple[ActivityCategory, ...] = ()

    @property
    def mean_pcc(self) -> float:
        return sum(self.pcc[c] for c in CATEGORIES) / len(CATEGORIES)


def correlate(
    osm_scores: Mapping[str, Mapping[ActivityCategory, float]],
    external_scores: Mapping[str, Mapping[ActivityCategory, float]],
    total_images: Optional[Mapping[str, int]] = None,
    min_images: int = 250,
    min_parks: int = 15,
    city: str = "",
) -> ValidationReport:
    """Per category Pearson r between two score sets over qualifying shared parks.

    A park qualifies when it has at least ``min_images`` images (all shared
    parks qualify when ``total_images`` is not given). Raises
    :class:`CitySkipped` when fewer than ``min_parks`` qualify.
    """
    shared = sorted(set(osm_scores) & set(external_scores))
    if total_images is not None:
        shared = [p for p in shared if total_images.get(p, 0) >= min_images]
    if len(shared) < min_parks:
        raise CitySkipped(city, len(shared), min_parks)
    pcc, degenerate = {}, []
    for c in CATEGORIES:
        r, flag = pearson([osm_scores[p][c] for p in shared], [external_scores[p][c] for p in shared])
        pcc[c] = r
        if flag:
            degenerate.append(c)
    return ValidationReport(city, len(shared), pcc, tuple(degenerate))


def percentile_ranking(
    named_parks: Iterable[str],
    ranking: Sequence[str],
    scores: Optional[Mapping[str, float]] = None,
) -> float:
    """Mean percentile of the named parks in a best-first ranking.

    The top park scores 1 and the bottom park 0. With ``scores`` given, parks
    with equal scores share the mean of their rank positions. Names missing
    from the ranking are logged and skipped.
    """
    n = len(ranking)
    position = {pid: float(i) for i, pid in enumerate(ranking)}
    if scores is not None:
        i = 0
        while i < n:
            j = i
            while j + 1 < n and scores[ranking[j + 1]] == scores[ranking[i]]:
                j += 1
            for k in range(i, j + 1):
                position[ranking[k]] = (i + j) / 2.0
            i = j + 1
    values = []
    for pid in named_parks:
        if pid not in position:
            log.warning("named park %r is not in the ranking", pid)
            continue
        values.append(1.0 if n == 1 else 1.0 - position[pid] / (n - 1))
    if not values:
        raise EmptyInput("no named park found in the ranking")
    return float(np.mean(values))


def categorize_labels(
    label_counts: Mapping[str, float],
    mapping: Mapping[str, Sequence[tuple[str, str]]],
    lexicon: TagClassifier,
    stop: Optional[Stoplists] = None,
) -> dict[ActivityCategory, float]:
    """Turn raw label counts into category counts via a label-to-tag table.

    Each label is split evenly across the distinct categories of its matched tags.
    """
    out = dict.fromkeys(CATEGORIES, 0.0)
    for label, count in label_counts.items():
        tags = tuple(mapping.get(label, ()))
        if stop is not None:
            tags = clean_tags(tags, stop)
        cats: set[ActivityCategory] = set()
        for k, v in tags:
            cats |= lexicon.categories(k, v)
        for c in cats:
            out[c] += count / len(cats)
    return out


def load_external_counts(path: PathLike) -> list[ExternalActivityCounts]:
    out = []
    for line, row in read_rows(path, EXTERNAL_COLUMNS):
        total = parse_float(path, line, row["total_images"], "total_images")
        if total != int(total):
            raise SchemaError(path, line, "total_images must be an integer")
        labels = {c: parse_float(path, line, row[c.value], c.value) for c in CATEGORIES}
        try:
            out.append(ExternalActivityCounts(row["park_id"], labels, int(total)))
        except ValueError as exc:
            raise SchemaError(path, line, str(exc)) from None
    return out


def load_label_mapping(path: PathLike) -> dict[str, list[tuple[str, str]]]:
    out: dict[str, list[tuple[str, str]]] = {}
    for _, row in read_rows(path, ("label", "key", "value")):
        out.setdefault(row["label"], []).append((row["key"], row["value"]))
    return out


def load_survey(path: PathLike) -> list[tuple[ActivityCategory, str]]:
    out = []
    for line, row in read_rows(path, ("category", "park_name")):
        try:
            out.append((ActivityCategory.parse(row["category"]), row["park_name"]))
        except ValueError as exc:
            raise SchemaError(path, line, str(exc)) from None
    return out


def resolve_park_names(
    names: Iterable[str], park_names: Mapping[str, Optional[str]]
) -> tuple[list[str], list[str]]:
    """Map survey names to park ids by case-insensitive exact match.

    Returns ``(park_ids, unknown_names)``. A name shared by several parks
    resolves to all of them.
    """
    index: dict[str, list[str]] = {}
    for pid in sorted(park_names):
        name = park_names[pid]
        if name:
            index.setdefault(name.strip().casefold(), []).append(pid)
    found, unknown = [], []
    for name in names:
        hits = index.get(name.strip().casefold())
        if hits:
            found.extend(hits)
        else:
            unknown.append(name)
    return found, unknown
