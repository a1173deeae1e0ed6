"""Average-park baselines and park health scores.

For every city, activity category and facility kind, an ordinary least squares
line is fitted in log2-log2 space (count against park area), using only parks
whose count reaches a minimum. Each park's residual from that line is then
z-normalised across the city, and element and space z-scores are averaged.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .lexicon import CATEGORIES, ActivityCategory, FacilityCounts
from .stats import pearson, zscores

log = logging.getLogger(__name__)

__all__ = [
    "FacilityKind",
    "Thresholds",
    "RegressionFit",
    "ParkHealthScore",
    "CityScores",
    "InsufficientData",
    "ols",
    "fit_model",
    "fit_city_models",
    "residual_score",
    "combine_scores",
    "predict_average_park",
    "element_space_correlation",
    "score_city",
]


class InsufficientData(ValueError):
    """Too few parks above threshold to fit a baseline."""


class FacilityKind(str, Enum):
    ELEMENTS = "elements"
    SPACES = "spaces"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Thresholds:
    """Minimum per-category element count and space area (ha) for a park to enter a fit."""

    min_elements: float = 2.0
    min_space_ha: float = 0.05

    def __post_init__(self) -> None:
        if not (self.min_elements > 0 and self.min_space_ha > 0):
            raise ValueError("thresholds must be positive")

    def minimum(self, kind: FacilityKind) -> float:
        return self.min_elements if kind is FacilityKind.ELEMENTS else self.min_space_ha

    def floor(self, kind: FacilityKind) -> float:
        """Half the threshold; smaller counts are raised to it when scoring."""
        return self.minimum(kind) / 2.0


@dataclass(frozen=True)
class RegressionFit:
    city: str
    category: ActivityCategory
    kind: FacilityKind
    intercept: float
    slope: float
    r_squared: float
    n_included: int

    def expected_log2(self, area_ha: float) -> float:
        return self.intercept + self.slope * math.log2(area_ha)


def ols(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Intercept, slope and R² of a simple least squares line (R² = 1 for constant y)."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if len(xa) < 2:
        raise InsufficientData("need at least two points")
    mx, my = xa.mean(), ya.mean()
    dx, dy = xa - mx, ya - my
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise InsufficientData("all x values are equal")
    slope = float(dx @ dy) / sxx
    intercept = float(my - slope * mx)
    resid = dy - slope * dx
    ss_res = float(resid @ resid)
    ss_tot = float(dy @ dy)
    if ss_tot == 0.0:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return intercept, slope, r2


def _measure(counts: FacilityCounts, category: ActivityCategory, kind: FacilityKind) -> float:
    if kind is FacilityKind.ELEMENTS:
        return counts.element_count(category)
    return counts.space_area_ha(category)


def fit_model(
    counts: Sequence[FacilityCounts],
    areas: Mapping[str, float],
    category: ActivityCategory,
    kind: FacilityKind,
    th: Thresholds,
    city: str = "",
) -> RegressionFit:
    """Fit log2(count) on log2(area) over parks whose count reaches the threshold."""
    minimum = th.minimum(kind)
    xs, ys = [], []
    for c in counts:
        v = _measure(c, category, kind)
        if v >= minimum:
            xs.append(math.log2(areas[c.park_id]))
            ys.append(math.log2(v))
    if len(xs) < 2:
        raise InsufficientData(f"{city}/{category}/{kind}: {len(xs)} parks above threshold")
    i, s, r2 = ols(xs, ys)
    return RegressionFit(city, category, kind, i, s, r2, len(xs))


def fit_city_models(
    counts: Sequence[FacilityCounts],
    areas: Mapping[str, float],
    th: Thresholds = Thresholds(),
    city: str = "",
    kinds: Iterable[FacilityKind] = tuple(FacilityKind),
) -> list[RegressionFit]:
    """All fittable (category, kind) baselines of one city; unfittable ones are absent."""
    fits = []
    kinds = tuple(kinds)
    for category in CATEGORIES:
        for kind in kinds:
            try:
                fits.append(fit_model(counts, areas, category, kind, th, city))
            except InsufficientData as exc:
                log.info("no baseline: %s", exc)
    return fits


def residual_score(
    fit: RegressionFit,
    count: float,
    area_ha: float,
    th: Thresholds = Thresholds(),
) -> tuple[float, bool]:
    """Residual of one park from the baseline, and whether it sits below threshold.

    Counts below half the threshold are raised to that floor so the log stays finite.
    """
    if area_ha <= 0:
        raise ValueError("park area must be positive")
    floor = th.floor(fit.kind)
    residual = math.log2(max(count, floor)) - fit.expected_log2(area_ha)
    return residual, count < th.minimum(fit.kind)


def predict_average_park(fit: RegressionFit, area_ha: float = 8.0) -> float:
    """Expected element count (or space hectares) of a park of ``area_ha``."""
    return 2.0 ** fit.expected_log2(area_ha)


@dataclass(frozen=True)
class ParkHealthScore:
    park_id: str
    residuals: Mapping[tuple[ActivityCategory, FacilityKind], Optional[float]]
    zscores: Mapping[tuple[ActivityCategory, FacilityKind], Optional[float]]
    combined: Mapping[ActivityCategory, float]
    sparse: Mapping[tuple[ActivityCategory, FacilityKind], bool]

    def residual(self, c: ActivityCategory, kind: FacilityKind) -> Optional[float]:
        return self.residuals.get((c, kind))

    @property
    def overall(self) -> float:
        return sum(self.combined[c] for c in CATEGORIES) / len(CATEGORIES)

    def sparse_labels(self) -> list[str]:
        return [f"{c}:{k}" for c in CATEGORIES for k in FacilityKind if self.sparse.get((c, k))]


Residuals = Mapping[str, Mapping[tuple[ActivityCategory, FacilityKind], tuple[float, bool]]]


def combine_scores(residuals: Residuals) -> list[ParkHealthScore]:
    """Combine per-kind residuals of one city into per-category scores.

    ``residuals`` maps park id to ``{(category, kind): (residual, sparse)}``;
    a missing key means no baseline exists for that category and kind. Each
    (category, kind) column is z-scored over the parks that have it, and the
    category score is the mean of the available z-scores (0 when none).
    """
    park_ids = sorted(residuals)
    z: dict[str, dict] = {pid: {} for pid in park_ids}
    keys = sorted({k for r in residuals.values() for k in r}, key=lambda k: (CATEGORIES.index(k[0]), k[1].value))
    for key in keys:
        have = [pid for pid in park_ids if key in residuals[pid]]
        zs = zscores([residuals[pid][key][0] for pid in have])
        for pid, value in zip(have, zs):
            z[pid][key] = float(value)

    out = []
    for pid in park_ids:
        combined = {}
        for c in CATEGORIES:
            present = [z[pid][(c, k)] for k in FacilityKind if (c, k) in z[pid]]
            combined[c] = sum(present) / len(present) if present else 0.0
        out.append(
            ParkHealthScore(
                park_id=pid,
                residuals={k: v[0] for k, v in residuals[pid].items()},
                zscores=z[pid],
                combined=combined,
                sparse={k: v[1] for k, v in residuals[pid].items()},
            )
        )
    return out


def element_space_correlation(
    scores: Sequence[ParkHealthScore],
) -> dict[ActivityCategory, tuple[float, int, bool]]:
    """Per category Pearson r between element and space residuals.

    Returns ``(r, n_parks, degenerate)``; degenerate means fewer than two parks
    or zero variance.
    """
    out = {}
    for c in CATEGORIES:
        pairs = [
            (s.residuals[(c, FacilityKind.ELEMENTS)], s.residuals[(c, FacilityKind.SPACES)])
            for s in scores
            if s.residuals.get((c, FacilityKind.ELEMENTS)) is not None
            and s.residuals.get((c, FacilityKind.SPACES)) is not None
        ]
        if len(pairs) < 2:
            out[c] = (0.0, len(pairs), True)
            continue
        r, degenerate = pearson([p[0] for p in pairs], [p[1] for p in pairs])
        out[c] = (r, len(pairs), degenerate)
    return out


@dataclass(frozen=True)
class CityScores:
    city: str
    fits: list[RegressionFit]
    scores: list[ParkHealthScore]
    orthogonality: dict[ActivityCategory, tuple[float, int, bool]] = field(default_factory=dict)

    def by_park(self) -> dict[str, ParkHealthScore]:
        return {s.park_id: s for s in self.scores}


def score_city(
    counts: Sequence[FacilityCounts],
    areas: Mapping[str, float],
    th: Thresholds = Thresholds(),
    city: str = "",
    kinds: Iterable[FacilityKind] = tuple(FacilityKind),
) -> CityScores:
    """Fit baselines, compute residuals and combine them for every park of a city."""
    fits = fit_city_models(counts, areas, th, city, kinds)
    residuals: dict[str, dict] = {}
    for c in counts:
        row = {}
        for fit in fits:
            row[(fit.category, fit.kind)] = residual_score(
                fit, _measure(c, fit.category, fit.kind), areas[c.park_id], th
            )
        residuals[c.park_id] = row
    scores = combine_scores(residuals)
    return CityScores(city, fits, scores, element_space_correlation(scores))
