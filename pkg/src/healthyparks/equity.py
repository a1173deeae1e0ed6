"""Within-city disparity of park scores and their gradient with distance to the centre."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .lexicon import CATEGORIES, ActivityCategory
from .stats import pearson, welch_ttest

__all__ = [
    "DegenerateInput",
    "InsufficientParks",
    "DisparityReport",
    "QuartileReport",
    "disparity_index",
    "disparity_report",
    "quartile_split",
    "quartile_analysis",
    "distance_correlation",
]

MIN_QUARTILE_PARKS = 8


class DegenerateInput(ValueError):
    pass


class InsufficientParks(ValueError):
    pass


def disparity_index(scores: Sequence[float]) -> float:
    """Gini index of min-max normalised scores.

    Normalising first makes the index defined for negative scores and
    invariant to positive affine rescaling. Equal scores give 0.
    """
    x = np.asarray(scores, dtype=float)
    n = len(x)
    if n < 2:
        raise DegenerateInput("disparity index needs at least two scores")
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return 0.0
    xn = np.sort((x - lo) / (hi - lo))
    # sum_i sum_j |x_i - x_j| = 2 * sum_i (2i - n - 1) x_(i) for ascending order
    ranks = np.arange(1, n + 1, dtype=float)
    g = float(((2.0 * ranks - n - 1.0) * xn).sum()) / (n * float(xn.sum()))
    return min(1.0, max(0.0, g))


@dataclass(frozen=True)
class DisparityReport:
    city: str
    gini: Mapping[ActivityCategory, float]

    @property
    def mean_gini(self) -> float:
        return sum(self.gini[c] for c in CATEGORIES) / len(CATEGORIES)


def disparity_report(city: str, scores: Mapping[str, Mapping[ActivityCategory, float]]) -> DisparityReport:
    parks = sorted(scores)
    return DisparityReport(
        city, {c: disparity_index([scores[p][c] for p in parks]) for c in CATEGORIES}
    )


def quartile_split(distances: Mapping[str, float]) -> list[list[str]]:
    """Four near-equal groups ordered from the innermost to the outermost parks.

    Parks are sorted by distance with ties broken by park id; earlier groups
    take the extra park when the count is not divisible by four.
    """
    order = sorted(distances, key=lambda pid: (distances[pid], pid))
    return [list(chunk) for chunk in np.array_split(np.array(order, dtype=object), 4)]


@dataclass(frozen=True)
class QuartileReport:
    city: str
    groups: list[list[str]]
    means: Mapping[ActivityCategory, tuple[float, float, float, float]]
    p_values: Mapping[ActivityCategory, tuple[float, float, float]]
    pcc_log_distance: Mapping[ActivityCategory, float]


def distance_correlation(
    scores: Mapping[str, Mapping[ActivityCategory, float]],
    distances: Mapping[str, float],
) -> dict[ActivityCategory, tuple[float, bool]]:
    """Per category Pearson r between score and log2(distance in metres).

    Zero variance on either side gives ``(0.0, True)``.
    """
    parks = sorted(distances)
    if len(parks) < 3:
        raise DegenerateInput("distance correlation needs at least three parks")
    if any(distances[p] <= 0 for p in parks):
        raise DegenerateInput("distances must be positive")
    logd = [math.log2(distances[p]) for p in parks]
    return {c: pearson([scores[p][c] for p in parks], logd) for c in CATEGORIES}


def quartile_analysis(
    scores: Mapping[str, Mapping[ActivityCategory, float]],
    distances: Mapping[str, float],
    city: str = "",
) -> QuartileReport:
    """Mean scores per distance quartile and Welch p-values for adjacent quartiles."""
    if len(distances) < MIN_QUARTILE_PARKS:
        raise InsufficientParks(f"{city}: quartile analysis needs {MIN_QUARTILE_PARKS} parks, got {len(distances)}")
    groups = quartile_split(distances)
    means, p_values = {}, {}
    for c in CATEGORIES:
        values = [[scores[p][c] for p in g] for g in groups]
        means[c] = tuple(float(np.mean(v)) for v in values)
        p_values[c] = tuple(welch_ttest(values[i], values[i + 1]).p for i in range(3))
    pcc = {c: r for c, (r, _) in distance_correlation(scores, distances).items()}
    return QuartileReport(city, groups, means, p_values, pcc)
