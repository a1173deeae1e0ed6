"""Benchmark tag annotations against a gold standard.

Two scores are produced. The plain F1 uses only each annotation's main
category. The reliability-weighted F1' mixes, per class, the confusion counts
of the main and of the secondary labels, weighted by how the annotator's mean
reliability splits between the two labels for that class.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace
from typing import Optional

from .lexicon import CATEGORIES, ActivityCategory
from .tables import PathLike, SchemaError, parse_float, read_rows

log = logging.getLogger(__name__)

__all__ = [
    "Annotation",
    "ClassScores",
    "EvalReport",
    "MissingPrediction",
    "f1_main",
    "f1_weighted",
    "apply_threshold",
    "threshold_sweep",
    "load_gold",
    "load_predictions",
    "format_report",
]

Label = Optional[ActivityCategory]
Tag = tuple[str, str]
CLASSES: tuple[Label, ...] = (*CATEGORIES, None)


class MissingPrediction(KeyError):
    """A gold tag has no annotation."""


@dataclass(frozen=True)
class Annotation:
    tag: Tag
    main: Label
    main_reliability: float = 100.0
    secondary: Label = None
    secondary_reliability: float = 0.0

    def __post_init__(self) -> None:
        for r in (self.main_reliability, self.secondary_reliability):
            if not 0.0 <= r <= 100.0:
                raise ValueError(f"reliability {r} outside [0, 100]")


@dataclass(frozen=True)
class ClassScores:
    label: Label
    support: int
    precision: float
    recall: float
    f1: float
    reliability: float
    degenerate: bool = False


@dataclass(frozen=True)
class EvalReport:
    per_class: tuple[ClassScores, ...]
    precision: float
    recall: float
    f1: float
    f1_main: float
    f1_weighted: float
    reliability_ratio: float

    @property
    def degenerate_classes(self) -> list[Label]:
        return [c.label for c in self.per_class if c.degenerate]


def label_name(label: Label) -> str:
    return "none" if label is None else label.value


def parse_label(text: str) -> Label:
    t = text.strip()
    if not t or t.lower() in ("none", "none of the above"):
        return None
    return ActivityCategory.parse(t)


def _align(preds: Iterable[Annotation], gold: Iterable[tuple[Tag, Label]]):
    by_tag: dict[Tag, Annotation] = {}
    for a in preds:
        if a.tag in by_tag:
            raise ValueError(f"duplicate prediction for {a.tag[0]}={a.tag[1]}")
        by_tag[a.tag] = a
    rows = []
    for tag, label in gold:
        if tag not in by_tag:
            raise MissingPrediction(f"{tag[0]}={tag[1]}")
        rows.append((label, by_tag[tag]))
    return rows


def apply_threshold(preds: Iterable[Annotation], threshold: float) -> list[Annotation]:
    """Replace secondary labels with reliability below ``threshold * 100`` by None.

    A threshold of 1 or more removes every secondary label.
    """
    if not 0.0 <= threshold:
        raise ValueError("threshold must be non-negative")
    out = []
    for a in preds:
        if a.secondary is not None and (threshold >= 1.0 or a.secondary_reliability < threshold * 100.0):
            a = replace(a, secondary=None)
        out.append(a)
    return out


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def _prf(tp: float, fp: float, fn: float) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def _evaluate(rows, use_secondary: bool) -> tuple[tuple[ClassScores, ...], float, float, float, float]:
    n = len(rows)
    per_class = []
    wp = wr = wf = wrel = 0.0
    for label in CLASSES:
        tp_m = fp_m = fn_m = tp_s = fp_s = fn_s = 0
        main_rel, sec_rel = [], []
        support = 0
        for gold, a in rows:
            support += gold == label
            tp_m += gold == label and a.main == label
            fp_m += gold != label and a.main == label
            fn_m += gold == label and a.main != label
            tp_s += gold == label and a.secondary == label
            fp_s += gold != label and a.secondary == label
            fn_s += gold == label and a.secondary != label
            if a.main == label:
                main_rel.append(a.main_reliability)
            if a.secondary is not None and a.secondary == label:
                sec_rel.append(a.secondary_reliability)
        degenerate = False
        if use_secondary:
            mm, ms = _mean(main_rel), _mean(sec_rel)
            if mm + ms == 0.0:
                rel, degenerate = 1.0, True
            else:
                rel = mm / (mm + ms)
        else:
            rel = 1.0
        w2 = 1.0 - rel
        tp = tp_m * rel + tp_s * w2
        fp = fp_m * rel + fp_s * w2
        fn = fn_m * rel + fn_s * w2
        p, r, f = _prf(tp, fp, fn)
        per_class.append(ClassScores(label, support, p, r, f, rel, degenerate))
        wp += support * p
        wr += support * r
        wf += support * f
        wrel += support * rel
    if n == 0:
        return tuple(per_class), 0.0, 0.0, 0.0, 1.0
    return tuple(per_class), wp / n, wr / n, wf / n, wrel / n


def f1_main(preds: Iterable[Annotation], gold: Iterable[tuple[Tag, Label]]) -> EvalReport:
    """Support-weighted multi-class F1 of the main labels; None counts as a class."""
    rows = _align(preds, gold)
    per_class, p, r, f, _ = _evaluate(rows, use_secondary=False)
    return EvalReport(per_class, p, r, f, f1_main=f, f1_weighted=f, reliability_ratio=1.0)


def f1_weighted(
    preds: Iterable[Annotation],
    gold: Iterable[tuple[Tag, Label]],
    reliability_threshold: float = 0.0,
) -> EvalReport:
    """Reliability-weighted F1' after dropping secondary labels below the threshold.

    Classes whose main and secondary reliabilities are both absent or zero
    fall back to the main labels only and are flagged as degenerate.
    """
    preds = list(preds)
    gold = list(gold)
    main_f1 = f1_main(preds, gold).f1
    rows = _align(apply_threshold(preds, reliability_threshold), gold)
    per_class, p, r, f, rel = _evaluate(rows, use_secondary=True)
    for c in per_class:
        if c.degenerate and c.support:
            log.info("class %s: no reliabilities, using main labels only", label_name(c.label))
    return EvalReport(per_class, p, r, f, f1_main=main_f1, f1_weighted=f, reliability_ratio=rel)


def threshold_sweep(
    preds: Sequence[Annotation],
    gold: Sequence[tuple[Tag, Label]],
    thresholds: Iterable[float],
) -> list[tuple[float, EvalReport]]:
    return [(t, f1_weighted(preds, gold, t)) for t in thresholds]


def load_gold(path: PathLike) -> list[tuple[Tag, Label]]:
    out = []
    for line, row in read_rows(path, ("key", "value", "category")):
        try:
            out.append(((row["key"], row["value"]), parse_label(row["category"])))
        except ValueError as exc:
            raise SchemaError(path, line, str(exc)) from None
    return out


def load_predictions(path: PathLike) -> list[Annotation]:
    cols = ("key", "value", "main", "main_rel", "secondary", "secondary_rel")
    out = []
    for line, row in read_rows(path, cols):
        try:
            out.append(
                Annotation(
                    (row["key"], row["value"]),
                    parse_label(row["main"]),
                    parse_float(path, line, row["main_rel"] or "0", "main_rel"),
                    parse_label(row["secondary"]),
                    parse_float(path, line, row["secondary_rel"] or "0", "secondary_rel"),
                )
            )
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(path, line, str(exc)) from None
    return out


def format_report(report: EvalReport, title: str = "") -> str:
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'class':<15}{'support':>8}{'precision':>11}{'recall':>9}{'f1':>9}{'rel':>7}")
    for c in report.per_class:
        flag = " *" if c.degenerate and c.support else ""
        lines.append(
            f"{label_name(c.label):<15}{c.support:>8}{c.precision:>11.4f}{c.recall:>9.4f}{c.f1:>9.4f}{c.reliability:>7.3f}{flag}"
        )
    lines.append(f"{'weighted':<15}{'':>8}{report.precision:>11.4f}{report.recall:>9.4f}{report.f1:>9.4f}")
    lines.append(f"f1_main {report.f1_main:.4f}  f1_weighted {report.f1_weighted:.4f}")
    return "\n".join(lines) + "\n"
