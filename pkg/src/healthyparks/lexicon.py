"""Tag cleaning and mapping of OSM objects to health-promoting activity categories."""

from __future__ import annotations

import os
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional, Protocol, Union

from .osm_ingest import ParkRecord, Tags, TaggedObject
from .tables import PathLike, SchemaError, read_rows

__all__ = [
    "ActivityCategory",
    "CATEGORIES",
    "LexiconEntry",
    "Lexicon",
    "Stoplists",
    "TagClassifier",
    "FacilityCounts",
    "load_lexicon",
    "load_stoplists",
    "clean_tags",
    "categorize_object",
    "count_facilities",
]


class ActivityCategory(str, Enum):
    """Five activity categories; mind-body activities have no OSM tags and are absent."""

    PHYSICAL = "physical"
    NATURE = "nature"
    ENVIRONMENTAL = "environmental"
    SOCIAL = "social"
    CULTURAL = "cultural"

    @classmethod
    def parse(cls, text: str) -> ActivityCategory:
        norm = text.strip().lower().replace("_", "-").replace(" activities", "")
        aliases = {
            "nature-appreciation": cls.NATURE,
            "nature appreciation": cls.NATURE,
        }
        if norm in aliases:
            return aliases[norm]
        return cls(norm)

    def __str__(self) -> str:
        return self.value


CATEGORIES: tuple[ActivityCategory, ...] = tuple(ActivityCategory)


@dataclass(frozen=True)
class LexiconEntry:
    key: str
    value: str
    category: ActivityCategory

    def __post_init__(self) -> None:
        if not self.key or not self.value:
            raise ValueError("lexicon key and value must be non-empty")


class TagClassifier(Protocol):
    """Anything that maps one tag to a set of activity categories."""

    def categories(self, key: str, value: str) -> frozenset[ActivityCategory]: ...


class Lexicon:
    """Lookup table from ``(key, value)`` tags to activity categories.

    A tag listed under several categories maps to all of them.
    """

    def __init__(self, entries: Iterable[LexiconEntry]):
        table: dict[tuple[str, str], set[ActivityCategory]] = {}
        unique: dict[tuple[str, str, ActivityCategory], LexiconEntry] = {}
        for e in entries:
            unique.setdefault((e.key, e.value, e.category), e)
            table.setdefault((e.key, e.value), set()).add(e.category)
        if not unique:
            raise ValueError("lexicon is empty")
        self.entries: tuple[LexiconEntry, ...] = tuple(unique.values())
        self._table = {tag: frozenset(cats) for tag, cats in table.items()}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, tag: object) -> bool:
        return tag in self._table

    def categories(self, key: str, value: str) -> frozenset[ActivityCategory]:
        return self._table.get((key, value), frozenset())

    def extended(self, extra: Iterable[LexiconEntry]) -> Lexicon:
        return Lexicon([*self.entries, *extra])

    @classmethod
    def from_annotations(
        cls, annotations: Iterable, *, secondary_threshold: Optional[float] = None
    ) -> Lexicon:
        """Build a lexicon from externally produced tag annotations.

        Each annotation's main category becomes an entry. With
        ``secondary_threshold`` set, secondary categories whose reliability is at
        least ``threshold * 100`` are added too.
        """
        entries = []
        for a in annotations:
            key, value = a.tag
            if a.main is not None:
                entries.append(LexiconEntry(key, value, a.main))
            if (
                secondary_threshold is not None
                and a.secondary is not None
                and a.secondary_reliability >= secondary_threshold * 100.0
            ):
                entries.append(LexiconEntry(key, value, a.secondary))
        return cls(entries)


def load_lexicon(path: Optional[PathLike] = None) -> Lexicon:
    """Read a ``key,value,category`` table; the bundled default when ``path`` is None."""
    if path is None:
        path = resources.files("healthyparks") / "data" / "lexicon.csv"
    entries = []
    for line, row in read_rows(path, ("key", "value", "category")):
        try:
            entries.append(LexiconEntry(row["key"], row["value"], ActivityCategory.parse(row["category"])))
        except ValueError as exc:
            raise SchemaError(path, line, str(exc)) from None
    return Lexicon(entries)


@dataclass(frozen=True)
class Stoplists:
    """Keys and values stripped before categorisation.

    A key entry ending in ``*`` drops every key starting with the part before it.
    """

    dropped_keys: frozenset[str] = frozenset()
    dropped_values: frozenset[str] = frozenset()
    _prefixes: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "dropped_keys", frozenset(self.dropped_keys))
        object.__setattr__(self, "dropped_values", frozenset(self.dropped_values))
        prefixes = tuple(sorted(k[:-1] for k in self.dropped_keys if k.endswith("*")))
        object.__setattr__(self, "_prefixes", prefixes)

    def drops(self, key: str, value: str) -> bool:
        return (
            key in self.dropped_keys
            or value in self.dropped_values
            or any(key.startswith(p) for p in self._prefixes)
        )


def _read_list(path) -> frozenset[str]:
    if isinstance(path, (str, os.PathLike)):
        path = Path(path)
    text = path.read_text(encoding="utf-8")
    items = set()
    for raw in text.splitlines():
        entry = raw.split("#", 1)[0].strip()
        if entry:
            items.add(entry)
    return frozenset(items)


def load_stoplists(keys_path: Optional[PathLike] = None, values_path: Optional[PathLike] = None) -> Stoplists:
    data = resources.files("healthyparks") / "data"
    return Stoplists(
        _read_list(keys_path if keys_path is not None else data / "stop_keys.txt"),
        _read_list(values_path if values_path is not None else data / "stop_values.txt"),
    )


def clean_tags(tags: Tags, stop: Stoplists) -> Tags:
    """Drop tags whose key or value is on a stoplist, keeping survivor order."""
    return tuple((k, v) for k, v in tags if not stop.drops(k, v))


def _as_classifier(lex: Union[TagClassifier, Iterable[LexiconEntry]]) -> TagClassifier:
    if hasattr(lex, "categories"):
        return lex  # type: ignore[return-value]
    return Lexicon(lex)  # type: ignore[arg-type]


def categorize_object(
    obj: Union[TaggedObject, Tags],
    lex: Union[TagClassifier, Iterable[LexiconEntry]],
    stop: Stoplists,
) -> dict[ActivityCategory, float]:
    """Split one object evenly across the distinct categories its cleaned tags match.

    Two tags matching the same category count once. Returns an empty mapping
    when nothing matches.
    """
    classifier = _as_classifier(lex)
    tags = obj.tags if isinstance(obj, TaggedObject) else obj
    matched: set[ActivityCategory] = set()
    for k, v in clean_tags(tags, stop):
        matched |= classifier.categories(k, v)
    if not matched:
        return {}
    w = 1.0 / len(matched)
    return {c: w for c in CATEGORIES if c in matched}


@dataclass(frozen=True)
class FacilityCounts:
    """Per-category fractional element counts and space areas (hectares) of one park."""

    park_id: str
    elements: Mapping[ActivityCategory, float]
    spaces: Mapping[ActivityCategory, float]

    def element_count(self, c: ActivityCategory) -> float:
        return self.elements.get(c, 0.0)

    def space_area_ha(self, c: ActivityCategory) -> float:
        return self.spaces.get(c, 0.0)


def count_facilities(
    park: ParkRecord,
    lex: Union[TagClassifier, Iterable[LexiconEntry]],
    stop: Stoplists,
) -> FacilityCounts:
    classifier = _as_classifier(lex)
    elements = dict.fromkeys(CATEGORIES, 0.0)
    spaces = dict.fromkeys(CATEGORIES, 0.0)
    for obj in park.elements:
        for c, w in categorize_object(obj, classifier, stop).items():
            elements[c] += w
    for obj, overlap in park.spaces:
        for c, w in categorize_object(obj, classifier, stop).items():
            spaces[c] += overlap * w
    return FacilityCounts(park.park_id, elements, spaces)
