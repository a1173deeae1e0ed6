"""CSV reading and writing with header checks and stable float formatting."""

from __future__ import annotations

import csv
import io
import os
from collections.abc import Iterable, Iterator, Sequence
from typing import Union

PathLike = Union[str, os.PathLike]


class SchemaError(ValueError):
    """An input table does not match its declared columns."""

    def __init__(self, path: PathLike, line: int, message: str):
        self.path = os.fspath(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


def read_rows(path: PathLike, columns: Sequence[str], *, allow_extra: bool = False) -> Iterator[tuple[int, dict[str, str]]]:
    """Yield ``(line_number, row)`` pairs after checking the header.

    The header must start with ``columns`` in order; trailing columns are
    accepted only when ``allow_extra`` is set.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(path, 1, "missing header row") from None
        expected = list(columns)
        if header[: len(expected)] != expected or (not allow_extra and len(header) != len(expected)):
            raise SchemaError(path, 1, f"expected header {','.join(expected)}, got {','.join(header)}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaError(path, line, f"expected {len(header)} fields, got {len(row)}")
            yield line, dict(zip(header, (c.strip() for c in row)))


def parse_float(path: PathLike, line: int, value: str, column: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise SchemaError(path, line, f"column {column}: not a number: {value!r}") from None


def fmt(x: float) -> str:
    """Shortest round-trip representation, used for intermediate tables."""
    if x != x:
        return "nan"
    if x == 0.0:
        return "0.0"
    return repr(float(x))


def write_table(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
