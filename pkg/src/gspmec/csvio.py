"""Versioned CSV tables.

The first line is a comment ``# gspmec-csv v<N> kind=<kind>``; readers
reject any other version.
"""
from __future__ import annotations

import csv
import io
import math
import re
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import MissingColumn, ParseError

CSV_VERSION = 1
_HEADER = re.compile(r"^# gspmec-csv v(\d+) kind=(\w+)\s*$")


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(round(x, 12))
    return str(x)


def write_table(path: str | Path, kind: str, columns: Sequence[str], rows: Iterable[Mapping]) -> None:
    buf = io.StringIO()
    buf.write(f"# gspmec-csv v{CSV_VERSION} kind={kind}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in columns])
    Path(path).write_text(buf.getvalue())


def read_table(path: str | Path) -> tuple[str, list[str], list[dict[str, str]]]:
    """Return ``(kind, columns, rows)``; raise on a missing or unknown version line."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise MissingColumn(f"{path}: empty file")
    m = _HEADER.match(lines[0])
    if not m:
        raise ParseError(f"{path}: missing version line")
    if int(m.group(1)) != CSV_VERSION:
        raise ParseError(f"{path}: unsupported CSV version {m.group(1)}")
    reader = csv.DictReader(lines[1:])
    rows = list(reader)
    return m.group(2), list(reader.fieldnames or []), rows


def column(rows: Sequence[Mapping[str, str]], columns: Sequence[str], name: str) -> list[float]:
    if name not in columns:
        raise MissingColumn(f"column {name!r} not found")
    return [float(r[name]) for r in rows]
