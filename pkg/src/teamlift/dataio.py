"""Delimited-text tables and attribute-value documents.

Two plain-text formats are used for every artifact the toolkit writes:

* kv documents: one ``key = value`` per line, ``#`` comments. Used for
  manifests, run configs, and the serve-mode API payloads.
* TSV tables: tab-delimited with a single header row. Used for datasets,
  ITE records, feature matrices, and leaderboards.

Floats are rendered with ``repr`` so that a read-back reproduces the exact
binary value, which is what makes regenerated artifact trees byte-identical.
"""
from __future__ import annotations

import datetime as dt
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError

__all__ = [
    "format_value",
    "render_kv",
    "parse_kv",
    "write_kv",
    "read_kv",
    "write_table",
    "read_table",
    "parse_bool",
]


def format_value(value) -> str:
    """Canonical text form of a scalar or flat sequence."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (int, str)):
        return str(value)
    if isinstance(value, (dt.date, dt.datetime)):
        return value.isoformat()
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    if value is None:
        return ""
    return str(value)


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def render_kv(items: Mapping[str, object]) -> str:
    lines = []
    for key, value in items.items():
        text = format_value(value)
        if "\n" in key or "\n" in text:
            raise ValueError(f"kv entries must be single-line: {key!r}")
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict[str, str]:
    """Parse a kv document into raw string values (order preserved)."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def write_kv(path: Path | str, items: Mapping[str, object]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_kv(items), encoding="utf-8")
    return path


def read_kv(path: Path | str) -> dict[str, str]:
    return parse_kv(Path(path).read_text(encoding="utf-8"))


def write_table(path: Path | str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(header)]
    width = len(header)
    for row in rows:
        cells = [format_value(cell) for cell in row]
        if len(cells) != width:
            raise ValueError(f"row width {len(cells)} != header width {width}")
        for cell in cells:
            if "\t" in cell or "\n" in cell:
                raise ValueError(f"table cell contains delimiter: {cell!r}")
        lines.append("\t".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_table(path: Path | str) -> tuple[list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise ValueError(f"empty table file: {path}")
    header = lines[0].split("\t")
    rows = [line.split("\t") for line in lines[1:] if line]
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}: line {i} has {len(row)} cells, expected {len(header)}")
    return header, rows
