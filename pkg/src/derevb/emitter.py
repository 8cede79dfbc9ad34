"""Result writers for derevb.

Every subcommand reports through this module: per-record JSON lines (metric
reports, training records, manifests) and aggregate tables rendered twice, as
aligned plain text for reading and CSV for plotting.

The emitter:
    - Serializes attrs records with attr.asdict and a value serializer that
      turns numpy scalars/arrays, Paths and Enums into JSON types
    - Writes JSONL files with one sorted-key object per line
    - Renders Table objects as aligned text and CSV with fixed float precision

Output is byte-for-byte deterministic for equal inputs.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections.abc import Iterable, Sequence
from enum import Enum
from pathlib import Path
from typing import Any, Union

import attr
import numpy as np

from derevb.errors import InvalidInput

logger = logging.getLogger(__name__)

FLOAT_DIGITS = 3


def _serialize_attr_value(
    inst: Any,  # noqa: ARG001
    field: Any,  # noqa: ARG001
    value: Any,
) -> Any:
    """Value serializer for attr.asdict.

    Args:
        inst: The attrs instance (unused, required by the attrs API).
        field: The attribute being serialized (unused, required by the attrs API).
        value: The value to serialize.

    Returns:
        Python scalars for numpy scalars, lists for arrays, strings for Paths,
        .value for Enums, the value unchanged otherwise.
    """
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, Enum):
        return value.value
    return value


def to_record(obj: Any) -> dict[str, Any]:
    """attrs instance or mapping -> JSON-compatible dict."""
    if attr.has(type(obj)):
        return attr.asdict(obj, value_serializer=_serialize_attr_value)  # type: ignore[call-arg]
    return {k: _serialize_attr_value(None, None, v) for k, v in dict(obj).items()}


def dumps_record(obj: Any) -> str:
    return json.dumps(to_record(obj), sort_keys=True)


def emit_jsonl(path: Union[str, Path], records: Iterable[Any], append: bool = False) -> Path:
    """Write records as JSON lines.

    Args:
        path: Destination file; parent directories are created.
        records: attrs instances or mappings.
        append: Append instead of truncating.

    Returns:
        The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("a" if append else "w", encoding="utf-8") as f:
        for record in records:
            f.write(dumps_record(record) + "\n")
            count += 1
    logger.info(f"Wrote {count} records to {path}")
    return path


@attr.frozen
class Table:
    """Row/column table with a title.

    Attributes:
        title: Caption printed above the text rendering.
        columns: Column headers.
        rows: One tuple per row; floats are rendered with FLOAT_DIGITS decimals.
    """

    title: str
    columns: tuple[str, ...] = attr.field(converter=tuple)
    rows: tuple[tuple[Any, ...], ...] = attr.field(converter=lambda rs: tuple(tuple(r) for r in rs))

    def __attrs_post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise InvalidInput(f"row {row} does not match {len(self.columns)} columns")

    def column(self, name: str) -> list[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{FLOAT_DIGITS}f}"
    return str(value)


def format_table(table: Table) -> str:
    """Aligned plain-text rendering: text columns left, numbers right."""
    cells = [[_cell(v) for v in row] for row in table.rows]
    widths = [
        max([len(header)] + [len(row[i]) for row in cells]) for i, header in enumerate(table.columns)
    ]
    numeric = [
        all(isinstance(row[i], (int, float, np.number)) for row in table.rows) and bool(table.rows)
        for i in range(len(table.columns))
    ]

    def _line(values: Sequence[str]) -> str:
        parts = [
            v.rjust(w) if is_num else v.ljust(w) for v, w, is_num in zip(values, widths, numeric)
        ]
        return "  ".join(parts).rstrip()

    lines = [table.title, _line(table.columns), _line(["-" * w for w in widths])]
    lines.extend(_line(row) for row in cells)
    return "\n".join(lines) + "\n"


def format_csv(table: Table) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def emit_table(table: Table, out_dir: Union[str, Path], stem: str) -> tuple[Path, Path]:
    """Write <stem>.txt and <stem>.csv under out_dir.

    Returns:
        (text path, CSV path).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text_path = out_dir / f"{stem}.txt"
    csv_path = out_dir / f"{stem}.csv"
    text_path.write_text(format_table(table), encoding="utf-8")
    csv_path.write_text(format_csv(table), encoding="utf-8")
    logger.info(f"Wrote table {table.title!r} to {text_path} and {csv_path}")
    return text_path, csv_path
