"""CSV and JSON writers shared by the CLI and the figure presets."""
from __future__ import annotations

import csv
import json
import math
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence, TextIO

import numpy as np


def format_value(value: Any) -> str:
    """Shortest round-trip text for floats; plain str for everything else."""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(
    stream: TextIO,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    metadata: Mapping[str, Any],
) -> None:
    for key, value in metadata.items():
        stream.write(f"# {key}: {format_value(value)}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(value) for value in row])


def read_csv(stream: TextIO) -> tuple:
    """Parse a file written by write_csv into (metadata, columns, rows of floats)."""
    metadata = {}
    lines = []
    for line in stream:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            metadata[key] = value
        else:
            lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader)
    rows = [[_parse(cell) for cell in row] for row in reader]
    return metadata, columns, rows


def _parse(cell: str) -> Any:
    try:
        return float(cell)
    except ValueError:
        return cell


def _jsonable(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Mapping):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _jsonable(value.real), "im": _jsonable(value.imag)}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_json(stream: TextIO, payload: Mapping[str, Any]) -> None:
    json.dump(_jsonable(payload), stream, indent=2, sort_keys=False)
    stream.write("\n")


__all__ = ["format_value", "read_csv", "write_csv", "write_json"]
