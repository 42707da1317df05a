from __future__ import annotations
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union
import csv
import hashlib
import io
import json
import math

import numpy as np

from .classes import JsonDict, OutputFormat
from .grid_function import GridFunction
from .other_constants import VERSION


def _plain(value: Any) -> Any:
    """
    Converts numpy scalars and arrays to JSON types. Non-finite floats become strings.
    """
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, complex):
        return [_plain(value.real), _plain(value.imag)]
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value

def dumpJson(data: Any) -> str:
    """
    Canonical JSON: sorted keys, two-space indent, trailing newline
    """
    return json.dumps(_plain(data), indent=2, sort_keys=True) + "\n"

def configHash(config: JsonDict) -> str:
    """
    sha256 of the canonical JSON of a configuration, for provenance
    """
    canonical = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def buildReport(
    command: str,
    config: JsonDict,
    result: JsonDict,
    passed: bool,
    settings: Optional[JsonDict] = None,
) -> JsonDict:
    """
    The envelope every cli report shares. It contains no timestamps,
    so identical inputs give byte-identical output.
    """
    return {
        "command": command,
        "version": VERSION,
        "config_hash": configHash(config),
        "numerics": settings,
        "passed": passed,
        "result": result,
    }


def rowsToCsv(rows: Sequence[JsonDict]) -> str:
    """
    A table with the union of the row keys as columns, in order of first appearance
    """
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csvCell(v) for k, v in row.items()})
    return out.getvalue()

def _csvCell(value: Any) -> Any:
    value = _plain(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return json.dumps(value)
    return value

def flattenReport(report: JsonDict, prefix: str = "") -> Dict[str, Any]:
    """
    One row of dotted keys out of a nested report, for csv output
    """
    row: Dict[str, Any] = {}
    for key, value in report.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            row.update(flattenReport(value, f"{name}."))
        else:
            row[name] = value
    return row


def emit(
    text: str,
    out: Optional[Union[str, Path]] = None,
) -> None:
    """
    Writes to the given path, or to stdout
    """
    if out is None:
        print(text, end="")
        return
    path = Path(out)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")

def render(report: JsonDict, rows: Optional[Sequence[JsonDict]], outputFormat: OutputFormat) -> str:
    if outputFormat == OutputFormat.JSON:
        return dumpJson(report)
    if rows is None:
        rows = [flattenReport(report)]
    return rowsToCsv(rows)

def writeTrajectories(trajectories: Dict[str, GridFunction], out: Union[str, Path]) -> List[Path]:
    """
    One csv per trajectory, next to the report: <stem>.<name>.csv
    """
    base = Path(out)
    written = []
    for name, function in sorted(trajectories.items()):
        path = base.with_name(f"{base.stem}.{name}.csv")
        path.write_text(function.toCsv(), encoding="utf-8")
        written.append(path)
    return written
