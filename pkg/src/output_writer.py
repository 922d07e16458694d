"""
Artifact writing for neutral-orbits.

This module handles the files a run leaves in its output directory:
- <schema>.csv: versioned CSV tables (metadata comment line, header row, data)
- report.json: echoed inputs, statistics and pass/fail checks
- plots/*.svg: rendered figures
"""

from __future__ import annotations

import io
import json
import os
from collections.abc import Iterable
from dataclasses import dataclass, field
from types import TracebackType
from typing import Any

import numpy as np

from .config import CSV_SCHEMA_VERSION, CSV_SCHEMAS, REPORT_FILE
from .utils import format_float

CSV_MAGIC: str = "# neutral-orbits"


# --- Custom Exceptions ---

class SchemaError(ValueError):
    """A CSV file is empty, unknown, or written with an unsupported schema version."""
    pass


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialise {type(obj).__name__} to JSON")


class OutputWriter:
    """Writes the artifacts of one run into an output directory.

    Use as a context manager; the report is written on a clean exit::

        with OutputWriter("runs/occupation", metadata) as writer:
            writer.write_csv("occupation", rows, columns)
            writer.report.update(stats)
    """

    def __init__(self, output_dir: str, metadata: dict[str, Any] | None = None) -> None:
        self.output_dir = output_dir
        self.metadata = dict(metadata or {})
        self.report: dict[str, Any] = {}
        self.written: list[str] = []
        self._open_files: list[io.TextIOWrapper] = []

    def __enter__(self) -> OutputWriter:
        os.makedirs(self.output_dir, exist_ok=True)
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: TracebackType | None,
    ) -> None:
        """Close any open files and write the report if the run finished."""
        for handle in self._open_files:
            handle.close()
        self._open_files.clear()
        if exc_type is None and self.report:
            self.write_report(self.report)

    def path(self, filename: str) -> str:
        return os.path.join(self.output_dir, filename)

    def write_csv(
        self,
        schema: str,
        rows: Iterable[Iterable[Any]],
        columns: list[str] | None = None,
        filename: str | None = None,
        **meta: Any,
    ) -> str:
        """Write a versioned CSV table.

        Args:
            schema: Name in ``CSV_SCHEMAS``.
            rows: Data rows; floats are written with ``repr`` so reruns are byte-identical.
            columns: Header; defaults to the schema's fixed columns.
            filename: Defaults to ``<schema>.csv``.
            **meta: Extra ``key=value`` pairs for the metadata line (run metadata is added).

        Returns:
            Path of the written file.
        """
        if schema not in CSV_SCHEMAS:
            raise SchemaError(f"unknown CSV schema {schema!r}")
        header = columns if columns is not None else CSV_SCHEMAS[schema]
        if not header:
            raise SchemaError(f"schema {schema!r} needs explicit columns")
        target = self.path(filename or f"{schema}.csv")
        os.makedirs(os.path.dirname(target), exist_ok=True)
        pairs = {**self.metadata, **meta}
        meta_text = " ".join(f"{k}={_cell(v)}" for k, v in pairs.items())
        with open(target, "w", newline="\n") as handle:
            handle.write(f"{CSV_MAGIC} schema={schema} version={CSV_SCHEMA_VERSION} {meta_text}".rstrip() + "\n")
            handle.write(",".join(header) + "\n")
            for row in rows:
                handle.write(",".join(_cell(v) for v in row) + "\n")
        self.written.append(target)
        return target

    def write_report(self, report: dict[str, Any]) -> str:
        target = self.path(REPORT_FILE)
        with open(target, "w") as handle:
            json.dump(report, handle, indent=2, sort_keys=True, default=_json_default)
            handle.write("\n")
        if target not in self.written:
            self.written.append(target)
        return target

    def write_svg(self, filename: str, svg: str) -> str:
        target = self.path(os.path.join("plots", filename))
        os.makedirs(os.path.dirname(target), exist_ok=True)
        with open(target, "w") as handle:
            handle.write(svg)
        self.written.append(target)
        return target


@dataclass
class CsvTable:
    """A parsed artifact CSV."""

    schema: str
    version: int
    meta: dict[str, str]
    header: list[str]
    rows: list[list[str]] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = self.header.index(name)
        return np.array([float(r[i]) for r in self.rows])

    def text_column(self, name: str) -> list[str]:
        i = self.header.index(name)
        return [r[i] for r in self.rows]


def read_csv(path: str) -> CsvTable:
    """Parse a CSV written by :class:`OutputWriter`.

    Raises:
        SchemaError: Empty file, missing metadata line, unknown schema or version.
    """
    with open(path) as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    if not lines:
        raise SchemaError(f"{path} is empty")
    if not lines[0].startswith(CSV_MAGIC):
        raise SchemaError(f"{path} has no neutral-orbits metadata line")
    meta = dict(item.split("=", 1) for item in lines[0][len(CSV_MAGIC):].split() if "=" in item)
    schema = meta.pop("schema", "")
    if schema not in CSV_SCHEMAS:
        raise SchemaError(f"{path}: unknown schema {schema!r}")
    try:
        version = int(meta.pop("version", ""))
    except ValueError:
        raise SchemaError(f"{path}: missing schema version") from None
    if version != CSV_SCHEMA_VERSION:
        raise SchemaError(f"{path}: schema version {version} is not supported (expected {CSV_SCHEMA_VERSION})")
    if len(lines) < 2:
        raise SchemaError(f"{path} has no header row")
    header = lines[1].split(",")
    expected = CSV_SCHEMAS[schema]
    if header[: len(expected)] != expected:
        raise SchemaError(f"{path}: header {header} does not match schema {schema!r}")
    rows = [line.split(",") for line in lines[2:]]
    return CsvTable(schema, version, meta, header, rows)
