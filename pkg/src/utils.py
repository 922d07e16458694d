"""
Utility functions for neutral-orbits.

This module contains helper functions for:
- Duration formatting for progress logs
- Stable hashing of map specifications and configs
- Output-directory cleanup between runs
- The numeric-failure exception base class and the report `Check` record
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
from dataclasses import dataclass
from typing import Any

from .config import REPORT_FILE


# --- Custom Exceptions ---

class NumericError(RuntimeError):
    """A numerical procedure failed or produced flagged output."""
    pass


@dataclass
class Check:
    """One pass/fail comparison recorded in a report."""

    name: str
    value: float
    tolerance: float
    passed: bool
    expected: float | None = None

    @classmethod
    def within(cls, name: str, value: float, expected: float, tolerance: float) -> Check:
        """``|value - expected| <= tolerance``."""
        value = float(value)
        return cls(name, value, tolerance, bool(abs(value - expected) <= tolerance), float(expected))

    @classmethod
    def relative(cls, name: str, value: float, expected: float, tolerance: float) -> Check:
        """``|value / expected - 1| <= tolerance``."""
        value = float(value)
        ok = expected != 0.0 and abs(value / expected - 1.0) <= tolerance
        return cls(name, value, tolerance, bool(ok), float(expected))

    @classmethod
    def at_most(cls, name: str, value: float, limit: float) -> Check:
        value = float(value)
        return cls(name, value, limit, bool(value <= limit))

    @classmethod
    def at_least(cls, name: str, value: float, limit: float) -> Check:
        value = float(value)
        return cls(name, value, limit, bool(value >= limit))

    def to_dict(self) -> dict[str, Any]:
        out = {"name": self.name, "value": self.value, "tolerance": self.tolerance, "passed": self.passed}
        if self.expected is not None:
            out["expected"] = self.expected
        return out


def format_duration(seconds: float) -> str:
    """Elapsed wall time as ``H:MM:SS.s``, or ``S.ss s`` under a minute."""
    if seconds < 60.0:
        return f"{seconds:.2f} s"
    minutes, secs = divmod(seconds, 60.0)
    hours, minutes = divmod(int(minutes), 60)
    return f"{hours}:{minutes:02d}:{secs:04.1f}"


def canonical_json(obj: Any) -> str:
    """Serialise ``obj`` to JSON with sorted keys and no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def stable_hash(obj: Any) -> str:
    """SHA-256 hex digest of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def format_float(value: float) -> str:
    """Shortest round-tripping text for a float (used in CSV rows)."""
    return repr(float(value))


_OUTPUT_SUFFIXES: tuple[str, ...] = (".csv", ".svg")


def cleanup_previous_runs(output_dir: str) -> None:
    """Remove artifacts of a previous run from ``output_dir``.

    Removes CSV and SVG files, the JSON report and a stale ``plots/``
    subdirectory.  Other files (for example a map specification kept next to
    the outputs) are left alone.
    """
    if not os.path.isdir(output_dir):
        return

    plots_dir = os.path.join(output_dir, "plots")
    if os.path.isdir(plots_dir):
        shutil.rmtree(plots_dir)

    for filename in os.listdir(output_dir):
        path = os.path.join(output_dir, filename)
        if not os.path.isfile(path):
            continue
        if filename.endswith(_OUTPUT_SUFFIXES) or filename == REPORT_FILE:
            os.remove(path)
