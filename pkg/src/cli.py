"""
Command-line driver for neutral-orbits.

Three subcommands:
- run <config.json>     run one experiment and write CSV/JSON artifacts
- plot <file.csv> <kind> render an artifact CSV as SVG
- preset <name>         print (or save) a shipped configuration

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import filecmp
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from typing import Any

from . import __version__
from .experiments import EXPERIMENTS, RunContext, as_checks
from .maps import IntervalMap, load_map, map_from_dict, map_hash
from .output_writer import OutputWriter, SchemaError
from .plotting import PLOT_KINDS, plot_csv
from .presets import PRESETS, preset
from .utils import Check, NumericError, cleanup_previous_runs, format_duration, stable_hash

log = logging.getLogger(__name__)

EXIT_OK: int = 0
EXIT_CHECK_FAILED: int = 1
EXIT_CONFIG_ERROR: int = 2
EXIT_NUMERIC_ERROR: int = 3

# Fields with a fixed meaning; everything else in a config is an experiment parameter.
_TOP_LEVEL: tuple[str, ...] = (
    "experiment", "map", "map_path", "seed", "output_dir", "workers", "verify_determinism", "preset",
)
# Fields that never change what an experiment computes.
_HASH_EXCLUDED: frozenset[str] = frozenset({"output_dir", "workers", "verify_determinism"})


# --- Custom Exceptions ---

class ConfigError(ValueError):
    """An experiment configuration is malformed or incomplete."""
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run, parsed from a JSON document."""

    experiment: str
    map: dict[str, Any] | None = None
    map_path: str | None = None
    seed: int | None = None
    output_dir: str = "runs"
    workers: int = 1
    params: dict[str, Any] = field(default_factory=dict)
    verify_determinism: bool = False
    preset: str | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: str | None = None) -> ExperimentConfig:
        """Validate ``data`` and build a config.

        Args:
            data: Parsed JSON document.
            base_dir: Directory that a relative ``map_path`` is resolved against.

        Raises:
            ConfigError: Unknown experiment, missing or ill-typed field.
        """
        if not isinstance(data, dict):
            raise ConfigError("a config must be a JSON object")
        tag = data.get("experiment")
        if tag is None:
            raise ConfigError("missing field 'experiment'")
        if tag not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {tag!r}; expected one of {', '.join(sorted(EXPERIMENTS))}")
        experiment = EXPERIMENTS[tag]

        seed = data.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
            raise ConfigError(f"field 'seed' must be a non-negative integer, got {seed!r}")
        workers = data.get("workers", 1)
        if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
            raise ConfigError(f"field 'workers' must be a positive integer, got {workers!r}")

        map_spec = data.get("map")
        map_path = data.get("map_path")
        if map_spec is not None and not isinstance(map_spec, dict):
            raise ConfigError("field 'map' must be a JSON object")
        if map_path is not None and base_dir is not None and not os.path.isabs(map_path):
            map_path = os.path.join(base_dir, map_path)
        if experiment.needs_map and map_spec is None and map_path is None:
            raise ConfigError(f"missing field 'map' (or 'map_path') for experiment {tag!r}")

        params = {k: v for k, v in data.items() if k not in _TOP_LEVEL}
        present = set(params) | ({"seed"} if seed is not None else set())
        for name in experiment.required:
            if name not in present:
                raise ConfigError(f"missing field {name!r} for experiment {tag!r}")
        for triggers, needed in experiment.conditional:
            if any(t in present for t in triggers):
                for name in needed:
                    if name not in present:
                        raise ConfigError(f"missing field {name!r} (required with {'/'.join(triggers)})")
        for group in experiment.any_of:
            if not any(name in present for name in group):
                raise ConfigError(f"missing field: one of {', '.join(repr(g) for g in group)} is required")

        return cls(
            experiment=tag,
            map=map_spec,
            map_path=map_path,
            seed=seed,
            output_dir=data.get("output_dir") or os.path.join("runs", data.get("preset") or tag),
            workers=workers,
            params=params,
            verify_determinism=bool(data.get("verify_determinism", False)),
            preset=data.get("preset"),
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"experiment": self.experiment, **self.params}
        for name in ("map", "map_path", "seed", "preset"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        out["output_dir"] = self.output_dir
        out["workers"] = self.workers
        if self.verify_determinism:
            out["verify_determinism"] = True
        return out

    @property
    def config_hash(self) -> str:
        """SHA-256 of the config without the fields that cannot change results."""
        return stable_hash({k: v for k, v in self.to_dict().items() if k not in _HASH_EXCLUDED})

    def build_map(self) -> IntervalMap | None:
        """Construct the map named by the config.

        Raises:
            ConfigError: The map file is missing or the specification is malformed.
        """
        if not EXPERIMENTS[self.experiment].needs_map:
            return None
        try:
            if self.map is not None:
                return map_from_dict(self.map)
            return load_map(self.map_path)
        except FileNotFoundError:
            raise ConfigError(f"map file not found: {self.map_path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"map file {self.map_path} is not valid JSON: {e}") from None
        except KeyError as e:
            raise ConfigError(f"map specification is missing field {e.args[0]!r}") from None


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a JSON config file.

    Raises:
        ConfigError: Missing file, invalid JSON or invalid content.
    """
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    return ExperimentConfig.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _execute(config: ExperimentConfig, output_dir: str) -> dict[str, Any]:
    """Run the experiment into ``output_dir`` and return the written report."""
    cleanup_previous_runs(output_dir)
    fmap = config.build_map()
    metadata = {"experiment": config.experiment, "config": config.config_hash[:16]}
    if config.seed is not None:
        metadata["seed"] = config.seed

    start = time.perf_counter()
    with OutputWriter(output_dir, metadata) as writer:
        ctx = RunContext(config.params, writer, fmap, config.seed, config.workers)
        log.info("Running %s (workers=%d) into %s", config.experiment, config.workers, output_dir)
        result = EXPERIMENTS[config.experiment].run(ctx)
        checks = as_checks(result["checks"])
        writer.report.update(
            config=config.to_dict(),
            config_hash=config.config_hash,
            map_hash=map_hash(fmap) if fmap is not None else None,
            seed=config.seed,
            statistics=result["statistics"],
            checks=[c.to_dict() for c in checks],
            passed=all(c.passed for c in checks),
            artifacts=sorted(os.path.relpath(p, output_dir) for p in writer.written),
        )
        report = writer.report
    log.info("%s finished in %s", config.experiment, format_duration(time.perf_counter() - start))
    return report


def _csv_files(directory: str) -> list[str]:
    found = []
    for root, _, files in os.walk(directory):
        found.extend(os.path.relpath(os.path.join(root, f), directory) for f in files if f.endswith(".csv"))
    return sorted(found)


def verify_determinism(config: ExperimentConfig) -> Check:
    """Rerun ``config`` with another worker count and compare every CSV byte for byte."""
    other = dataclasses.replace(config, workers=1 if config.workers != 1 else 2, verify_determinism=False)
    with tempfile.TemporaryDirectory(prefix="neutral-orbits-") as scratch:
        _execute(other, scratch)
        ours, theirs = _csv_files(config.output_dir), _csv_files(scratch)
        mismatched = sorted(set(ours) ^ set(theirs))
        for name in sorted(set(ours) & set(theirs)):
            if not filecmp.cmp(os.path.join(config.output_dir, name), os.path.join(scratch, name), shallow=False):
                mismatched.append(name)
    if mismatched:
        log.warning("CSV files differ between worker counts %d and %d: %s",
                    config.workers, other.workers, ", ".join(mismatched))
    return Check.at_most(f"byte_identical[workers={config.workers},{other.workers}]", len(mismatched), 0)


def _error_report(config: ExperimentConfig, error: Exception) -> None:
    with OutputWriter(config.output_dir) as writer:
        writer.report.update(
            config=config.to_dict(),
            config_hash=config.config_hash,
            seed=config.seed,
            error={"type": type(error).__name__, "message": str(error)},
            checks=[],
            passed=False,
        )


def run(config: ExperimentConfig) -> int:
    """Run an experiment and return the process exit code."""
    try:
        report = _execute(config, config.output_dir)
        if config.verify_determinism:
            check = verify_determinism(config)
            report["checks"].append(check.to_dict())
            report["passed"] = report["passed"] and check.passed
            OutputWriter(config.output_dir).write_report(report)
    except NumericError as e:
        log.error("Numeric failure in %s: %s", config.experiment, e)
        _error_report(config, e)
        print(f"Error: numeric failure: {e}")
        return EXIT_NUMERIC_ERROR
    except (ConfigError, ValueError, KeyError) as e:
        message = e.args[0] if isinstance(e, KeyError) and e.args else e
        log.error("Invalid configuration for %s: %s", config.experiment, message)
        print(f"Error: {message}")
        return EXIT_CONFIG_ERROR

    failed = [c for c in report["checks"] if not c["passed"]]
    print(f"\nReport saved to: {os.path.join(config.output_dir, 'report.json')}")
    for c in failed:
        print(f"  FAILED {c['name']}: value={c['value']!r} tolerance={c['tolerance']!r}")
    if failed:
        print(f"{len(failed)} of {len(report['checks'])} checks failed")
        return EXIT_CHECK_FAILED
    print(f"All {len(report['checks'])} checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot / preset
# ---------------------------------------------------------------------------

def plot(csv_path: str, kind: str, output: str | None = None) -> int:
    try:
        target = plot_csv(csv_path, kind, output)
    except (SchemaError, FileNotFoundError, ValueError) as e:
        log.error("Cannot plot %s: %s", csv_path, e)
        print(f"Error: {e}")
        return EXIT_CONFIG_ERROR
    print(f"Plot saved to: {target}")
    return EXIT_OK


def show_preset(name: str | None, output: str | None = None, list_all: bool = False) -> int:
    if list_all or name is None:
        for p in PRESETS.values():
            criterion = f"criterion {p.criterion}" if p.criterion is not None else "no criterion"
            suffix = ", long-running" if p.long_running else ""
            print(f"{p.name:34s} {criterion}{suffix}: {p.description}")
        return EXIT_OK
    try:
        config = preset(name)
    except KeyError as e:
        print(f"Error: {e.args[0]}")
        return EXIT_CONFIG_ERROR
    text = json.dumps(config, indent=2, sort_keys=True) + "\n"
    if output:
        with open(output, "w") as f:
            f.write(text)
        print(f"Preset saved to: {output}")
    else:
        print(text, end="")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neutral-orbits",
        description="Numerical experiments on interval maps with several neutral fixed points.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", nargs="?", help="path to a JSON config")
    p_run.add_argument("--preset", help="run a shipped preset instead of a config file")
    p_run.add_argument("--output-dir", help="override the config's output directory")
    p_run.add_argument("--workers", type=int, help="override the config's worker count")

    p_plot = sub.add_parser("plot", help="render an artifact CSV as SVG")
    p_plot.add_argument("csv", help="CSV written by a run")
    p_plot.add_argument("kind", choices=sorted(PLOT_KINDS), help="plot kind")
    p_plot.add_argument("-o", "--output", help="SVG path (default: next to the CSV)")

    p_preset = sub.add_parser("preset", help="print a shipped preset config")
    p_preset.add_argument("name", nargs="?", help="preset name")
    p_preset.add_argument("--list", action="store_true", help="list all presets")
    p_preset.add_argument("-o", "--output", help="write the config to this file")
    return parser


def _run_command(args: argparse.Namespace) -> int:
    if (args.config is None) == (args.preset is None):
        print("Error: give either a config file or --preset NAME")
        return EXIT_CONFIG_ERROR
    overrides: dict[str, Any] = {}
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if args.workers is not None:
        overrides["workers"] = args.workers
    try:
        if args.preset is not None:
            config = ExperimentConfig.from_dict({**preset(args.preset), **overrides})
        else:
            config = load_config(args.config)
            if overrides:
                config = ExperimentConfig.from_dict({**config.to_dict(), **overrides})
    except ConfigError as e:
        print(f"Error: {e}")
        return EXIT_CONFIG_ERROR
    except KeyError as e:
        print(f"Error: {e.args[0]}")
        return EXIT_CONFIG_ERROR
    return run(config)


def main(argv: list[str] | None = None) -> int:
    """Entry point of the ``neutral-orbits`` command."""
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
        stream=sys.stderr,
    )
    if args.command == "run":
        return _run_command(args)
    if args.command == "plot":
        return plot(args.csv, args.kind, args.output)
    return show_preset(args.name, args.output, args.list)


if __name__ == "__main__":
    sys.exit(main())
