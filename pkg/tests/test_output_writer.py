import json
import os

import pytest

from src.config import CSV_SCHEMA_VERSION, REPORT_FILE
from src.output_writer import OutputWriter, SchemaError, read_csv
from src.utils import cleanup_previous_runs


def _write(path, text):
    with open(path, "w") as f:
        f.write(text)
    return str(path)


def test_csv_round_trip(tmp_path):
    with OutputWriter(str(tmp_path), {"experiment": "cells", "seed": 3}) as writer:
        path = writer.write_csv("decay", [[10, 0.25], [100, 1.0 / 3.0]], fit_min=10)
    with open(path) as f:
        magic = f.readline()
    assert magic.startswith("# neutral-orbits schema=decay version=1")
    assert "seed=3" in magic and "fit_min=10" in magic

    table = read_csv(path)
    assert table.schema == "decay"
    assert table.version == CSV_SCHEMA_VERSION
    assert table.meta["experiment"] == "cells"
    assert table.header == ["n", "value"]
    assert table.column("value").tolist() == [0.25, 1.0 / 3.0]


def test_floats_are_written_exactly(tmp_path):
    with OutputWriter(str(tmp_path)) as writer:
        path = writer.write_csv("decay", [[1, 0.1 + 0.2]])
    assert read_csv(path).rows[0][1] == repr(0.1 + 0.2)


def test_unknown_schema_on_write(tmp_path):
    with OutputWriter(str(tmp_path)) as writer:
        with pytest.raises(SchemaError):
            writer.write_csv("spectra", [])
        with pytest.raises(SchemaError, match="explicit columns"):
            writer.write_csv("samples", [[0.5, 0.5]])
        path = writer.write_csv("samples", [[0.5, 0.5]], ["Z1", "Z2"])
    assert read_csv(path).header == ["Z1", "Z2"]


@pytest.mark.parametrize("text, message", [
    ("", "empty"),
    ("n,value\n1,2\n", "metadata"),
    ("# neutral-orbits schema=spectra version=1\nn,value\n", "unknown schema"),
    ("# neutral-orbits schema=decay version=7\nn,value\n", "version 7"),
    ("# neutral-orbits schema=decay\nn,value\n", "version"),
    ("# neutral-orbits schema=decay version=1\nk,value\n", "header"),
    ("# neutral-orbits schema=decay version=1\n", "header row"),
])
def test_read_csv_rejects_malformed_files(tmp_path, text, message):
    path = _write(tmp_path / "bad.csv", text)
    with pytest.raises(SchemaError, match=message):
        read_csv(path)


def test_report_written_only_on_clean_exit(tmp_path):
    with OutputWriter(str(tmp_path / "ok")) as writer:
        writer.report.update(passed=True, value=1.5)
    with open(tmp_path / "ok" / REPORT_FILE) as f:
        assert json.load(f) == {"passed": True, "value": 1.5}

    with pytest.raises(RuntimeError):
        with OutputWriter(str(tmp_path / "failed")) as writer:
            writer.report.update(passed=True)
            raise RuntimeError("boom")
    assert not os.path.exists(tmp_path / "failed" / REPORT_FILE)


def test_svg_goes_to_plots(tmp_path):
    with OutputWriter(str(tmp_path)) as writer:
        path = writer.write_svg("tails.svg", "<svg/>")
    assert path == os.path.join(str(tmp_path), "plots", "tails.svg")


def test_cleanup_keeps_foreign_files(tmp_path):
    for name in ("occupation.csv", REPORT_FILE, "map.json"):
        _write(tmp_path / name, "x")
    os.makedirs(tmp_path / "plots")
    _write(tmp_path / "plots" / "a.svg", "x")
    cleanup_previous_runs(str(tmp_path))
    assert sorted(os.listdir(tmp_path)) == ["map.json"]
    cleanup_previous_runs(str(tmp_path / "missing"))
