import json
import os

import pytest

from src.cli import EXIT_CONFIG_ERROR, EXIT_OK, ConfigError, ExperimentConfig, load_config, main
from src.presets import PRESETS, SYMMETRIC_HALF, covered_criteria, preset


def _config_file(tmp_path, config, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


def _report(directory):
    with open(os.path.join(directory, "report.json")) as f:
        return json.load(f)


def test_missing_seed_is_a_config_error(tmp_path, capsys):
    path = _config_file(tmp_path, {"experiment": "occupation", "map": SYMMETRIC_HALF, "N": 10, "n": 10})
    assert main(["run", path]) == EXIT_CONFIG_ERROR
    assert "seed" in capsys.readouterr().out


@pytest.mark.parametrize("config, message", [
    ({"map": SYMMETRIC_HALF}, "experiment"),
    ({"experiment": "fourier"}, "unknown experiment"),
    ({"experiment": "validate"}, "map"),
    ({"experiment": "validate", "map": SYMMETRIC_HALF, "workers": 0}, "workers"),
    ({"experiment": "density", "map": SYMMETRIC_HALF, "seed": -1}, "seed"),
    ({"experiment": "weights", "map": SYMMETRIC_HALF, "N": 100, "n": 10}, "seed"),
    ({"experiment": "coverage", "map": SYMMETRIC_HALF, "n_max": 10**6, "delta": 0.1}, "x0"),
])
def test_config_validation(config, message):
    with pytest.raises(ConfigError, match=message):
        ExperimentConfig.from_dict(config)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "absent.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(broken))


def test_relative_map_path_resolves_next_to_the_config(tmp_path):
    (tmp_path / "map.json").write_text(json.dumps(SYMMETRIC_HALF))
    config = load_config(_config_file(tmp_path, {"experiment": "validate", "map_path": "map.json"}))
    assert config.map_path == str(tmp_path / "map.json")
    assert config.build_map().d == 2


def test_config_hash_ignores_execution_fields():
    base = {"experiment": "occupation", "map": SYMMETRIC_HALF, "N": 10, "n": 10, "seed": 1}
    one = ExperimentConfig.from_dict({**base, "workers": 1, "output_dir": "a"})
    two = ExperimentConfig.from_dict({**base, "workers": 4, "output_dir": "b", "verify_determinism": True})
    other_seed = ExperimentConfig.from_dict({**base, "seed": 2})
    assert one.config_hash == two.config_hash
    assert one.config_hash != other_seed.config_hash


def test_plot_of_an_empty_csv_fails(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot", str(empty), "histogram"]) == EXIT_CONFIG_ERROR


def test_preset_commands(tmp_path, capsys):
    assert main(["preset", "--list"]) == EXIT_OK
    assert "lamperti-reduction" in capsys.readouterr().out
    assert main(["preset", "no-such-preset"]) == EXIT_CONFIG_ERROR
    assert main(["run", "--preset", "no-such-preset"]) == EXIT_CONFIG_ERROR
    assert main(["run"]) == EXIT_CONFIG_ERROR

    target = str(tmp_path / "preset.json")
    assert main(["preset", "lamperti-reduction", "-o", target]) == EXIT_OK
    with open(target) as f:
        assert json.load(f) == preset("lamperti-reduction")


def test_presets_cover_every_criterion():
    assert covered_criteria() == set(range(1, 12))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_are_valid_configs(name):
    config = ExperimentConfig.from_dict(preset(name))
    assert config.preset == name
    fmap = config.build_map()
    if config.map is not None:
        assert fmap is not None and fmap.d >= 2


def test_validate_run_writes_a_passing_report(tmp_path):
    out = str(tmp_path / "validate")
    path = _config_file(tmp_path, {"experiment": "validate", "map": SYMMETRIC_HALF, "output_dir": out})
    assert main(["run", path]) == EXIT_OK
    report = _report(out)
    assert report["passed"]
    assert report["config"]["experiment"] == "validate"
    assert report["map_hash"]
    assert "runtime" not in json.dumps(report)


def test_output_dir_override(tmp_path):
    path = _config_file(tmp_path, {"experiment": "series", "alpha": 0.5, "n": 1000, "output_dir": "unused"})
    out = str(tmp_path / "override")
    main(["run", path, "--output-dir", out])
    assert _report(out)["config"]["output_dir"] == out


@pytest.mark.slow
def test_occupation_output_is_independent_of_workers(tmp_path):
    out = str(tmp_path / "occupation")
    path = _config_file(tmp_path, {
        "experiment": "occupation",
        "map": SYMMETRIC_HALF,
        "N": 1100,
        "n": 200,
        "seed": 4,
        "p_bar": [0.5, 0.5],
        "workers": 2,
        "verify_determinism": True,
        "output_dir": out,
    })
    main(["run", path])
    report = _report(out)
    byte_checks = [c for c in report["checks"] if c["name"].startswith("byte_identical")]
    assert len(byte_checks) == 1
    assert byte_checks[0]["passed"]
    assert os.path.exists(os.path.join(out, "occupation.csv"))


def test_empirical_run_counts_only_monotone_orbits(tmp_path):
    out = str(tmp_path / "empirical")
    path = _config_file(tmp_path, {
        "experiment": "empirical",
        "map": SYMMETRIC_HALF,
        "seed": 3,
        "n_list": [200, 1_000, 2_000],
        "orbits": 4,
        "output_dir": out,
    })
    main(["run", path])
    statistics = _report(out)["statistics"]
    traces = statistics["w1_min"]
    assert len(traces) == 4
    monotone = [all(b <= a for a, b in zip(t, t[1:])) for t in traces]
    assert statistics["decreasing_orbits"] == sum(monotone)
    check, = [c for c in _report(out)["checks"] if c["name"] == "majority_decreasing"]
    assert check["passed"] == (sum(monotone) >= 2.5)
