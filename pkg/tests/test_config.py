import json

import pytest

from config import (
    DEFAULT_TOLERANCES,
    Config,
    config_hash,
    load_experiment_config,
    parse_experiment_config,
)
from errors import ConfigError
from spectral_law import Rademacher


def base_config(**overrides):
    raw = {
        "command": "rs",
        "model": {"beta": 0.3, "spectral": {"type": "discrete", "values": [0.0, 2.0]},
                  "field": {"type": "point_mass", "h": 0.2}},
    }
    raw.update(overrides)
    return raw


def test_parse_standardizes_the_law():
    experiment = parse_experiment_config(base_config())
    assert isinstance(experiment.model.spectral, Rademacher)
    assert experiment.model.beta == pytest.approx(0.3)
    assert experiment.shift == pytest.approx(1.0)
    assert experiment.tolerances == DEFAULT_TOLERANCES
    assert experiment.output_format == "json"


def test_unknown_key_is_reported_with_its_field():
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(base_config(tolerances={"rs_identiy": 1e-6}))
    assert info.value.field == "tolerances.rs_identiy"


def test_seed_is_mandatory_for_randomized_commands():
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(base_config(command="amp"))
    assert info.value.field == "seed"
    assert parse_experiment_config(base_config(command="amp", seed=3)).seed == 3


def test_beta_outside_domain_is_a_config_error():
    raw = base_config()
    raw["model"] = {"beta": 1.5, "spectral": {"type": "semicircle"}}
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(raw)
    assert info.value.field == "model.beta"


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "command": "rs",\n  "model": \n}\n')
    with pytest.raises(ConfigError) as info:
        load_experiment_config(str(path), Config())
    assert info.value.line == 4


def test_missing_file():
    with pytest.raises(ConfigError):
        load_experiment_config("/nonexistent/experiment.json", Config())


def test_overrides_replace_top_level_keys(tmp_path):
    path = tmp_path / "amp.json"
    path.write_text(json.dumps(base_config(command="amp")))
    experiment = load_experiment_config(str(path), Config(), overrides={"seed": 99})
    assert experiment.seed == 99


def test_config_hash_ignores_key_order():
    first = {"a": 1, "b": {"c": 2, "d": 3}}
    second = {"b": {"d": 3, "c": 2}, "a": 1}
    assert config_hash(first) == config_hash(second)
    assert config_hash(first) != config_hash({"a": 2, "b": {"c": 2, "d": 3}})


def test_settings_from_env(monkeypatch):
    monkeypatch.setenv("ORTHOGLASS_THREADS", "2")
    monkeypatch.setenv("ORTHOGLASS_SPECTRAL_NODES", "123")
    settings = Config.from_env()
    assert settings.threads == 2
    assert settings.spectral_nodes == 123
    experiment = parse_experiment_config(base_config(), settings.field_order, settings.spectral_nodes)
    assert experiment.model.spectral_nodes == 123
