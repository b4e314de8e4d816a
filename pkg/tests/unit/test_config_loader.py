"""
实验配置加载测试
"""

import json
import os

import pytest

from evaluation.core.utils.config_loader import (
    load_config,
    load_defaults,
    load_experiment,
    reference_violations,
)
from rigidlab.errors import ConfigError

EXPERIMENTS_DIR = os.path.join(
    os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))),
    "config",
    "experiments",
)


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


@pytest.mark.parametrize("name", sorted(os.listdir(EXPERIMENTS_DIR)))
def test_shipped_experiments_validate(name):
    config = load_experiment(os.path.join(EXPERIMENTS_DIR, name))
    assert config["name"] == os.path.splitext(name)[0]
    assert config["items"]


@pytest.mark.parametrize(
    "name",
    [
        "bracket_smoke.json",
        "minmax_smoke.yaml",
        "assertion_failure.json",
        "runtime_failure.json",
    ],
)
def test_fixture_configs_validate(configs_path, name):
    assert load_experiment(os.path.join(configs_path, name))["items"]


def test_unknown_top_level_key(configs_path):
    with pytest.raises(ConfigError) as excinfo:
        load_experiment(os.path.join(configs_path, "unknown_key.json"))
    assert any("integratr" in v for v in excinfo.value.violations)
    assert "integratr" in str(excinfo.value)


def test_catalog_references(tmp_path):
    config = {
        "name": "refs",
        "kind": "minmax",
        "items": [{"S": "nope"}, {"S": "harmonic"}, {"S": "cos_gfqi"}],
    }
    violations = reference_violations(config)
    assert violations == [
        "items/0/S: unknown catalog entry 'nope'",
        "items/1/S: catalog entry 'harmonic' is a hamiltonian, expected a gfqi",
    ]
    with pytest.raises(ConfigError):
        load_experiment(_write(tmp_path, "refs.json", config))


def test_inline_expressions_are_parsed(tmp_path):
    config = {
        "name": "inline",
        "kind": "bracket",
        "seed": 0,
        "items": [{"f": {"expression": "q1 +"}, "g": "harmonic"}],
    }
    violations = reference_violations(config)
    assert len(violations) == 1
    assert violations[0].startswith("items/0/f: unexpected token")


def test_non_ascii_expression_is_a_config_error(tmp_path):
    """非 ASCII 字符属于配置错误, 而不是运行时错误"""
    config = {
        "name": "unicode",
        "kind": "bracket",
        "seed": 0,
        "items": [{"f": {"expression": "q1²"}, "g": "harmonic"}],
    }
    assert reference_violations(config)[0].startswith(
        "items/0/f: unexpected character '²'"
    )
    with pytest.raises(ConfigError, match="unexpected character"):
        load_experiment(_write(tmp_path, "unicode.json", config))


def test_fibered_inline_needs_form():
    config = {
        "name": "fibered",
        "kind": "minmax",
        "items": [{"S": {"expression": "xi1^2", "k": 1}}],
    }
    assert reference_violations(config) == [
        "items/0/S: fibered generating functions need Q, cutoff"
    ]


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "missing.json"))
    text = tmp_path / "config.txt"
    text.write_text("name: x", encoding="utf-8")
    with pytest.raises(ConfigError, match="Unsupported"):
        load_config(str(text))
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(str(listing))
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError, match="Cannot parse"):
        load_config(str(broken))


def test_defaults(tmp_path, configs_path):
    assert load_defaults(str(tmp_path / "absent.yaml")) == {}
    defaults = load_defaults(os.path.join(configs_path, "defaults.yaml"))
    assert defaults["integrator"]["dt"] == 0.001
    assert defaults["workers"] is None
    bad = tmp_path / "bad.yaml"
    bad.write_text("workers: 0\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid defaults"):
        load_defaults(str(bad))
