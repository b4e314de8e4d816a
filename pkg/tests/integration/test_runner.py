"""
命令行运行器集成测试
"""

import json
import os

import pytest
from jsonschema import Draft7Validator

from evaluation.core.schema import SUMMARY_SCHEMA
from evaluation.main import (
    EXIT_ASSERTION_FAILURE,
    EXIT_CONFIG_ERROR,
    EXIT_PASS,
    EXIT_RUNTIME_ERROR,
    main,
)
from rigidlab.catalog import CATALOG


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    # log files go to ./logs
    monkeypatch.chdir(tmp_path)


def _run(configs_path, name, output_dir, *extra):
    argv = [
        "run",
        os.path.join(configs_path, name),
        "--defaults",
        os.path.join(configs_path, "defaults.yaml"),
        "--output-dir",
        str(output_dir),
        *extra,
    ]
    return main(argv)


def test_catalog_command(capsys):
    assert main(["catalog"]) == EXIT_PASS
    out = capsys.readouterr().out
    assert len(out.strip().splitlines()) == len(CATALOG)


def test_schema_command(capsys):
    assert main(["schema"]) == EXIT_PASS
    schema = json.loads(capsys.readouterr().out)
    assert schema["$schema"].startswith("http://json-schema.org/draft-07")
    assert main(["schema", "--summary"]) == EXIT_PASS
    assert json.loads(capsys.readouterr().out) == SUMMARY_SCHEMA


def test_passing_run_writes_the_report(configs_path, tmp_path):
    out = tmp_path / "out"
    assert _run(configs_path, "minmax_smoke.yaml", out) == EXIT_PASS
    text = (out / "minmax_smoke.summary.json").read_text(encoding="utf-8")
    summary = json.loads(text)
    assert not list(Draft7Validator(SUMMARY_SCHEMA).iter_errors(summary))
    assert summary["status"] == "pass"
    assert summary["artifacts"] == ["minmax_smoke.cos_a1.diagram.csv"]
    assert (out / "minmax_smoke.cos_a1.diagram.csv").exists()
    assert (out / "minmax_smoke.csv").read_text().startswith("item,")
    timing = json.loads((out / "minmax_smoke.timing.json").read_text(encoding="utf-8"))
    assert set(timing["items"]) == {"cos_a1"}


def test_worker_count_does_not_change_the_results(configs_path, tmp_path):
    """并行与串行运行结果逐字节一致"""
    one, two = tmp_path / "one", tmp_path / "two"
    assert _run(configs_path, "bracket_smoke.json", one, "--workers", "1") == EXIT_PASS
    assert _run(configs_path, "bracket_smoke.json", two, "--workers", "2") == EXIT_PASS
    for suffix in ("csv", "summary.json"):
        name = f"bracket_smoke.{suffix}"
        assert (one / name).read_bytes() == (two / name).read_bytes()


def test_assertion_failure_exit_code(configs_path, tmp_path):
    out = tmp_path / "out"
    assert _run(configs_path, "assertion_failure.json", out) == EXIT_ASSERTION_FAILURE
    summary = json.loads((out / "assertion_failure.summary.json").read_text("utf-8"))
    assert summary["status"] == "fail"
    failed = [a["name"] for a in summary["assertions"] if not a["passed"]]
    assert failed == ["bracket against oracle"]


def test_config_error_exit_code(configs_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert _run(configs_path, "unknown_key.json", out) == EXIT_CONFIG_ERROR
    assert "integratr" in capsys.readouterr().err
    assert not (out / "unknown_key.csv").exists()
    missing = main(["run", str(tmp_path / "missing.json"), "--output-dir", str(out)])
    assert missing == EXIT_CONFIG_ERROR


def test_runtime_error_exit_code(configs_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert _run(configs_path, "runtime_failure.json", out) == EXIT_RUNTIME_ERROR
    err = capsys.readouterr().err
    assert "runtime_failure[tiny_box]" in err
    assert "rigidlab.minmax" in err
