"""
Config Loader - loading and validating experiment configuration files
"""

import os
import json
import logging
from typing import Any, Dict, Iterator, List, Tuple

import yaml
from jsonschema import Draft7Validator

from evaluation.core.schema import CONFIG_SCHEMA, DEFAULTS_SCHEMA
from rigidlab.catalog import CATALOG, FAMILY, GFQI_KIND, HAMILTONIAN, MAP
from rigidlab.errors import ConfigError, ParseError
from rigidlab.hamlang import Layout, parse_expression

logger = logging.getLogger(__name__)

# item keys holding references, with the catalog kind they must name
_FIELD_KEYS = ("f", "g", "h", "H", "K", "k", "perturbation")
_GFQI_KEYS = ("S", "S1", "S2")


def load_config(config_path: str) -> Dict[str, Any]:
    """
    Load configuration from YAML or JSON file

    Args:
        config_path: Path to configuration file

    Returns:
        Dict containing configuration

    Raises:
        ConfigError: If the file is missing, unreadable or not a mapping
    """
    if not os.path.exists(config_path):
        raise ConfigError(f"Configuration file not found: {config_path}")

    file_ext = os.path.splitext(config_path)[1].lower()

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            if file_ext in [".yaml", ".yml"]:
                config = yaml.safe_load(f)
            elif file_ext == ".json":
                config = json.load(f)
            else:
                raise ConfigError(f"Unsupported configuration file format: {file_ext}")
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot parse {config_path}: {e}") from e

    if config is None:
        config = {}
    if not isinstance(config, dict):
        raise ConfigError(f"{config_path}: top level must be a mapping")
    logger.debug(f"Loaded configuration from {config_path}")
    return config


def schema_violations(config: Dict[str, Any], schema: Dict[str, Any]) -> List[str]:
    """Every schema violation as ``path: message``, in a stable order."""
    validator = Draft7Validator(schema)
    errors = sorted(
        validator.iter_errors(config),
        key=lambda e: ([str(p) for p in e.absolute_path], e.message),
    )
    out = []
    for error in errors:
        path = "/".join(str(p) for p in error.absolute_path) or "<root>"
        out.append(f"{path}: {error.message}")
    return out


def _references(config: Dict[str, Any]) -> Iterator[Tuple[str, str, Any]]:
    """(path, expected catalog kind, reference) for every reference in the items."""
    for index, item in enumerate(config.get("items", [])):
        if not isinstance(item, dict):
            continue
        for key in _FIELD_KEYS:
            if key in item:
                yield f"items/{index}/{key}", HAMILTONIAN, item[key]
        for key in _GFQI_KEYS:
            if key in item:
                yield f"items/{index}/{key}", GFQI_KIND, item[key]
        family = item.get("family", []) if config.get("kind") == "gamma" else []
        for j, ref in enumerate(family):
            yield f"items/{index}/family/{j}", GFQI_KIND, ref
        if config.get("kind") == "rigidity":
            if "family" in item:
                yield f"items/{index}/family", FAMILY, item["family"]
            if "map" in item:
                yield f"items/{index}/map", MAP, item["map"]


def _expression_problem(kind: str, ref: Dict[str, Any]) -> str:
    try:
        if kind == HAMILTONIAN:
            parse_expression(ref["expression"], (ref.get("d", 1), 0), Layout.PHASE)
        elif kind == GFQI_KIND and "expression" in ref:
            parse_expression(
                ref["expression"], (ref.get("n", 1), ref.get("k", 0)), Layout.GENERATING
            )
        elif kind == MAP:
            d = len(ref["sources"]) // 2
            for source in ref["sources"]:
                parse_expression(source, (max(d, 1), 0), Layout.PHASE)
    except ParseError as e:
        return str(e)
    return ""


def reference_violations(config: Dict[str, Any]) -> List[str]:
    """Unknown catalog names, catalog names of the wrong kind, unparsable expressions."""
    out = []
    for path, kind, ref in _references(config):
        if isinstance(ref, str):
            entry = CATALOG.get(ref)
            if entry is None:
                out.append(f"{path}: unknown catalog entry {ref!r}")
            elif entry.kind != kind:
                out.append(
                    f"{path}: catalog entry {ref!r} is a {entry.kind}, "
                    f"expected a {kind}"
                )
        elif isinstance(ref, dict):
            problem = _expression_problem(kind, ref)
            if problem:
                out.append(f"{path}: {problem}")
            if kind == GFQI_KIND and ref.get("k", 0) > 0 and "expression" in ref:
                missing = [key for key in ("Q", "cutoff") if key not in ref]
                if missing:
                    out.append(
                        f"{path}: fibered generating functions need "
                        f"{', '.join(missing)}"
                    )
    return out


def load_experiment(config_path: str) -> Dict[str, Any]:
    """
    Load and validate an experiment configuration.

    Raises:
        ConfigError: listing every violation found
    """
    config = load_config(config_path)
    violations = schema_violations(config, CONFIG_SCHEMA)
    if not violations:
        violations = reference_violations(config)
    if violations:
        raise ConfigError(f"invalid experiment config {config_path}", violations)
    return config


def load_defaults(config_path: str) -> Dict[str, Any]:
    """Run defaults (output and log directories, workers, numerical overrides)."""
    if not os.path.exists(config_path):
        logger.debug(f"No defaults at {config_path}")
        return {}
    config = load_config(config_path)
    violations = schema_violations(config, DEFAULTS_SCHEMA)
    if violations:
        raise ConfigError(f"invalid defaults {config_path}", violations)
    return config
