"""
Published JSON schemas: experiment configurations and run summaries.
"""

from typing import Any, Dict

KINDS = [
    "bracket",
    "flow",
    "minmax",
    "gamma",
    "weakfield",
    "c0commute",
    "rigidity",
    "property-suite",
]

# kinds that draw random numbers and therefore need a seed
SAMPLING_KINDS = ["bracket", "weakfield", "rigidity", "property-suite"]

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2}
_MATRIX = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "items": {"type": "number"}, "minItems": 1},
}

DEFINITIONS: Dict[str, Any] = {
    "interval": {
        "type": "array",
        "items": {"type": "number"},
        "minItems": 2,
        "maxItems": 2,
    },
    "field_ref": {
        "type": ["string", "object"],
        "minLength": 1,
        "properties": {
            "expression": {"type": "string", "minLength": 1},
            "d": {"type": "integer", "minimum": 1},
            "regularity": {"enum": ["c11"]},
            "support": {"$ref": "#/definitions/interval"},
            "cylinder": {"type": "boolean"},
            "name": {"type": "string"},
        },
        "required": ["expression"],
        "additionalProperties": False,
    },
    "gfqi_ref": {
        "type": ["string", "object"],
        "minLength": 1,
        "properties": {
            "expression": {"type": "string", "minLength": 1},
            "grid_file": {"type": "string", "minLength": 1},
            "n": {"enum": [1, 2]},
            "k": {"type": "integer", "minimum": 0},
            "Q": _MATRIX,
            "cutoff": _POSITIVE,
            "stabilize": _MATRIX,
            "name": {"type": "string"},
        },
        "anyOf": [{"required": ["expression"]}, {"required": ["grid_file"]}],
        "additionalProperties": False,
    },
    "map_ref": {
        "type": ["string", "object"],
        "minLength": 1,
        "properties": {
            "sources": {
                "type": "array",
                "items": {"type": "string", "minLength": 1},
                "minItems": 2,
            },
            "name": {"type": "string"},
        },
        "required": ["sources"],
        "additionalProperties": False,
    },
    "move": {
        "type": "object",
        "properties": {
            "add_constant": {"type": "number"},
            "stabilize": _MATRIX,
            "fiber_shift": {
                "type": "object",
                "properties": {
                    "vector": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                    "radius": _POSITIVE,
                },
                "required": ["vector", "radius"],
                "additionalProperties": False,
            },
        },
        "minProperties": 1,
        "maxProperties": 1,
        "additionalProperties": False,
    },
}

_LABEL = {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"}
_RESOLUTION = {"type": "integer", "minimum": 8}


def _item(properties: Dict[str, Any], required=(), rules=()) -> Dict[str, Any]:
    schema = {
        "type": "object",
        "properties": dict(properties, label=_LABEL),
        "required": list(required),
        "additionalProperties": False,
    }
    if rules:
        schema["allOf"] = list(rules)
    return schema


def _when(key: str, value: str, required) -> Dict[str, Any]:
    return {
        "if": {"properties": {key: {"const": value}}, "required": [key]},
        "then": {"required": list(required)},
    }


FIELD = {"$ref": "#/definitions/field_ref"}
GFQI = {"$ref": "#/definitions/gfqi_ref"}

ITEM_SCHEMAS: Dict[str, Dict[str, Any]] = {
    "bracket": _item(
        {
            "f": FIELD,
            "g": FIELD,
            "h": FIELD,
            "expected": {"type": "string", "minLength": 1},
            "points": {"type": "integer", "minimum": 1},
            "box": {"$ref": "#/definitions/interval"},
            "tolerance": _POSITIVE,
        },
        required=["f", "g"],
    ),
    "flow": _item(
        {
            "check": {"enum": ["commutation", "energy", "reconstruction", "commutator_sweep"]},
            "H": FIELD,
            "K": FIELD,
            "s": {"type": "number"},
            "t": {"type": "number"},
            "box": {"$ref": "#/definitions/interval"},
            "resolution": {"type": "integer", "minimum": 3},
            "epsilons": {"type": "array", "items": _POSITIVE, "minItems": 2},
            "tolerance": _POSITIVE,
        },
        required=["check", "H"],
        rules=[
            _when("check", "commutation", ["K"]),
            _when("check", "commutator_sweep", ["K", "epsilons"]),
        ],
    ),
    "minmax": _item(
        {
            "S": GFQI,
            "resolution": _RESOLUTION,
            "c_box": _POSITIVE,
            "expected_unit": {"type": "number"},
            "expected_fundamental": {"type": "number"},
            "cells": _POSITIVE,
            "critical": {"type": "boolean"},
            "invariance": {
                "type": "array",
                "items": {
                    "type": "array",
                    "items": {"$ref": "#/definitions/move"},
                    "minItems": 1,
                },
            },
            "export_diagram": {"type": "boolean"},
        },
        required=["S"],
    ),
    "gamma": _item(
        {
            "mode": {
                "enum": [
                    "invariant",
                    "distance",
                    "symmetry",
                    "hatgamma",
                    "c_convergence",
                ]
            },
            "S1": GFQI,
            "S2": GFQI,
            "H": FIELD,
            "perturbation": FIELD,
            "family": {"type": "array", "items": GFQI, "minItems": 1},
            "t": {"type": "number"},
            "times": {"type": "integer", "minimum": 2},
            "n_max": {"type": "integer", "minimum": 1},
            "resolution": _RESOLUTION,
            "grid_resolution": {"type": "integer", "minimum": 2},
            "reach": _POSITIVE,
            "expected": {"type": "number"},
            "cells": _POSITIVE,
        },
        required=["mode"],
        rules=[
            _when("mode", "invariant", ["S1"]),
            _when("mode", "distance", ["S1", "S2"]),
            _when("mode", "symmetry", ["S1", "S2"]),
            _when("mode", "hatgamma", ["H", "family"]),
            _when("mode", "c_convergence", ["H", "perturbation", "family"]),
        ],
    ),
    "weakfield": _item(
        {
            "mode": {"enum": ["field", "lie_bracket", "rs_bracket"]},
            "H": FIELD,
            "K": FIELD,
            "point": _POINT,
            "expected": {"type": "array", "items": _POINT, "minItems": 1},
            "schedule": {"$ref": "#/definitions/schedule"},
            "direction_count": {"type": "integer", "minimum": 4},
            "tolerance": _POSITIVE,
            "export": {"type": "boolean"},
        },
        required=["mode", "H", "point"],
        rules=[_when("mode", "lie_bracket", ["K"]), _when("mode", "rs_bracket", ["K"])],
    ),
    "c0commute": _item(
        {
            "H": FIELD,
            "K": FIELD,
            "g": FIELD,
            "k": FIELD,
            "n_max": {"type": "integer", "minimum": 2},
            "grid_resolution": {"type": "integer", "minimum": 2},
            "slope": {"type": "number"},
            "slope_tolerance": _POSITIVE,
            "tolerance": _POSITIVE,
            "expect_evidence": {"type": "boolean"},
        },
        required=["H", "K", "g"],
    ),
    "rigidity": _item(
        {
            "check": {"enum": ["coupling", "tilde", "jacobi", "limit"]},
            "d_min": {"type": "integer", "minimum": 1},
            "d_max": {"type": "integer", "minimum": 1},
            "dims": {
                "type": "array",
                "items": {"type": "integer", "minimum": 1},
                "minItems": 1,
            },
            "maps": {"type": "integer", "minimum": 0},
            "points": {"type": "integer", "minimum": 1},
            "map": {"$ref": "#/definitions/map_ref"},
            "point": _POINT,
            "family": {"type": "string", "minLength": 1},
            "n_max": {"type": "integer", "minimum": 1},
            "box": {"$ref": "#/definitions/interval"},
            "resolution": {"type": "integer", "minimum": 3},
            "tolerance": _POSITIVE,
        },
        required=["check"],
        rules=[_when("check", "jacobi", ["map", "point"]), _when("check", "limit", ["family"])],
    ),
    "property-suite": _item(
        {
            "S1": GFQI,
            "S2": GFQI,
            "generated": {
                "type": "object",
                "properties": {
                    "count": {"type": "integer", "minimum": 1},
                    "amplitude": _POSITIVE,
                    "max_frequency": {"type": "integer", "minimum": 1},
                },
                "required": ["count"],
                "additionalProperties": False,
            },
            "resolution": _RESOLUTION,
            "cells": _POSITIVE,
        },
        rules=[{"anyOf": [{"required": ["S1"]}, {"required": ["generated"]}]}],
    ),
}

DEFINITIONS["schedule"] = {
    "type": "object",
    "properties": {
        "radius": _POSITIVE,
        "shrink": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "shells": {"type": "integer", "minimum": 3},
        "samples": {"type": "integer", "minimum": 8},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "rigidlab experiment",
    "type": "object",
    "properties": {
        "name": _LABEL,
        "kind": {"enum": KINDS},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string", "minLength": 1},
        "integrator": {
            "type": "object",
            "properties": {
                "dt": _POSITIVE,
                "tolerance": _POSITIVE,
                "max_iterations": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "schedule": {"$ref": "#/definitions/schedule"},
        "items": {"type": "array", "minItems": 1},
    },
    "required": ["name", "kind", "items"],
    "additionalProperties": False,
    "allOf": [
        {
            "if": {"properties": {"kind": {"enum": SAMPLING_KINDS}}, "required": ["kind"]},
            "then": {"required": ["seed"]},
        }
    ]
    + [
        {
            "if": {"properties": {"kind": {"const": kind}}, "required": ["kind"]},
            "then": {"properties": {"items": {"items": schema}}},
        }
        for kind, schema in ITEM_SCHEMAS.items()
    ],
    "definitions": DEFINITIONS,
}

_NUMBER_OR_NULL = {"type": ["number", "null"]}

SUMMARY_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "rigidlab run summary",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "kind": {"enum": KINDS},
        "status": {"enum": ["pass", "fail"]},
        "seed": {"type": ["integer", "null"]},
        "inputs": {"type": "object"},
        "versions": {
            "type": "object",
            "additionalProperties": {"type": "string"},
        },
        "rows": {"type": "integer", "minimum": 0},
        "artifacts": {"type": "array", "items": {"type": "string"}},
        "assertions": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "item": {"type": "string"},
                    "name": {"type": "string"},
                    "value": _NUMBER_OR_NULL,
                    "relation": {"enum": ["<=", ">=", "==", "~="]},
                    "reference": _NUMBER_OR_NULL,
                    "tolerance": _NUMBER_OR_NULL,
                    "passed": {"type": "boolean"},
                },
                "required": ["item", "name", "value", "relation", "reference", "passed"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["name", "kind", "status", "seed", "inputs", "versions", "rows", "assertions"],
    "additionalProperties": False,
}

DEFAULTS_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "rigidlab run defaults",
    "type": "object",
    "properties": {
        "output_dir": {"type": "string", "minLength": 1},
        "log_dir": {"type": "string", "minLength": 1},
        "workers": {"type": ["integer", "null"], "minimum": 1},
        "integrator": CONFIG_SCHEMA["properties"]["integrator"],
        "schedule": DEFINITIONS["schedule"],
    },
    "additionalProperties": False,
}
