"""
Grid-function GFQI files.

Layout: one UTF-8 JSON header line

    {"n": 1, "k": 1, "resolutions": [64, 17], "cutoff": 2.0, "radius": 3.0,
     "Q": [[1.0]]}

followed by prod(resolutions) little-endian float64 samples in row-major
order over the axes q1..qn, xi1..xik, with q_j = i / res (periodic) and
xi_j = linspace(-radius, radius, res).
"""

import json
import logging
import os
from typing import Any, Dict, Sequence, Union

import numpy as np
from jsonschema import Draft7Validator

from rigidlab.errors import GFQIError
from rigidlab.gfqi.cores import GridCore
from rigidlab.gfqi.models import GFQI, QuadraticForm

logger = logging.getLogger(__name__)

HEADER_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "k", "resolutions", "cutoff", "radius"],
    "properties": {
        "n": {"type": "integer", "enum": [1, 2]},
        "k": {"type": "integer", "minimum": 0},
        "resolutions": {
            "type": "array",
            "items": {"type": "integer", "minimum": 2},
            "minItems": 1,
        },
        "cutoff": {"type": "number", "exclusiveMinimum": 0},
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "Q": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "name": {"type": "string"},
    },
}


def _axes(n: int, k: int, resolutions: Sequence[int], radius: float):
    axes = [np.arange(res) / res for res in resolutions[:n]]
    axes += [np.linspace(-radius, radius, res) for res in resolutions[n : n + k]]
    return axes


def load_grid_gfqi(path: Union[str, os.PathLike]) -> GFQI:
    """Read a grid-function GFQI file."""
    with open(path, "rb") as f:
        header_line = f.readline()
        payload = f.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise GFQIError(f"{path}: malformed JSON header: {e}") from e
    errors = sorted(Draft7Validator(HEADER_SCHEMA).iter_errors(header), key=str)
    if errors:
        raise GFQIError(f"{path}: invalid header: " + "; ".join(e.message for e in errors))

    n, k = header["n"], header["k"]
    shape = tuple(header["resolutions"])
    if len(shape) != n + k:
        raise GFQIError(f"{path}: {len(shape)} resolutions for n + k = {n + k} axes")
    if (k == 0) != ("Q" not in header):
        raise GFQIError(f"{path}: Q must be present exactly when k > 0")
    expected = int(np.prod(shape)) * 8
    if len(payload) != expected:
        raise GFQIError(f"{path}: expected {expected} bytes of samples, found {len(payload)}")

    samples = np.frombuffer(payload, dtype="<f8").reshape(shape)
    if not np.all(np.isfinite(samples)):
        raise GFQIError(f"{path}: non-finite samples")
    quad = QuadraticForm(header["Q"]) if k else None
    core = GridCore(samples, n, k, header["radius"], quad)
    logger.info(f"loaded grid GFQI {path} with shape {shape}")
    name = header.get("name", os.path.basename(str(path)))
    return GFQI(n, k, core, quad, header["cutoff"], name=name)


def save_grid_gfqi(
    S: GFQI,
    path: Union[str, os.PathLike],
    resolutions: Sequence[int],
    radius: float = None,
) -> None:
    """Sample a GFQI on the file's grid and write it."""
    radius = S.fiber_radius if radius is None else float(radius)
    if len(resolutions) != S.dim:
        raise GFQIError(f"need {S.dim} resolutions, got {len(resolutions)}")
    axes = _axes(S.n, S.k, resolutions, radius)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    samples = S.values(pts).astype("<f8")
    header = {
        "n": S.n,
        "k": S.k,
        "resolutions": [int(r) for r in resolutions],
        "cutoff": float(S.cutoff),
        "radius": radius,
    }
    if S.quad is not None:
        header["Q"] = S.quad.matrix.tolist()
    if S.name:
        header["name"] = S.name
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        f.write(samples.tobytes())
    os.replace(tmp, path)
