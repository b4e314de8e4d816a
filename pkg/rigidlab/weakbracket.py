"""
Set-valued calculus for Lipschitz Hamiltonians.

Convex sets are generator clouds compared through support functions. The
weak Hamiltonian field and both Lie brackets sample shells of shrinking
radius around the base point; the innermost shells stand in for the limit
along sequences of differentiability points, so every cloud is an inner
approximation of the true set.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.stats import norm, qmc

from rigidlab.config import settings
from rigidlab.errors import KinkPointError, WeakBracketError
from rigidlab.fields import BracketField, difference
from rigidlab.phase import (
    PhasePoint,
    Regularity,
    ScalarField,
    apply_symplectic,
    as_coords,
    as_points,
    c0_norm,
    fd_jacobian_many,
    sup_norm,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingSchedule:
    """Shells r_{j+1} <= |y - x| <= r_j with r_j = radius * shrink^j."""

    radius: float = settings.numeric.schedule_radius
    shrink: float = settings.numeric.schedule_shrink
    shells: int = settings.numeric.schedule_shells
    samples: int = settings.numeric.schedule_samples
    seed: int = 0

    def __post_init__(self):
        if not self.radius > 0:
            raise WeakBracketError(f"initial radius must be positive, got {self.radius}")
        if not 0 < self.shrink < 1:
            raise WeakBracketError(f"shrink factor must lie in (0, 1), got {self.shrink}")
        if self.shells < 3:
            raise WeakBracketError(f"need at least 3 shells, got {self.shells}")
        if self.samples < 8:
            raise WeakBracketError(f"need at least 8 samples per shell, got {self.samples}")

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "SamplingSchedule":
        data = dict(data or {})
        return cls(**data)

    def radii(self, shell: int):
        outer = self.radius * self.shrink**shell
        return outer * self.shrink, outer

    def shell_points(self, x: np.ndarray, shell: int) -> np.ndarray:
        """Points of one shell; each draws from its own (seed, shell, index) stream."""
        inner, outer = self.radii(shell)
        out = np.empty((self.samples, x.size))
        for index in range(self.samples):
            rng = np.random.default_rng([self.seed, shell, index])
            direction = rng.standard_normal(x.size)
            direction /= np.linalg.norm(direction)
            out[index] = x + direction * rng.uniform(inner, outer)
        return out

    def as_dict(self) -> Dict[str, Any]:
        return {
            "radius": self.radius,
            "shrink": self.shrink,
            "shells": self.shells,
            "samples": self.samples,
            "seed": self.seed,
        }


@dataclass
class ConvexSetCloud:
    """Generators of a convex hull in R^{2d}, with provenance."""

    points: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.shape[0] == 0:
            raise WeakBracketError("a convex set cloud needs at least one generator")

    @classmethod
    def singleton(cls, v: np.ndarray, provenance: Optional[Dict[str, Any]] = None):
        return cls(np.asarray(v, dtype=float)[None, :], dict(provenance or {}))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def diameter(self) -> float:
        diffs = self.points[:, None, :] - self.points[None, :, :]
        return float(np.max(np.linalg.norm(diffs, axis=2)))

    @property
    def is_singleton(self) -> bool:
        return self.size == 1

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def support(self, directions: np.ndarray) -> np.ndarray:
        """h(u) = max over generators of <u, v>, one value per row of ``directions``."""
        return np.max(self.points @ np.atleast_2d(directions).T, axis=0)

    def scaled(self, c: float) -> "ConvexSetCloud":
        return ConvexSetCloud(c * self.points, dict(self.provenance))

    def to_frame(self) -> pd.DataFrame:
        columns = [f"v{i + 1}" for i in range(self.dim)]
        return pd.DataFrame(self.points, columns=columns)

    def export(self, path: Union[str, os.PathLike]) -> None:
        """Generator CSV at ``path`` and a JSON provenance sidecar next to it."""
        tmp = f"{path}.tmp"
        self.to_frame().to_csv(tmp, index=False, float_format="%.17g")
        os.replace(tmp, path)
        sidecar = f"{os.path.splitext(str(path))[0]}.json"
        with open(f"{sidecar}.tmp", "w", encoding="utf-8") as f:
            json.dump(self.provenance, f, indent=2, sort_keys=True)
        os.replace(f"{sidecar}.tmp", sidecar)


def deduplicate(values: np.ndarray, tolerance: Optional[float] = None) -> np.ndarray:
    """Drop rows within ``tolerance`` (max norm) of an earlier kept row."""
    tolerance = settings.numeric.dedup_tolerance if tolerance is None else tolerance
    order = np.lexsort(values.T[::-1])
    kept = []
    for row in values[order]:
        if not kept or np.min(np.max(np.abs(np.array(kept) - row), axis=1)) > tolerance:
            kept.append(row)
    return np.array(kept)


Evaluator = Callable[[np.ndarray], tuple]


def _shell_cloud(
    evaluator: Evaluator,
    x: np.ndarray,
    sched: SamplingSchedule,
    provenance: Dict[str, Any],
) -> ConvexSetCloud:
    """
    Singleton when the value at x exists and shell deviations decay with the
    radius; otherwise the deduplicated innermost-shell cloud.
    """
    center, center_ok = evaluator(x[None, :])
    shell_values = []
    for shell in range(sched.shells):
        vals, ok = evaluator(sched.shell_points(x, shell))
        shell_values.append(vals[ok])
    if not center_ok[0] and not any(v.shape[0] for v in shell_values):
        raise WeakBracketError(f"all samples around {x.tolist()} hit kink points")

    threshold = settings.numeric.singleton_threshold
    provenance = dict(provenance, point=x.tolist(), schedule=sched.as_dict())
    if center_ok[0]:
        deviations = [
            float(np.max(np.abs(v - center[0]), initial=0.0)) for v in shell_values
        ]
        ratio = 0.5 * (1.0 + sched.shrink)
        tail = deviations[-3:]
        decays = all(b <= ratio * a + threshold for a, b in zip(tail, tail[1:]))
        if tail[-1] <= threshold or decays:
            logger.debug(f"singleton at {x.tolist()} (innermost deviation {tail[-1]:.3e})")
            return ConvexSetCloud.singleton(center[0], dict(provenance, singleton=True))

    limit = [v for v in shell_values[-settings.numeric.limit_shells :] if v.shape[0]]
    if not limit:
        limit = [v for v in shell_values if v.shape[0]]
    cloud = deduplicate(np.concatenate(limit))
    logger.debug(f"cloud of {cloud.shape[0]} generators at {x.tolist()}")
    return ConvexSetCloud(
        cloud, dict(provenance, singleton=False, generators=int(cloud.shape[0]))
    )


def _require_lipschitz(H: ScalarField) -> None:
    if not H.regularity.is_lipschitz:
        raise WeakBracketError(f"{H.name} is not flagged Lipschitz ({H.regularity.value})")


def weak_hamiltonian_field(
    H: ScalarField,
    x: Union[PhasePoint, Sequence[float], np.ndarray],
    sched: Optional[SamplingSchedule] = None,
) -> ConvexSetCloud:
    """
    The weak Hamiltonian field at x: the hull of limits of E DH along
    points where H is differentiable.

    Fields with an everywhere-defined continuous gradient give the classical
    vector field as a singleton.
    """
    _require_lipschitz(H)
    sched = sched or SamplingSchedule()
    coords = as_coords(x)
    provenance = {"kind": "weak_hamiltonian_field", "field": H.name}
    if H.regularity.has_gradient_everywhere:
        v = H.vector_field_many(coords[None, :])[0]
        return ConvexSetCloud.singleton(
            v, dict(provenance, point=coords.tolist(), singleton=True)
        )

    def evaluator(points):
        grads, ok = H.try_gradient_many(points)
        return apply_symplectic(grads), ok

    return _shell_cloud(evaluator, coords, sched, provenance)


class VectorField:
    """A batched vector field on R^{2d}; Jacobians by finite differences."""

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], dim: int, name: str = ""):
        self.func = func
        self.dim = dim
        self.name = name or "vector field"

    @classmethod
    def hamiltonian(cls, H: ScalarField) -> "VectorField":
        return cls(H.vector_field_many, H.dim, f"X_{H.name}")

    @classmethod
    def constant(cls, vector: Sequence[float]) -> "VectorField":
        v = np.asarray(vector, dtype=float)
        return cls(lambda pts: np.tile(v, (as_points(pts).shape[0], 1)), v.size, "constant")

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.func(as_points(points)), dtype=float)

    def jacobian_many(self, points: np.ndarray) -> np.ndarray:
        return fd_jacobian_many(self.func, as_points(points), richardson=True)


def _bracket_values(f: VectorField, g: VectorField, points: np.ndarray) -> np.ndarray:
    fv, gv = f.evaluate_many(points), g.evaluate_many(points)
    df, dg = f.jacobian_many(points), g.jacobian_many(points)
    return np.einsum("mij,mj->mi", df, gv) - np.einsum("mij,mj->mi", dg, fv)


def rs_lie_bracket(
    f: VectorField,
    g: VectorField,
    x: Union[PhasePoint, Sequence[float], np.ndarray],
    sched: Optional[SamplingSchedule] = None,
) -> ConvexSetCloud:
    """Hull of limits of Df g - Dg f along sampled points."""
    if f.dim != g.dim:
        raise WeakBracketError(f"vector fields of dimension {f.dim} and {g.dim}")
    sched = sched or SamplingSchedule()
    coords = as_coords(x)

    def evaluator(points):
        try:
            return _bracket_values(f, g, points), np.ones(points.shape[0], dtype=bool)
        except KinkPointError:
            pass
        vals = np.full(points.shape, np.nan)
        ok = np.zeros(points.shape[0], dtype=bool)
        for i, row in enumerate(points):
            try:
                vals[i] = _bracket_values(f, g, row[None, :])[0]
                ok[i] = True
            except KinkPointError:
                continue
        return vals, ok

    provenance = {"kind": "rs_lie_bracket", "fields": [f.name, g.name]}
    return _shell_cloud(evaluator, coords, sched, provenance)


def weak_lie_bracket(
    H: ScalarField,
    K: ScalarField,
    x: Union[PhasePoint, Sequence[float], np.ndarray],
    sched: Optional[SamplingSchedule] = None,
) -> ConvexSetCloud:
    """The weak field of the scalar bracket {H, K}, for C1,1 inputs."""
    for field_ in (H, K):
        if field_.regularity not in (Regularity.SMOOTH, Regularity.C11):
            raise WeakBracketError(
                f"{field_.name} is not flagged C1,1 ({field_.regularity.value})"
            )
    cloud = weak_hamiltonian_field(BracketField(H, K), x, sched)
    cloud.provenance["kind"] = "weak_lie_bracket"
    return cloud


def directions(dim: int, count: Optional[int] = None) -> np.ndarray:
    """
    Unit directions: a Halton sequence pushed to the sphere, plus the
    coordinate axes and their negatives.
    """
    if count is None:
        count = 64 if dim <= 2 else 256
    if dim == 2:
        u = qmc.Halton(d=1, scramble=False).random(count + 1)[1:, 0]
        dirs = np.stack([np.cos(2 * np.pi * u), np.sin(2 * np.pi * u)], axis=1)
    else:
        u = qmc.Halton(d=dim, scramble=False).random(count + 1)[1:]
        dirs = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    axes = np.concatenate([np.eye(dim), -np.eye(dim)])
    return np.concatenate([dirs, axes])


def hausdorff_distance(
    A: ConvexSetCloud, B: ConvexSetCloud, direction_count: Optional[int] = None
) -> float:
    """max over directions u of |h_A(u) - h_B(u)|."""
    if A.dim != B.dim:
        raise WeakBracketError(f"clouds in dimensions {A.dim} and {B.dim}")
    dirs = directions(A.dim, direction_count)
    shift = B.centroid() - A.centroid()
    if np.linalg.norm(shift) > 0:
        dirs = np.concatenate([dirs, (shift / np.linalg.norm(shift))[None, :]])
    return float(np.max(np.abs(A.support(dirs) - B.support(dirs))))


@dataclass
class CommutationReport:
    frame: pd.DataFrame
    evidence: bool
    tolerance: float


FamilyLike = Union[Sequence[ScalarField], Callable[[int], ScalarField]]


def _member(family: FamilyLike, n: int) -> ScalarField:
    return family(n) if callable(family) else family[n - 1]


def c0_commute_defect(
    H_seq: FamilyLike,
    K_seq: FamilyLike,
    H: ScalarField,
    K: ScalarField,
    grid_resolution: int,
    n_max: int,
    tolerance: float = 1e-6,
) -> CommutationReport:
    """
    ||H_n - H||, ||K_n - K|| in C0 and sup |{H_n, K_n}| for n = 1..n_max.

    The report shows C0-commutation evidence when all three columns are
    non-increasing and the last bracket norm is below ``tolerance``.
    """
    rows = []
    for n in range(1, n_max + 1):
        Hn, Kn = _member(H_seq, n), _member(K_seq, n)
        rows.append(
            {
                "n": n,
                "h_distance": c0_norm(difference(Hn, H), grid_resolution),
                "k_distance": c0_norm(difference(Kn, K), grid_resolution),
                "bracket_norm": sup_norm(BracketField(Hn, Kn), grid_resolution),
            }
        )
    frame = pd.DataFrame(rows, columns=["n", "h_distance", "k_distance", "bracket_norm"])
    slack = 1e-12
    monotone = all(
        bool(np.all(np.diff(frame[c].to_numpy()) <= slack))
        for c in ("h_distance", "k_distance", "bracket_norm")
    )
    evidence = monotone and float(frame["bracket_norm"].iloc[-1]) <= tolerance
    frame["evidence"] = evidence
    logger.info(
        f"C0-commutation of {H.name}, {K.name} over n<={n_max}: "
        f"final bracket norm {frame['bracket_norm'].iloc[-1]:.3e}, evidence={evidence}"
    )
    return CommutationReport(frame, evidence, tolerance)
