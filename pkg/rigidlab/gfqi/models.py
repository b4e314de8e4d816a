import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from rigidlab.errors import GFQIError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
DEGENERACY_TOLERANCE = 1e-9
PERIODICITY_TOLERANCE = 1e-12
QUADRATICITY_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """Nondegenerate symmetric form xi^T Q xi."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim == 0:
            mat = mat.reshape(1, 1)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise GFQIError(f"quadratic form must be square, got shape {mat.shape}")
        if mat.size and np.max(np.abs(mat - mat.T)) > SYMMETRY_TOLERANCE:
            raise GFQIError("quadratic form is not symmetric")
        eig = np.linalg.eigvalsh(mat) if mat.size else np.zeros(0)
        if eig.size and np.min(np.abs(eig)) < DEGENERACY_TOLERANCE:
            raise GFQIError(
                f"degenerate quadratic form (smallest |eigenvalue| {np.min(np.abs(eig)):.3e})"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "_eigenvalues", eig)

    @classmethod
    def diagonal(cls, values) -> "QuadraticForm":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigenvalues

    @property
    def index(self) -> int:
        """Negative index i^-."""
        return int(np.sum(self._eigenvalues < 0))

    @property
    def min_abs_eigenvalue(self) -> float:
        return float(np.min(np.abs(self._eigenvalues))) if self.k else np.inf

    def direct_sum(self, other: "QuadraticForm") -> "QuadraticForm":
        k1, k2 = self.k, other.k
        mat = np.zeros((k1 + k2, k1 + k2))
        mat[:k1, :k1] = self.matrix
        mat[k1:, k1:] = other.matrix
        return QuadraticForm(mat)

    def negated(self) -> "QuadraticForm":
        return QuadraticForm(-self.matrix)

    def values(self, xi: np.ndarray) -> np.ndarray:
        return np.einsum("mi,ij,mj->m", xi, self.matrix, xi)

    def gradients(self, xi: np.ndarray) -> np.ndarray:
        return 2.0 * xi @ self.matrix

    def __eq__(self, other) -> bool:
        return isinstance(other, QuadraticForm) and np.array_equal(
            self.matrix, other.matrix
        )

    def __hash__(self) -> int:
        return hash(self.matrix.tobytes())


def direct_sum(
    a: Optional[QuadraticForm], b: Optional[QuadraticForm]
) -> Optional[QuadraticForm]:
    if a is None:
        return b
    if b is None:
        return a
    return a.direct_sum(b)


@dataclass(frozen=True, eq=False)
class GFQI:
    """
    Generating function S(q; xi) on T^n x R^k, quadratic at infinity.

    ``quad`` is None exactly when k = 0. ``kind`` is "difference" for the
    S1 - S2 construction, which is quadratic only where both fiber blocks
    are beyond their cutoffs.
    """

    n: int
    k: int
    core: "GeneratingCore"  # noqa: F821
    quad: Optional[QuadraticForm]
    cutoff: float
    kind: str = "standard"
    name: str = ""
    blocks: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.n not in (1, 2):
            raise GFQIError(f"base torus dimension must be 1 or 2, got {self.n}")
        if self.k < 0:
            raise GFQIError("fiber dimension must be nonnegative")
        if (self.quad is None) != (self.k == 0):
            raise GFQIError("a quadratic form is required exactly when k > 0")
        if self.quad is not None and self.quad.k != self.k:
            raise GFQIError(f"quadratic form has size {self.quad.k}, fiber has {self.k}")
        if not self.cutoff > 0:
            raise GFQIError("cutoff radius must be positive")
        if self.core.n != self.n or self.core.k != self.k:
            raise GFQIError("core dimensions do not match the GFQI")
        if not self.blocks:
            object.__setattr__(self, "blocks", (self.k,))
        if sum(self.blocks) != self.k:
            raise GFQIError(f"fiber blocks {self.blocks} do not add up to k={self.k}")

    @property
    def index(self) -> int:
        return 0 if self.quad is None else self.quad.index

    @property
    def dim(self) -> int:
        return self.n + self.k

    @property
    def fiber_radius(self) -> float:
        return self.cutoff + 1.0

    def values(self, points: np.ndarray) -> np.ndarray:
        return self.core.values(np.atleast_2d(np.asarray(points, dtype=float)))

    def gradients(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.core.gradients(np.atleast_2d(np.asarray(points, dtype=float)))

    def hessians(self, points: np.ndarray) -> np.ndarray:
        return self.core.hessians(np.atleast_2d(np.asarray(points, dtype=float)))

    def quadratic_part(self, xi: np.ndarray) -> np.ndarray:
        if self.quad is None:
            return np.zeros(xi.shape[0])
        return self.quad.values(xi)

    def far_points(
        self, count: int, rng: np.random.Generator, spread: float = 2.0
    ) -> np.ndarray:
        """
        Random points whose every fiber block lies beyond the cutoff.
        """
        q = rng.random((count, self.n))
        parts = [q]
        for size in self.blocks:
            if size == 0:
                continue
            direction = rng.standard_normal((count, size))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            radius = self.cutoff * (1.0 + 1e-6) + spread * rng.random((count, 1))
            parts.append(direction * radius)
        return np.concatenate(parts, axis=1)

    def quadratic_defect(
        self,
        count: int = 1000,
        rng: Optional[np.random.Generator] = None,
        modulo_base: bool = False,
    ) -> float:
        """
        sup |S - xi^T Q| over random points beyond the cutoff.

        With ``modulo_base`` the far-field difference S - xi^T Q may depend on
        q alone; the defect then compares two far points over the same q.
        """
        if self.k == 0:
            return 0.0
        rng = rng or np.random.default_rng(0)
        pts = self.far_points(count, rng)
        excess = self.values(pts) - self.quadratic_part(pts[:, self.n :])
        if not modulo_base:
            return float(np.max(np.abs(excess)))
        other = self.far_points(count, rng)
        other[:, : self.n] = pts[:, : self.n]
        excess_other = self.values(other) - self.quadratic_part(other[:, self.n :])
        return float(np.max(np.abs(excess - excess_other)))

    def periodicity_defect(
        self, count: int = 256, rng: Optional[np.random.Generator] = None
    ) -> float:
        """sup |S(q + e_i; xi) - S(q; xi)| over random points and axes."""
        rng = rng or np.random.default_rng(0)
        q = rng.random((count, self.n))
        xi = (2.0 * rng.random((count, self.k)) - 1.0) * self.fiber_radius
        base = np.concatenate([q, xi], axis=1)
        v0 = self.values(base)
        worst = 0.0
        for axis in range(self.n):
            shifted = base.copy()
            shifted[:, axis] += 1.0
            worst = max(worst, float(np.max(np.abs(self.values(shifted) - v0))))
        return worst


@dataclass(frozen=True, eq=False)
class WavefrontSample:
    """Points (q, dS/dq) of the Lagrangian generated by a GFQI."""

    q: np.ndarray
    p: np.ndarray
    xi: np.ndarray
    residuals: np.ndarray
    residual_bound: float
    empty: bool = False

    @property
    def size(self) -> int:
        return self.q.shape[0]

    def sorted_keys(self, digits: int = 9) -> np.ndarray:
        return np.round(self.q, digits)

    def sup_difference(self, other: "WavefrontSample", digits: int = 9) -> float:
        """
        sup |p - p'| between samples taken on the same q grid; several
        branches over one q are matched after sorting by p.
        """
        mine = _group_by_q(self, digits)
        theirs = _group_by_q(other, digits)
        if set(mine) != set(theirs):
            return np.inf
        worst = 0.0
        for key, ps in mine.items():
            qs = theirs[key]
            if len(ps) != len(qs):
                return np.inf
            a = np.array(sorted(map(tuple, ps)))
            b = np.array(sorted(map(tuple, qs)))
            worst = max(worst, float(np.max(np.abs(a - b))))
        return worst


def _group_by_q(sample: WavefrontSample, digits: int):
    groups = {}
    for q, p in zip(sample.sorted_keys(digits), sample.p):
        groups.setdefault(tuple(q.tolist()), []).append(p)
    return groups
