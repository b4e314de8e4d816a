"""
Phase-space calculus on R^{2d}.

Coordinates are ordered (q1..qd, p1..pd). The symplectic matrix is fixed as
E = [[0, I], [-I, 0]], so that X_H = E DH = (dH/dp, -dH/dq),
{f, g} = Df^T E Dg and {q_i, p_j} = delta_ij.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from rigidlab.errors import (
    DifferentiationError,
    DomainError,
    KinkPointError,
    PhaseSpaceError,
)

logger = logging.getLogger(__name__)

EPS = float(np.finfo(float).eps)
FD_STEP_FACTOR = EPS ** (1.0 / 3.0)
# outer step for differencing gradients that are themselves finite differences
NESTED_FD_STEP_FACTOR = EPS ** (1.0 / 4.0)

ArrayLike = Union[np.ndarray, Sequence[float]]


class Regularity(str, Enum):
    """Declared smoothness class of a field."""

    SMOOTH = "smooth"
    C11 = "C1,1"
    LIPSCHITZ = "C0Lipschitz"
    UNKNOWN = "unknown"

    @property
    def rank(self) -> int:
        return _REGULARITY_RANK[self]

    @property
    def has_gradient_everywhere(self) -> bool:
        return self in (Regularity.SMOOTH, Regularity.C11)

    @property
    def is_lipschitz(self) -> bool:
        return self is not Regularity.UNKNOWN

    @staticmethod
    def weakest(items: Iterable["Regularity"]) -> "Regularity":
        return min(items, key=lambda r: r.rank, default=Regularity.SMOOTH)


_REGULARITY_RANK = {
    Regularity.SMOOTH: 3,
    Regularity.C11: 2,
    Regularity.LIPSCHITZ: 1,
    Regularity.UNKNOWN: 0,
}


class GradientMode(str, Enum):
    """How a field computes its gradient."""

    EXACT = "exact"
    FINITE_DIFFERENCE = "finite-difference"
    FD_UNSAFE = "finite-difference-unsafe"

    @staticmethod
    def combine(items: Iterable["GradientMode"]) -> "GradientMode":
        modes = set(items)
        if GradientMode.FD_UNSAFE in modes:
            return GradientMode.FD_UNSAFE
        if GradientMode.FINITE_DIFFERENCE in modes:
            return GradientMode.FINITE_DIFFERENCE
        return GradientMode.EXACT


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """A point of R^{2d}, coordinates ordered (q, p)."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coords, dtype=float).reshape(-1)
        if arr.size == 0 or arr.size % 2 != 0:
            raise PhaseSpaceError(
                f"phase point needs an even, positive number of coordinates, got {arr.size}"
            )
        if not np.all(np.isfinite(arr)):
            raise PhaseSpaceError("phase point has non-finite coordinates")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @classmethod
    def from_qp(cls, q: ArrayLike, p: ArrayLike) -> "PhasePoint":
        q = np.atleast_1d(np.asarray(q, dtype=float))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if q.shape != p.shape:
            raise PhaseSpaceError("q and p must have the same length")
        return cls(np.concatenate([q, p]))

    @property
    def d(self) -> int:
        return self.coords.size // 2

    @property
    def q(self) -> np.ndarray:
        return self.coords[: self.d]

    @property
    def p(self) -> np.ndarray:
        return self.coords[self.d :]

    def __len__(self) -> int:
        return self.coords.size

    def __eq__(self, other) -> bool:
        return isinstance(other, PhasePoint) and np.array_equal(
            self.coords, other.coords
        )

    def __hash__(self) -> int:
        return hash(self.coords.tobytes())

    def __repr__(self) -> str:
        return f"PhasePoint(q={self.q.tolist()}, p={self.p.tolist()})"


def as_coords(x: Union[PhasePoint, ArrayLike]) -> np.ndarray:
    """Coordinates of a point as a float vector (no even-length check)."""
    if isinstance(x, PhasePoint):
        return np.array(x.coords)
    arr = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise PhaseSpaceError("point has non-finite coordinates")
    return arr


def as_points(points: Union[np.ndarray, Sequence]) -> np.ndarray:
    """A batch of points as an (m, n) float array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise PhaseSpaceError(f"expected an (m, n) array of points, got {arr.shape}")
    return arr


@lru_cache(maxsize=64)
def _symplectic_matrix(d: int) -> np.ndarray:
    eye = np.eye(d)
    zero = np.zeros((d, d))
    mat = np.block([[zero, eye], [-eye, zero]])
    mat.setflags(write=False)
    return mat


def symplectic_matrix(d: int) -> np.ndarray:
    """The matrix E = [[0, I], [-I, 0]] of size 2d."""
    if d < 1:
        raise PhaseSpaceError(f"d must be >= 1, got {d}")
    return np.array(_symplectic_matrix(d))


def apply_symplectic(v: np.ndarray) -> np.ndarray:
    """E v along the last axis, for a batch of vectors."""
    d = v.shape[-1] // 2
    return np.concatenate([v[..., d:], -v[..., :d]], axis=-1)


def bracket_of_gradients(df: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """
    {f, g} from gradients, along the last axis.

    Written as sum(f_q g_p - f_p g_q) so that swapping f and g negates every
    term exactly and antisymmetry holds bit for bit.
    """
    d = df.shape[-1] // 2
    terms = df[..., :d] * dg[..., d:] - df[..., d:] * dg[..., :d]
    return np.sum(terms, axis=-1)


@dataclass(frozen=True)
class SymplecticConvention:
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise PhaseSpaceError(f"d must be >= 1, got {self.d}")

    @property
    def matrix(self) -> np.ndarray:
        return symplectic_matrix(self.d)

    def check(self) -> Tuple[float, float]:
        """Residuals of E^2 = -I and E^T = -E."""
        e = self.matrix
        eye = np.eye(2 * self.d)
        return (
            float(np.max(np.abs(e @ e + eye))),
            float(np.max(np.abs(e.T + e))),
        )


@dataclass(frozen=True)
class Box:
    """
    Axis-aligned box; periodic axes make it (partly) a torus.

    Bounds may be infinite for unbounded domains.
    """

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    periodic: Tuple[bool, ...] = ()

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        periodic = tuple(bool(v) for v in self.periodic) or (False,) * len(lower)
        if len(lower) != len(upper) or len(periodic) != len(lower) or not lower:
            raise PhaseSpaceError("box bounds and periodic flags must agree in length")
        for lo, hi, per in zip(lower, upper, periodic):
            if not lo < hi:
                raise PhaseSpaceError(f"empty box axis [{lo}, {hi}]")
            if per and not (np.isfinite(lo) and np.isfinite(hi)):
                raise PhaseSpaceError("periodic axes need finite bounds")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "periodic", periodic)

    @classmethod
    def cube(cls, n: int, lo: float, hi: float) -> "Box":
        return cls((lo,) * n, (hi,) * n)

    @classmethod
    def unbounded(cls, n: int) -> "Box":
        return cls((-np.inf,) * n, (np.inf,) * n)

    @classmethod
    def phase_cylinder(cls, d: int, p_bound: float) -> "Box":
        """T^d x [-p_bound, p_bound]^d with unit periods in q."""
        return cls(
            (0.0,) * d + (-p_bound,) * d,
            (1.0,) * d + (p_bound,) * d,
            (True,) * d + (False,) * d,
        )

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    @property
    def center(self) -> np.ndarray:
        if not self.bounded:
            raise DomainError("unbounded box has no center")
        return 0.5 * (np.array(self.lower) + np.array(self.upper))

    @property
    def widths(self) -> np.ndarray:
        return np.array(self.upper) - np.array(self.lower)

    def contains(self, points: np.ndarray, atol: float = 1e-12) -> np.ndarray:
        pts = as_points(points)
        if pts.shape[1] != self.dim:
            raise PhaseSpaceError(
                f"points have dimension {pts.shape[1]}, box has {self.dim}"
            )
        ok = np.ones(pts.shape[0], dtype=bool)
        for axis in range(self.dim):
            if self.periodic[axis]:
                continue
            col = pts[:, axis]
            ok &= (col >= self.lower[axis] - atol) & (col <= self.upper[axis] + atol)
        return ok

    def require(self, points: np.ndarray, what: str = "point") -> None:
        ok = self.contains(points)
        if not np.all(ok):
            bad = as_points(points)[int(np.argmin(ok))]
            raise DomainError(f"{what} {bad.tolist()} lies outside the domain")

    def grid(self, resolution: Union[int, Sequence[int]]) -> "Grid":
        return Grid.over(self, resolution)

    def shrink(self, factor: float) -> "Box":
        c = self.center
        half = 0.5 * self.widths * factor
        return Box(tuple(c - half), tuple(c + half), self.periodic)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform sample grid over a bounded box (periodic axes skip the endpoint)."""

    box: Box
    shape: Tuple[int, ...]
    axes: Tuple[np.ndarray, ...] = field(repr=False)

    @classmethod
    def over(cls, box: Box, resolution: Union[int, Sequence[int]]) -> "Grid":
        if not box.bounded:
            raise DomainError("cannot grid an unbounded box")
        if isinstance(resolution, (int, np.integer)):
            shape = (int(resolution),) * box.dim
        else:
            shape = tuple(int(r) for r in resolution)
        if len(shape) != box.dim or min(shape) < 2:
            raise PhaseSpaceError(f"invalid grid resolution {shape} for dim {box.dim}")
        axes = []
        for lo, hi, per, res in zip(box.lower, box.upper, box.periodic, shape):
            if per:
                axes.append(lo + (hi - lo) * np.arange(res) / res)
            else:
                axes.append(np.linspace(lo, hi, res))
        return cls(box, shape, tuple(axes))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> np.ndarray:
        return np.array(
            [
                (hi - lo) / (res if per else res - 1)
                for lo, hi, per, res in zip(
                    self.box.lower, self.box.upper, self.box.periodic, self.shape
                )
            ]
        )

    @property
    def cell_diameter(self) -> float:
        return float(np.linalg.norm(self.spacing))

    def points(self) -> np.ndarray:
        """All grid points, row-major, as an (size, dim) array."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def reshape(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape(self.shape + np.asarray(values).shape[1:])


def fd_steps(x: np.ndarray, factor: float = FD_STEP_FACTOR) -> np.ndarray:
    """Central-difference steps h_i = factor * max(1, |x_i|), per coordinate."""
    return factor * np.maximum(1.0, np.abs(x))


def fd_gradient_many(
    func: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    factor: float = FD_STEP_FACTOR,
) -> np.ndarray:
    """
    Central-difference gradients of a batched scalar function.

    Args:
        func: maps an (m, n) array of points to (m,) values
        points: (m, n) evaluation points

    Returns:
        (m, n) array of gradients
    """
    pts = as_points(points)
    m, n = pts.shape
    h = fd_steps(pts, factor)
    offsets = np.zeros((2 * n, m, n))
    for i in range(n):
        offsets[2 * i, :, i] = h[:, i]
        offsets[2 * i + 1, :, i] = -h[:, i]
    stencil = (pts[None, :, :] + offsets).reshape(-1, n)
    vals = np.asarray(func(stencil), dtype=float).reshape(2 * n, m)
    grads = np.empty((m, n))
    for i in range(n):
        # the effective step is the representable difference
        step = (pts[:, i] + h[:, i]) - (pts[:, i] - h[:, i])
        grads[:, i] = (vals[2 * i] - vals[2 * i + 1]) / step
    return grads


def fd_jacobian_many(
    func: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    factor: float = FD_STEP_FACTOR,
    richardson: bool = False,
) -> np.ndarray:
    """
    Central-difference Jacobians of a batched vector function.

    With ``richardson`` one extrapolation level combines steps h and h/2.

    Returns:
        (m, k, n) array, k the output dimension
    """
    pts = as_points(points)
    m, n = pts.shape

    def _central(h: np.ndarray) -> np.ndarray:
        cols = []
        for i in range(n):
            plus = pts.copy()
            minus = pts.copy()
            plus[:, i] += h[:, i]
            minus[:, i] -= h[:, i]
            out = np.asarray(func(np.concatenate([plus, minus])), dtype=float)
            out = out.reshape(2 * m, -1)
            step = (plus[:, i] - minus[:, i])[:, None]
            cols.append((out[:m] - out[m:]) / step)
        return np.stack(cols, axis=2)

    h = fd_steps(pts, factor)
    coarse = _central(h)
    if not richardson:
        return coarse
    fine = _central(0.5 * h)
    return (4.0 * fine - coarse) / 3.0


class ScalarField(ABC):
    """
    A real function on a box or torus in R^n with gradient access.

    Subclasses implement ``evaluate_many``; they override ``gradient_many``
    and ``hessian_many`` when they can do better than finite differences.
    """

    def __init__(
        self,
        domain: Box,
        mode: GradientMode = GradientMode.FINITE_DIFFERENCE,
        regularity: Regularity = Regularity.SMOOTH,
        lipschitz_estimate: Optional[float] = None,
        support: Optional[Box] = None,
        name: str = "",
    ):
        if lipschitz_estimate is not None and lipschitz_estimate < 0:
            raise ValueError("lipschitz_estimate must be nonnegative")
        if support is not None and support.dim != domain.dim:
            raise PhaseSpaceError("support and domain dimensions differ")
        self.domain = domain
        self.mode = mode
        self.regularity = regularity
        self.lipschitz_estimate = lipschitz_estimate
        self.support = support
        self.name = name or type(self).__name__

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def d(self) -> int:
        return self.dim // 2

    @property
    def max_order(self) -> int:
        """Highest derivative order available everywhere."""
        if self.mode is GradientMode.FD_UNSAFE:
            return 1
        return 2 if self.regularity is Regularity.SMOOTH else 1

    @property
    def hessian_is_nested_fd(self) -> bool:
        return self.mode is not GradientMode.EXACT

    def _prepare(self, points: np.ndarray) -> np.ndarray:
        pts = as_points(points)
        if pts.shape[1] != self.dim:
            raise PhaseSpaceError(
                f"{self.name}: expected points of dimension {self.dim}, got {pts.shape[1]}"
            )
        self.domain.require(pts)
        return pts

    @abstractmethod
    def evaluate_many(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Values at an (m, n) batch of points."""

    def evaluate(self, x: Union[PhasePoint, ArrayLike], t: float = 0.0) -> float:
        return float(self.evaluate_many(as_coords(x)[None, :], t)[0])

    def __call__(self, x: Union[PhasePoint, ArrayLike], t: float = 0.0) -> float:
        return self.evaluate(x, t)

    def gradient_many(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        pts = self._prepare(points)
        return fd_gradient_many(lambda y: self.evaluate_many(y, t), pts)

    def gradient(self, x: Union[PhasePoint, ArrayLike], t: float = 0.0) -> np.ndarray:
        return self.gradient_many(as_coords(x)[None, :], t)[0]

    def try_gradient_many(
        self, points: np.ndarray, t: float = 0.0
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Gradients where defined.

        Returns:
            (grads, ok): grads has NaN rows where ``ok`` is False
        """
        pts = as_points(points)
        try:
            return self.gradient_many(pts, t), np.ones(pts.shape[0], dtype=bool)
        except KinkPointError:
            pass
        grads = np.full(pts.shape, np.nan)
        ok = np.zeros(pts.shape[0], dtype=bool)
        for i, row in enumerate(pts):
            try:
                grads[i] = self.gradient_many(row[None, :], t)[0]
                ok[i] = True
            except KinkPointError:
                continue
        return grads, ok

    def hessian_many(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        if self.max_order < 2:
            raise DifferentiationError(
                f"{self.name}: second derivatives unavailable "
                f"(mode={self.mode.value}, regularity={self.regularity.value})"
            )
        pts = self._prepare(points)
        factor = NESTED_FD_STEP_FACTOR if self.hessian_is_nested_fd else FD_STEP_FACTOR
        hess = fd_jacobian_many(
            lambda y: self.gradient_many(y, t), pts, factor=factor, richardson=True
        )
        return 0.5 * (hess + np.swapaxes(hess, 1, 2))

    def hessian(self, x: Union[PhasePoint, ArrayLike], t: float = 0.0) -> np.ndarray:
        return self.hessian_many(as_coords(x)[None, :], t)[0]

    def vector_field_many(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        return apply_symplectic(self.gradient_many(points, t))

    def sample_box(self) -> Box:
        """The box to sample for norms: the support if declared, else the domain."""
        if self.support is not None:
            return self.support
        if self.domain.bounded:
            return self.domain
        raise DomainError(f"{self.name}: unbounded domain without declared support")


class FunctionField(ScalarField):
    """
    ScalarField backed by Python callables.

    ``func(points, t)`` must accept an (m, n) array and return (m,) values.
    Optional ``grad(points, t)`` and ``hess(points, t)`` give exact derivatives.
    """

    def __init__(
        self,
        func: Callable[[np.ndarray, float], np.ndarray],
        domain: Box,
        grad: Optional[Callable[[np.ndarray, float], np.ndarray]] = None,
        hess: Optional[Callable[[np.ndarray, float], np.ndarray]] = None,
        regularity: Regularity = Regularity.SMOOTH,
        **kwargs,
    ):
        if grad is not None:
            mode = GradientMode.EXACT
        elif regularity.has_gradient_everywhere:
            mode = GradientMode.FINITE_DIFFERENCE
        else:
            mode = GradientMode.FD_UNSAFE
        super().__init__(domain, mode=mode, regularity=regularity, **kwargs)
        self._func = func
        self._grad = grad
        self._hess = hess

    @property
    def hessian_is_nested_fd(self) -> bool:
        return self._grad is None

    def evaluate_many(self, points, t=0.0):
        pts = self._prepare(points)
        vals = np.asarray(self._func(pts, t), dtype=float).reshape(-1)
        if not np.all(np.isfinite(vals)):
            raise DomainError(f"{self.name}: non-finite value")
        return vals

    def gradient_many(self, points, t=0.0):
        if self._grad is None:
            return super().gradient_many(points, t)
        pts = self._prepare(points)
        return np.asarray(self._grad(pts, t), dtype=float).reshape(pts.shape)

    def hessian_many(self, points, t=0.0):
        if self._hess is None:
            return super().hessian_many(points, t)
        pts = self._prepare(points)
        n = pts.shape[1]
        return np.asarray(self._hess(pts, t), dtype=float).reshape(-1, n, n)


@dataclass(frozen=True)
class DiffeoSample:
    """
    A map of R^n with Jacobian access.

    ``forward`` and ``inverse`` act on (m, n) batches; ``jacobian`` returns
    (m, n, n). A missing Jacobian is replaced by central differences.
    """

    dim: int
    forward: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "diffeo"

    @classmethod
    def identity(cls, dim: int) -> "DiffeoSample":
        return cls(
            dim,
            forward=lambda x: np.array(as_points(x)),
            jacobian=lambda x: np.broadcast_to(
                np.eye(dim), (as_points(x).shape[0], dim, dim)
            ).copy(),
            inverse=lambda x: np.array(as_points(x)),
            name="identity",
        )

    @classmethod
    def linear(cls, matrix: np.ndarray, name: str = "linear") -> "DiffeoSample":
        mat = np.array(matrix, dtype=float)
        inv = np.linalg.inv(mat)
        n = mat.shape[0]
        return cls(
            n,
            forward=lambda x: as_points(x) @ mat.T,
            jacobian=lambda x: np.broadcast_to(mat, (as_points(x).shape[0], n, n)).copy(),
            inverse=lambda x: as_points(x) @ inv.T,
            name=name,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.forward(as_points(points)), dtype=float)

    def jacobian_many(self, points: np.ndarray) -> np.ndarray:
        pts = as_points(points)
        if self.jacobian is not None:
            jac = np.asarray(self.jacobian(pts), dtype=float)
        else:
            jac = fd_jacobian_many(self.forward, pts, richardson=True)
        return jac.reshape(pts.shape[0], self.dim, self.dim)

    def jacobian_at(self, x: Union[PhasePoint, ArrayLike]) -> np.ndarray:
        return self.jacobian_many(as_coords(x)[None, :])[0]

    def inverse_error(self, points: np.ndarray) -> float:
        """sup |forward(inverse(x)) - x| over the given points."""
        if self.inverse is None:
            raise DifferentiationError(f"{self.name}: no inverse available")
        pts = as_points(points)
        back = self.apply(np.asarray(self.inverse(pts), dtype=float))
        return float(np.max(np.linalg.norm(back - pts, axis=1)))


def _check_pair(f: ScalarField, g: ScalarField, x: np.ndarray) -> None:
    if f.dim != g.dim:
        raise DomainError(f"field dimensions differ: {f.dim} vs {g.dim}")
    if x.size != f.dim or x.size % 2:
        raise PhaseSpaceError(
            f"point of length {x.size} does not match field dimension {f.dim}"
        )


def poisson_bracket(
    f: ScalarField, g: ScalarField, x: Union[PhasePoint, ArrayLike], t: float = 0.0
) -> float:
    """{f, g}(x) = sum_i (df/dq_i dg/dp_i - df/dp_i dg/dq_i)."""
    coords = as_coords(x)
    _check_pair(f, g, coords)
    return float(bracket_of_gradients(f.gradient(coords, t), g.gradient(coords, t)))


def hamiltonian_vector_field(
    H: ScalarField, x: Union[PhasePoint, ArrayLike], t: float = 0.0
) -> np.ndarray:
    """X_H(x) = E DH(x) = (dH/dp, -dH/dq)."""
    coords = as_coords(x)
    if coords.size != H.dim or coords.size % 2:
        raise PhaseSpaceError("point does not match field dimension")
    return apply_symplectic(H.gradient(coords, t))


def bracket_gradient(
    dg: np.ndarray, dh: np.ndarray, hg: np.ndarray, hh: np.ndarray
) -> np.ndarray:
    """D{g, h} = Hess(g) E Dh - Hess(h) E Dg, batched over leading axes."""
    return np.einsum("...ij,...j->...i", hg, apply_symplectic(dh)) - np.einsum(
        "...ij,...j->...i", hh, apply_symplectic(dg)
    )


def jacobi_residual(
    f: ScalarField,
    g: ScalarField,
    h: ScalarField,
    x: Union[PhasePoint, ArrayLike],
    t: float = 0.0,
) -> float:
    """|{f,{g,h}} + {g,{h,f}} + {h,{f,g}}| at x."""
    coords = as_coords(x)
    _check_pair(f, g, coords)
    _check_pair(g, h, coords)
    for item in (f, g, h):
        if item.max_order < 2:
            raise DifferentiationError(
                f"{item.name}: Jacobi residual needs second derivatives "
                f"(mode={item.mode.value}, regularity={item.regularity.value})"
            )
    grads = [item.gradient(coords, t) for item in (f, g, h)]
    hessians = [item.hessian(coords, t) for item in (f, g, h)]
    total = 0.0
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        inner = bracket_gradient(grads[b], grads[c], hessians[b], hessians[c])
        total += float(bracket_of_gradients(grads[a], inner))
    return abs(total)


def _checked_jacobian(phi: DiffeoSample, x: np.ndarray) -> np.ndarray:
    if x.size != phi.dim or x.size % 2:
        raise PhaseSpaceError("point does not match map dimension")
    jac = phi.jacobian_at(x)
    if not np.all(np.isfinite(jac)):
        raise DifferentiationError(f"{phi.name}: non-finite Jacobian at {x.tolist()}")
    return jac


def symplecticity_defect(phi: DiffeoSample, x: Union[PhasePoint, ArrayLike]) -> float:
    """Frobenius norm of DPhi^T E DPhi - E at x."""
    coords = as_coords(x)
    jac = _checked_jacobian(phi, coords)
    if np.linalg.matrix_rank(jac) < jac.shape[0]:
        raise DifferentiationError(f"{phi.name}: singular Jacobian at {coords.tolist()}")
    e = symplectic_matrix(coords.size // 2)
    return float(np.linalg.norm(jac.T @ e @ jac - e, ord="fro"))


def bracket_relation_table(
    phi: DiffeoSample, x: Union[PhasePoint, ArrayLike]
) -> np.ndarray:
    """Entry (i, j) is {Phi_i, Phi_j}(x) = (DPhi E DPhi^T)_ij."""
    coords = as_coords(x)
    jac = _checked_jacobian(phi, coords)
    e = symplectic_matrix(coords.size // 2)
    return jac @ e @ jac.T


def nested_grid(box: Box, resolution: Union[int, Sequence[int]]) -> Grid:
    """
    Dyadic grid with at least ``resolution`` points per axis.

    Periodic axes get 2^m points and bounded axes 2^m + 1, so the grid for a
    larger resolution always contains the grid for a smaller one.
    """
    if isinstance(resolution, (int, np.integer)):
        shape = (int(resolution),) * box.dim
    else:
        shape = tuple(int(r) for r in resolution)
    if len(shape) != box.dim or min(shape) < 2:
        raise PhaseSpaceError(f"invalid grid resolution {shape} for dim {box.dim}")
    dyadic = tuple(
        2 ** (r - 1).bit_length() if per else 2 ** (r - 2).bit_length() + 1
        for r, per in zip(shape, box.periodic)
    )
    return box.grid(dyadic)


def _sampled_range(
    H: ScalarField,
    grid_resolution: Union[int, Sequence[int]],
    times: Optional[Sequence[float]],
) -> Tuple[float, float]:
    grid = nested_grid(H.sample_box(), grid_resolution)
    pts = grid.points()
    lo, hi = np.inf, -np.inf
    for t in times if times is not None else (0.0,):
        vals = H.evaluate_many(pts, float(t))
        lo = min(lo, float(np.min(vals)))
        hi = max(hi, float(np.max(vals)))
    logger.debug(f"range of {H.name} on {grid.shape}: [{lo:.6g}, {hi:.6g}]")
    return lo, hi


def c0_norm(
    H: ScalarField,
    grid_resolution: Union[int, Sequence[int]],
    times: Optional[Sequence[float]] = None,
) -> float:
    """
    sup H - inf H over a nested grid of the support (or domain) box.

    ``times`` samples the time parameter; the default is t = 0 only. The
    value never decreases as the resolution grows.
    """
    lo, hi = _sampled_range(H, grid_resolution, times)
    return hi - lo


def sup_norm(
    H: ScalarField,
    grid_resolution: Union[int, Sequence[int]],
    times: Optional[Sequence[float]] = None,
) -> float:
    """sup |H| over the same nested grid as :func:`c0_norm`."""
    lo, hi = _sampled_range(H, grid_resolution, times)
    return max(abs(lo), abs(hi))


def random_points(box: Box, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random points in a bounded box."""
    if not box.bounded:
        raise DomainError("cannot sample an unbounded box")
    lo = np.array(box.lower)
    return lo + rng.random((count, box.dim)) * box.widths


def points_list(points: np.ndarray) -> List[PhasePoint]:
    return [PhasePoint(row) for row in as_points(points)]
