"""
C0-rigidity of symplectic maps, one computation at a time.

A symplectic map has {Q_i, P_i} = 1 and all other component brackets 0.
The tilde components Q_i + sum_k P_k / sqrt(d), P_i + sum_k Q_k / sqrt(d)
have vanishing diagonal brackets, the coupling matrix d I - 1 has the
all-equal vector as kernel, and A = DPhi E is invertible, which forces the
common value C of {Q_i, P_i} to be locally constant; at infinity it is 1.
Limit experiments measure these facts on C0-convergent families.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import sympy
from scipy.linalg import expm

from rigidlab.errors import DifferentiationError, RigidityError
from rigidlab.fields import LinearCombinationField, scaled
from rigidlab.flow import IntegratorConfig, integrate_flow_with_jacobian, integrate_points
from rigidlab.hamlang.field import ExpressionField
from rigidlab.phase import (
    Box,
    DiffeoSample,
    FunctionField,
    GradientMode,
    PhasePoint,
    Regularity,
    ScalarField,
    as_coords,
    as_points,
    bracket_of_gradients,
    bracket_relation_table,
    bracket_gradient,
    symplectic_matrix,
)

logger = logging.getLogger(__name__)

SYMPLECTIC_TOLERANCE = 1e-8
TABLE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class CouplingMatrix:
    """d I - 1 over the integers, with exact rank and kernel."""

    d: int
    matrix: sympy.Matrix
    rank: int
    kernel: Tuple[Tuple[sympy.Rational, ...], ...]

    @property
    def determinant(self) -> sympy.Integer:
        return self.matrix.det()


def coupling_matrix(d: int) -> CouplingMatrix:
    if d < 1:
        raise RigidityError(f"dimension must be positive, got {d}")
    mat = sympy.Matrix(d, d, lambda i, j: d - 1 if i == j else -1)
    kernel = tuple(tuple(v) for v in mat.nullspace())
    return CouplingMatrix(d, mat, int(mat.rank()), kernel)


def coupling_matrix_kernel(d: int) -> Tuple[int, List[Tuple[sympy.Rational, ...]]]:
    """Rank and kernel basis of d I - 1 by exact rational elimination."""
    cm = coupling_matrix(d)
    logger.debug(f"coupling matrix d={d}: rank {cm.rank}, kernel dim {len(cm.kernel)}")
    return cm.rank, list(cm.kernel)


class MapComponent(ScalarField):
    """Component i of a DiffeoSample as a scalar field."""

    def __init__(self, phi: DiffeoSample, index: int, name: str, support: Optional[Box] = None):
        super().__init__(
            Box.unbounded(phi.dim),
            mode=(
                GradientMode.EXACT
                if phi.jacobian is not None
                else GradientMode.FINITE_DIFFERENCE
            ),
            regularity=Regularity.SMOOTH,
            support=support,
            name=name,
        )
        self.phi = phi
        self.index = index

    @property
    def hessian_is_nested_fd(self) -> bool:
        return self.phi.jacobian is None

    def evaluate_many(self, points, t=0.0):
        return self.phi.apply(self._prepare(points))[:, self.index]

    def gradient_many(self, points, t=0.0):
        return self.phi.jacobian_many(self._prepare(points))[:, self.index, :]


def _component_names(d: int) -> List[str]:
    return [f"Q{i + 1}" for i in range(d)] + [f"P{i + 1}" for i in range(d)]


class RigidityMap:
    """
    A map of R^{2d} given by component fields Q_1..Q_d, P_1..P_d.

    ``support`` declares the box outside which the map is the identity.
    """

    def __init__(
        self,
        components: Sequence[ScalarField],
        name: str = "map",
        support: Optional[Box] = None,
        inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        source: Optional[DiffeoSample] = None,
    ):
        if not components or len(components) % 2:
            raise RigidityError("a map of R^2d needs 2d components")
        dims = {c.dim for c in components}
        if dims != {len(components)}:
            raise RigidityError(
                f"components live in dimensions {sorted(dims)}, expected {len(components)}"
            )
        self.components = list(components)
        self.name = name
        self.support = support
        self.inverse = inverse
        # whole-map evaluation, when the components are slices of one map
        self._source = source

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.dim // 2

    def Q(self, i: int) -> ScalarField:
        return self.components[i]

    def P(self, i: int) -> ScalarField:
        return self.components[self.d + i]

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = as_points(points)
        if self._source is not None:
            return self._source.apply(pts)
        return np.stack([c.evaluate_many(pts) for c in self.components], axis=1)

    def jacobian_many(self, points: np.ndarray) -> np.ndarray:
        pts = as_points(points)
        if self._source is not None:
            return self._source.jacobian_many(pts)
        return np.stack([c.gradient_many(pts) for c in self.components], axis=1)

    @property
    def max_order(self) -> int:
        return min(c.max_order for c in self.components)

    @property
    def diffeo(self) -> DiffeoSample:
        return DiffeoSample(self.dim, self.apply, self.jacobian_many, self.inverse, self.name)

    @classmethod
    def identity(cls, d: int) -> "RigidityMap":
        return cls.from_expressions(
            [f"q{i + 1}" for i in range(d)] + [f"p{i + 1}" for i in range(d)], name="identity"
        )

    @classmethod
    def linear(cls, matrix: np.ndarray, name: str = "linear") -> "RigidityMap":
        mat = np.array(matrix, dtype=float)
        n = mat.shape[0]
        if mat.shape != (n, n) or n % 2:
            raise RigidityError(f"linear map needs an even square matrix, got {mat.shape}")
        names = _component_names(n // 2)
        components = [
            FunctionField(
                lambda pts, t, row=row: pts @ row,
                Box.unbounded(n),
                grad=lambda pts, t, row=row: np.tile(row, (pts.shape[0], 1)),
                hess=lambda pts, t: np.zeros((pts.shape[0], n, n)),
                name=names[i],
            )
            for i, row in enumerate(mat)
        ]
        inv = np.linalg.inv(mat)
        return cls(components, name, inverse=lambda x: as_points(x) @ inv.T)

    @classmethod
    def linear_symplectic(cls, S: np.ndarray, name: str = "exp(E S)") -> "RigidityMap":
        """exp(E S) for a symmetric S: the time-one flow of x^T S x / 2."""
        S = np.array(S, dtype=float)
        S = 0.5 * (S + S.T)
        return cls.linear(expm(symplectic_matrix(S.shape[0] // 2) @ S), name)

    @classmethod
    def from_expressions(
        cls,
        sources: Sequence[str],
        name: str = "",
        support: Optional[Box] = None,
    ) -> "RigidityMap":
        n = len(sources)
        if n % 2:
            raise RigidityError("need an even number of component expressions")
        names = _component_names(n // 2)
        components = [
            ExpressionField.from_source(src, n // 2, name=names[i])
            for i, src in enumerate(sources)
        ]
        return cls(components, name or "(" + ", ".join(sources) + ")", support)

    @classmethod
    def from_diffeo(cls, phi: DiffeoSample, support: Optional[Box] = None) -> "RigidityMap":
        names = _component_names(phi.dim // 2)
        components = [MapComponent(phi, i, names[i], support) for i in range(phi.dim)]
        return cls(components, phi.name, support, phi.inverse, source=phi)

    @classmethod
    def from_flow(
        cls,
        H: ScalarField,
        t: float = 1.0,
        cfg: Optional[IntegratorConfig] = None,
        support: Optional[Box] = None,
    ) -> "RigidityMap":
        """Time-t flow with the exact derivative of the discrete flow map."""
        cfg = cfg or IntegratorConfig.from_settings()
        phi = DiffeoSample(
            H.dim,
            forward=lambda x: integrate_points(H, x, t, cfg),
            jacobian=lambda x: integrate_flow_with_jacobian(H, x, t, cfg)[1],
            inverse=lambda x: integrate_points(H, x, -t, cfg),
            name=f"flow of {H.name} for t={t:g}",
        )
        return cls.from_diffeo(phi, support if support is not None else H.support)


def tilde_transform(phi: RigidityMap) -> RigidityMap:
    """Q~_i = Q_i + sum_k P_k / sqrt(d),  P~_i = P_i + sum_k Q_k / sqrt(d)."""
    d = phi.d
    w = 1.0 / np.sqrt(d)
    qs = [phi.Q(k) for k in range(d)]
    ps = [phi.P(k) for k in range(d)]
    names = _component_names(d)
    components = [
        LinearCombinationField(
            [(1.0, phi.Q(i))] + [(w, p) for p in ps], name=names[i] + "~"
        )
        for i in range(d)
    ] + [
        LinearCombinationField(
            [(1.0, phi.P(i))] + [(w, q) for q in qs], name=names[d + i] + "~"
        )
        for i in range(d)
    ]
    return RigidityMap(components, f"tilde({phi.name})", phi.support)


def diagonal_brackets(phi: RigidityMap, points: np.ndarray) -> np.ndarray:
    """{Q_i, P_i} at each point, shape (m, d)."""
    jac = phi.jacobian_many(points)
    d = phi.d
    return np.stack(
        [bracket_of_gradients(jac[:, i, :], jac[:, d + i, :]) for i in range(d)], axis=1
    )


def constancy_system(
    phi: RigidityMap, x: Union[PhasePoint, Sequence[float], np.ndarray]
) -> Tuple[np.ndarray, float]:
    """A = DPhi(x) E and det A; a singular Jacobian gives det 0."""
    coords = as_coords(x)
    jac = phi.jacobian_many(coords[None, :])[0]
    if not np.all(np.isfinite(jac)):
        raise RigidityError(f"{phi.name}: non-finite Jacobian at {coords.tolist()}")
    a = jac @ symplectic_matrix(phi.d)
    det = float(np.linalg.det(a)) if np.linalg.matrix_rank(a) == a.shape[0] else 0.0
    return a, det


@dataclass
class JacobiEliminationReport:
    entries: pd.DataFrame
    max_abs: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_abs <= self.tolerance


def jacobi_elimination_check(
    phi: RigidityMap,
    x: Union[PhasePoint, Sequence[float], np.ndarray],
    tolerance: float = 1e-6,
) -> JacobiEliminationReport:
    """{Q_i, {Q_j, P_j}} and {P_i, {Q_j, P_j}} for all i != j."""
    if phi.max_order < 2:
        raise DifferentiationError(f"{phi.name}: components lack second derivatives")
    coords = as_coords(x)[None, :]
    d = phi.d
    grads = [c.gradient_many(coords)[0] for c in phi.components]
    hessians = [c.hessian_many(coords)[0] for c in phi.components]
    rows = []
    for j in range(d):
        inner = bracket_gradient(grads[j], grads[d + j], hessians[j], hessians[d + j])
        for i in range(d):
            if i == j:
                continue
            for kind, outer in (("Q", grads[i]), ("P", grads[d + i])):
                rows.append(
                    {
                        "i": i + 1,
                        "j": j + 1,
                        "outer": kind,
                        "value": float(bracket_of_gradients(outer, inner)),
                    }
                )
    entries = pd.DataFrame(rows, columns=["i", "j", "outer", "value"])
    max_abs = float(entries["value"].abs().max()) if rows else 0.0
    return JacobiEliminationReport(entries, max_abs, tolerance)


def symplectic_defects(jac: np.ndarray) -> np.ndarray:
    """Per-point Frobenius norm of J^T E J - E."""
    e = symplectic_matrix(jac.shape[1] // 2)
    gram = np.einsum("mki,kl,mlj->mij", jac, e, jac)
    return np.linalg.norm(gram - e, axis=(1, 2))


def table_deviation(tables: np.ndarray) -> np.ndarray:
    """Per-point max |table - E|."""
    d = tables.shape[1] // 2
    return np.max(np.abs(tables - symplectic_matrix(d)), axis=(1, 2))


def bracket_tables(jac: np.ndarray) -> np.ndarray:
    """{Phi_i, Phi_j} = DPhi E DPhi^T for a batch of Jacobians."""
    e = symplectic_matrix(jac.shape[1] // 2)
    return np.einsum("mik,kl,mjl->mij", jac, e, jac)


def c_statistics(tables: np.ndarray) -> Tuple[float, float]:
    """Mean over points of the mean {Q_i, P_i}, and its variance across points."""
    d = tables.shape[1] // 2
    per_point = np.mean([tables[:, i, d + i] for i in range(d)], axis=0)
    return float(np.mean(per_point)), float(np.var(per_point))


def mollified_jacobian(
    phi: RigidityMap, points: np.ndarray, spacing: float, width: int = 3
) -> np.ndarray:
    """
    Gaussian-weighted least-squares Jacobian over an axis stencil of
    +-width cells.
    """
    pts = as_points(points)
    m, n = pts.shape
    ks = np.array([k for k in range(-width, width + 1) if k != 0], dtype=float)
    weights = np.sqrt(np.exp(-0.5 * (ks / (0.5 * width)) ** 2))
    center = phi.apply(pts)
    jac = np.empty((m, n, n))
    for axis in range(n):
        offsets = np.zeros((ks.size, n))
        offsets[:, axis] = ks * spacing
        stencil = (pts[:, None, :] + offsets[None, :, :]).reshape(-1, n)
        vals = phi.apply(stencil).reshape(m, ks.size, n) - center[:, None, :]
        # weighted slope through the centre value
        num = np.einsum("k,k,mkj->mj", weights**2, ks * spacing, vals)
        den = float(np.sum(weights**2 * (ks * spacing) ** 2))
        jac[:, :, axis] = num / den
    return jac


@dataclass
class LimitRigidityReport:
    frame: pd.DataFrame
    passed: bool
    tolerance: float

    def to_csv(self, path) -> None:
        self.frame.to_csv(path, index=False, float_format="%.17g", na_rep="")


def _collar_points(grid_points: np.ndarray, support: Optional[Box]) -> np.ndarray:
    if support is None:
        return np.zeros((0, grid_points.shape[1]))
    return grid_points[~support.contains(grid_points)]


def limit_rigidity_experiment(
    family: Union[Sequence[RigidityMap], Callable[[int], RigidityMap]],
    limit: RigidityMap,
    n_max: int,
    box: Box,
    resolution: int = 9,
    support: Optional[Box] = None,
    tolerance: float = TABLE_TOLERANCE,
) -> LimitRigidityReport:
    """
    Sup distance of each member to the declared limit, member bracket tables
    against E, and a final row for the limit itself from mollified
    finite differences.

    Args:
        family: maps Phi_n, n = 1..n_max
        limit: declared C0 limit
        n_max: number of members
        box: sampling box (should contain a collar around ``support``)
        resolution: grid points per axis
        support: box outside which every map is the identity
        tolerance: allowed table deviation for the limit

    Returns:
        LimitRigidityReport with columns n, sup_distance, max_table_deviation,
        C_estimate, C_variance, at_infinity_deviation
    """
    grid = box.grid(resolution)
    pts = grid.points()
    support = support if support is not None else limit.support
    collar = _collar_points(pts, support)
    target = limit.apply(pts)
    rows = []
    for n in range(1, n_max + 1):
        member = family(n) if callable(family) else family[n - 1]
        jac = member.jacobian_many(pts)
        defect = float(np.max(symplectic_defects(jac)))
        if defect > SYMPLECTIC_TOLERANCE:
            raise RigidityError(
                f"member n={n} ({member.name}) is not symplectic: defect {defect:.3e}"
            )
        tables = bracket_tables(jac)
        c_mean, c_var = c_statistics(tables)
        at_infinity = (
            float(np.max(table_deviation(bracket_tables(member.jacobian_many(collar)))))
            if collar.shape[0]
            else np.nan
        )
        rows.append(
            {
                "n": str(n),
                "sup_distance": float(
                    np.max(np.linalg.norm(member.apply(pts) - target, axis=1))
                ),
                "max_table_deviation": float(np.max(table_deviation(tables))),
                "C_estimate": c_mean,
                "C_variance": c_var,
                "at_infinity_deviation": at_infinity,
            }
        )
        logger.debug(f"limit experiment n={n}: {rows[-1]}")

    distances = [r["sup_distance"] for r in rows]
    if len(distances) > 1 and distances[-1] > distances[0] * (1 + 1e-9) + 1e-12:
        raise RigidityError(
            "family does not approach the limit: "
            f"sup distance {distances[0]:.3e} -> {distances[-1]:.3e}"
        )

    spacing = float(np.min(grid.spacing))
    limit_tables = bracket_tables(mollified_jacobian(limit, pts, spacing))
    c_mean, c_var = c_statistics(limit_tables)
    limit_collar = (
        float(
            np.max(
                table_deviation(
                    bracket_tables(mollified_jacobian(limit, collar, spacing))
                )
            )
        )
        if collar.shape[0]
        else np.nan
    )
    limit_deviation = float(np.max(table_deviation(limit_tables)))
    rows.append(
        {
            "n": "limit",
            "sup_distance": 0.0,
            "max_table_deviation": limit_deviation,
            "C_estimate": c_mean,
            "C_variance": c_var,
            "at_infinity_deviation": limit_collar,
        }
    )
    frame = pd.DataFrame(
        rows,
        columns=[
            "n",
            "sup_distance",
            "max_table_deviation",
            "C_estimate",
            "C_variance",
            "at_infinity_deviation",
        ],
    )
    passed = limit_deviation <= tolerance and (
        np.isnan(limit_collar) or limit_collar <= tolerance
    )
    logger.info(
        f"limit rigidity for {limit.name}: "
        f"table deviation {limit_deviation:.3e}, C={c_mean:.9g}"
    )
    return LimitRigidityReport(frame, bool(passed), tolerance)


def oscillating_map(n: int) -> RigidityMap:
    """
    (q + sin(2 pi n q) / (2 pi n)^2, p / (1 + cos(2 pi n q) / (2 pi n))) on
    the cylinder: symplectic, C0-close to the identity, with derivatives
    that keep oscillating.
    """
    if n < 1:
        raise RigidityError("family index starts at 1")
    k = float(2 * np.pi * n)
    Q = f"q1 + sin({k!r}*q1)/{k * k!r}"
    P = f"p1/(1 + cos({k!r}*q1)/{k!r})"
    return RigidityMap.from_expressions([Q, P], name=f"oscillating n={n}")


def oscillating_c0_bound(n: int, p_max: float) -> float:
    """sup |Phi_n - id| over |p| <= p_max."""
    a = 1.0 / (2 * np.pi * n) ** 2
    b = 1.0 / (2 * np.pi * n)
    return float(np.hypot(a, p_max * b / (1 - b)))


def flow_family_member(
    H: ScalarField, n: int, cfg: Optional[IntegratorConfig] = None
) -> RigidityMap:
    """Time-one flow of H / n."""
    return RigidityMap.from_flow(scaled(H, 1.0 / n), 1.0, cfg, H.support)


def flow_family_c0_bound(H: ScalarField, n: int, box: Box, resolution: int = 17) -> float:
    """sup |X_H| / n over the box bounds |phi^1_{H/n} - id| when orbits stay there."""
    pts = box.grid(resolution).points()
    return float(np.max(np.linalg.norm(H.vector_field_many(pts), axis=1))) / n


def symmetric_from_seed(d: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    a = rng.standard_normal((2 * d, 2 * d)) * scale
    return 0.5 * (a + a.T)


def relation_tables(phi: RigidityMap, points: np.ndarray) -> np.ndarray:
    """Bracket relation tables of the map at each point."""
    return np.stack([bracket_relation_table(phi.diffeo, x) for x in as_points(points)])
