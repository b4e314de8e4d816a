"""
Symplectic integration of Hamiltonian flows, commutator isotopies and
reconstruction of the Hamiltonian generating an isotopy.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import RegularGridInterpolator

from rigidlab.config import get_settings
from rigidlab.errors import IntegratorError, PhaseSpaceError
from rigidlab.fields import GridField
from rigidlab.phase import (
    ArrayLike,
    DiffeoSample,
    Grid,
    PhasePoint,
    ScalarField,
    apply_symplectic,
    as_coords,
    as_points,
    fd_jacobian_many,
)
from rigidlab.utils.logger import LogUtil

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntegratorConfig:
    """Implicit-midpoint parameters."""

    dt: float = 1e-3
    tolerance: float = 1e-12
    max_iterations: int = 50

    def __post_init__(self):
        if not self.dt > 0:
            raise IntegratorError(f"dt must be positive, got {self.dt}")
        if not self.tolerance > 0:
            raise IntegratorError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise IntegratorError("max_iterations must be at least 1")

    @classmethod
    def from_settings(cls) -> "IntegratorConfig":
        numeric = get_settings().numeric
        return cls(
            numeric.integrator_dt,
            numeric.integrator_tolerance,
            numeric.integrator_max_iterations,
        )

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "IntegratorConfig":
        base = cls.from_settings()
        data = data or {}
        return cls(
            float(data.get("dt", base.dt)),
            float(data.get("tolerance", base.tolerance)),
            int(data.get("max_iterations", base.max_iterations)),
        )


def step_count(t: float, dt: float) -> int:
    """Number of equal steps of size <= dt covering [0, |t|]."""
    if t == 0:
        return 0
    # guard against t/dt landing a hair above an integer
    return max(1, math.ceil(abs(t) / dt - 1e-9))


def _vector_field(H: ScalarField, points: np.ndarray, time: float) -> np.ndarray:
    return apply_symplectic(H.gradient_many(points, time))


def _midpoint_step(
    H: ScalarField, x: np.ndarray, h: float, cfg: IntegratorConfig, time: float
) -> np.ndarray:
    """
    One implicit-midpoint step y = x + h X_H((x + y) / 2), solved by
    fixed-point iteration point by point.
    """
    y = x + h * _vector_field(H, x, time)
    active = np.ones(x.shape[0], dtype=bool)
    for iteration in range(cfg.max_iterations):
        idx = np.flatnonzero(active)
        mid = 0.5 * (x[idx] + y[idx])
        y_new = x[idx] + h * _vector_field(H, mid, time + 0.5 * h)
        delta = np.max(np.abs(y_new - y[idx]), axis=1)
        y[idx] = y_new
        scale = 1.0 + np.max(np.abs(y_new), axis=1)
        done = delta <= cfg.tolerance * scale
        active[idx[done]] = False
        if not active.any():
            return y
    worst = x[np.flatnonzero(active)[0]]
    raise IntegratorError(
        f"fixed-point iteration did not converge in {cfg.max_iterations} "
        f"iterations (h={h:g}) starting from {worst.tolist()}"
    )


def integrate_points(
    H: ScalarField,
    points: np.ndarray,
    t: float,
    cfg: Optional[IntegratorConfig] = None,
    t0: float = 0.0,
) -> np.ndarray:
    """
    Flow a batch of points by the Hamiltonian flow of H for time t.

    Negative t integrates backwards, which realizes the inverse flow.
    """
    cfg = cfg or IntegratorConfig.from_settings()
    if not np.isfinite(t):
        raise IntegratorError(f"non-finite integration time {t}")
    x = np.array(as_points(points), dtype=float)
    if x.shape[1] != H.dim:
        raise PhaseSpaceError(f"points have dimension {x.shape[1]}, H has {H.dim}")
    n_steps = step_count(t, cfg.dt)
    if n_steps == 0:
        return x
    h = t / n_steps
    for i in range(n_steps):
        x = _midpoint_step(H, x, h, cfg, t0 + i * h)
        inside = H.domain.contains(x)
        if not inside.all():
            bad = x[int(np.argmin(inside))]
            raise IntegratorError(
                f"trajectory of {H.name} leaves the domain at {bad.tolist()}"
            )
    return x


def integrate_flow(
    H: ScalarField,
    x0: Union[PhasePoint, ArrayLike],
    t: float,
    cfg: Optional[IntegratorConfig] = None,
) -> PhasePoint:
    """phi_H^t(x0) by implicit midpoint steps."""
    y = integrate_points(H, as_coords(x0)[None, :], t, cfg)
    return PhasePoint(y[0])


def integrate_flow_with_jacobian(
    H: ScalarField,
    points: np.ndarray,
    t: float,
    cfg: Optional[IntegratorConfig] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Flow points and propagate the derivative of the discrete flow map.

    Per step J <- (I - h/2 E S)^{-1} (I + h/2 E S) J with S the Hessian of H
    at the step midpoint; this is the exact derivative of the midpoint map
    (up to the fixed-point tolerance) and is symplectic.

    Returns:
        (images, jacobians) with shapes (m, n) and (m, n, n)
    """
    cfg = cfg or IntegratorConfig.from_settings()
    x = np.array(as_points(points), dtype=float)
    m, n = x.shape
    jac = np.broadcast_to(np.eye(n), (m, n, n)).copy()
    n_steps = step_count(t, cfg.dt)
    if n_steps == 0:
        return x, jac
    h = t / n_steps
    eye = np.eye(n)
    for i in range(n_steps):
        y = _midpoint_step(H, x, h, cfg, i * h)
        hess = H.hessian_many(0.5 * (x + y), i * h + 0.5 * h)
        # E S: rows are (S_p, -S_q)
        es = np.concatenate([hess[:, n // 2 :, :], -hess[:, : n // 2, :]], axis=1)
        lhs = eye - 0.5 * h * es
        rhs = np.einsum("mij,mjk->mik", eye + 0.5 * h * es, jac)
        jac = np.linalg.solve(lhs, rhs)
        x = y
    return x, jac


def flow_map(
    H: ScalarField, t: float, cfg: Optional[IntegratorConfig] = None
) -> DiffeoSample:
    """The time-t flow map as a DiffeoSample with finite-difference Jacobian."""
    cfg = cfg or IntegratorConfig.from_settings()
    return DiffeoSample(
        H.dim,
        forward=lambda x: integrate_points(H, x, t, cfg),
        jacobian=None,
        inverse=lambda x: integrate_points(H, x, -t, cfg),
        name=f"flow of {H.name} for t={t:g}",
    )


class IsotopyRecipe(str, Enum):
    FLOW = "flow"
    COMMUTATOR = "commutator"
    EXTERNAL = "external"


@dataclass(frozen=True)
class FlowFactor:
    """The flow of ``field`` for time rate * t + offset."""

    field: ScalarField
    rate: float
    offset: float = 0.0

    def time(self, t: float) -> float:
        return self.rate * t + self.offset


@dataclass(frozen=True, eq=False)
class Isotopy:
    """
    A family of maps theta_t, t in [0, times[-1]].

    theta_t is the composition factors[0] o factors[1] o ... of flows, or an
    external callable ``external(points, t)`` for EXTERNAL isotopies.
    """

    recipe: IsotopyRecipe
    dim: int
    factors: Tuple[FlowFactor, ...] = ()
    times: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 1.0, 11))
    config: IntegratorConfig = field(default_factory=IntegratorConfig.from_settings)
    label: str = ""
    external: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    external_inverse: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.size < 1 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise IntegratorError("isotopy time grid must start at 0 and increase")
        object.__setattr__(self, "times", times)
        if self.recipe is IsotopyRecipe.EXTERNAL and self.external is None:
            raise IntegratorError("external isotopy needs a map callable")

    def apply(self, points: np.ndarray, t: float) -> np.ndarray:
        x = np.array(as_points(points), dtype=float)
        if self.recipe is IsotopyRecipe.EXTERNAL:
            return np.asarray(self.external(x, t), dtype=float)
        for factor in reversed(self.factors):
            x = integrate_points(factor.field, x, factor.time(t), self.config)
        return x

    def apply_inverse(self, points: np.ndarray, t: float) -> np.ndarray:
        x = np.array(as_points(points), dtype=float)
        if self.recipe is IsotopyRecipe.EXTERNAL:
            return self._external_inverse(x, t)
        for factor in self.factors:
            x = integrate_points(factor.field, x, -factor.time(t), self.config)
        return x

    def _external_inverse(self, y: np.ndarray, t: float) -> np.ndarray:
        if self.external_inverse is not None:
            return np.asarray(self.external_inverse(y, t), dtype=float)
        # Newton on external(x, t) = y starting from x = y
        x = y.copy()
        forward = lambda z: self.external(z, t)
        for _ in range(self.config.max_iterations):
            residual = forward(x) - y
            if np.max(np.abs(residual)) <= 1e-12 * (1.0 + np.max(np.abs(y))):
                return x
            jac = fd_jacobian_many(forward, x)
            try:
                x = x - np.linalg.solve(jac, residual[..., None])[..., 0]
            except np.linalg.LinAlgError as e:
                raise IntegratorError(f"isotopy inversion failed: {e}") from e
        raise IntegratorError("isotopy inversion did not converge")

    def _apply_shifted(self, x: np.ndarray, t: float, tau: float) -> np.ndarray:
        """theta_{t+tau}(x), each factor advanced by its own extra time rate * tau."""
        if self.recipe is IsotopyRecipe.EXTERNAL:
            return np.asarray(self.external(x, t + tau), dtype=float)
        for factor in reversed(self.factors):
            x = integrate_points(factor.field, x, factor.time(t), self.config)
            if factor.rate != 0.0:
                x = integrate_points(factor.field, x, factor.rate * tau, self.config)
        return x

    def velocity(
        self, points: np.ndarray, t: float, delta: Optional[float] = None
    ) -> np.ndarray:
        """
        V_t(y) = d/dtau theta_{t+tau}(theta_t^{-1}(y)) at tau = 0, by central
        differences with step ``delta`` (default: the integrator step).
        """
        delta = self.config.dt if delta is None else float(delta)
        x = self.apply_inverse(points, t)
        plus = self._apply_shifted(x, t, delta)
        minus = self._apply_shifted(x, t, -delta)
        return (plus - minus) / (2.0 * delta)

    def map_at(self, t: float) -> DiffeoSample:
        return DiffeoSample(
            self.dim,
            forward=lambda x: self.apply(x, t),
            inverse=lambda x: self.apply_inverse(x, t),
            name=f"{self.label or self.recipe.value} at t={t:g}",
        )

    def step_displacements(self, points: np.ndarray) -> np.ndarray:
        """sup over points of |theta_{t_{i+1}} - theta_{t_i}| for consecutive grid times."""
        images = [self.apply(points, float(t)) for t in self.times]
        return np.array(
            [
                float(np.max(np.linalg.norm(b - a, axis=1)))
                for a, b in zip(images[:-1], images[1:])
            ]
        )


def flow_isotopy(
    H: ScalarField,
    cfg: Optional[IntegratorConfig] = None,
    times: Optional[Sequence[float]] = None,
) -> Isotopy:
    cfg = cfg or IntegratorConfig.from_settings()
    return Isotopy(
        IsotopyRecipe.FLOW,
        H.dim,
        (FlowFactor(H, 1.0, 0.0),),
        np.linspace(0.0, 1.0, 11) if times is None else times,
        cfg,
        label=f"flow of {H.name}",
    )


def commutator_isotopy(
    H: ScalarField,
    K: ScalarField,
    s: float,
    cfg: Optional[IntegratorConfig] = None,
    times: Optional[Sequence[float]] = None,
) -> Isotopy:
    """t -> phi^t psi^s phi^{-t} psi^{-s}, phi the flow of H and psi the flow of K."""
    if H.dim != K.dim:
        raise PhaseSpaceError("H and K live in different dimensions")
    cfg = cfg or IntegratorConfig.from_settings()
    factors = (
        FlowFactor(H, 1.0, 0.0),
        FlowFactor(K, 0.0, float(s)),
        FlowFactor(H, -1.0, 0.0),
        FlowFactor(K, 0.0, -float(s)),
    )
    return Isotopy(
        IsotopyRecipe.COMMUTATOR,
        H.dim,
        factors,
        np.linspace(0.0, 1.0, 11) if times is None else times,
        cfg,
        label=f"commutator of ({H.name}, {K.name}) at s={s:g}",
    )


def commutation_defect(
    H: ScalarField,
    K: ScalarField,
    s: float,
    t: float,
    grid: Union[Grid, np.ndarray],
    cfg: Optional[IntegratorConfig] = None,
) -> float:
    """sup over the grid of |phi^t psi^s (x) - psi^s phi^t (x)|."""
    if s == 0 or t == 0:
        return 0.0
    cfg = cfg or IntegratorConfig.from_settings()
    pts = grid.points() if isinstance(grid, Grid) else as_points(grid)
    a = integrate_points(H, integrate_points(K, pts, s, cfg), t, cfg)
    b = integrate_points(K, integrate_points(H, pts, t, cfg), s, cfg)
    defect = float(np.max(np.linalg.norm(a - b, axis=1)))
    logger.debug(f"commutation defect of {H.name}, {K.name} at s={s}, t={t}: {defect:.3e}")
    return defect


def _closedness_residual(w: np.ndarray, grid: Grid) -> float:
    """sup |d_j w_i - d_i w_j| over interior grid points."""
    n = len(grid.shape)
    spacing = grid.spacing
    worst = 0.0
    interior = tuple(slice(1, -1) if s > 2 else slice(None) for s in grid.shape)
    for i in range(n):
        for j in range(i + 1, n):
            dj_wi = np.gradient(w[i], spacing[j], axis=j, edge_order=2)
            di_wj = np.gradient(w[j], spacing[i], axis=i, edge_order=2)
            curl = (dj_wi - di_wj)[interior]
            if curl.size:
                worst = max(worst, float(np.max(np.abs(curl))))
    return worst


def _path_integrate(w: np.ndarray, grid: Grid) -> np.ndarray:
    """
    Integrate the closed 1-form w from the lower grid corner, first along
    axis 0, then axis 1 at fixed earlier coordinates, and so on.
    """
    n = len(grid.shape)
    acc = np.zeros(())
    for axis in range(n):
        index = tuple([slice(None)] * (axis + 1) + [0] * (n - axis - 1))
        line = w[axis][index]
        integral = cumulative_trapezoid(line, x=grid.axes[axis], axis=axis, initial=0)
        acc = acc[..., None] + integral
    return acc


def reconstruct_hamiltonian(
    iso: Isotopy,
    grid: Grid,
    t: float,
    curl_tolerance: Optional[float] = None,
    delta: Optional[float] = None,
) -> GridField:
    """
    The Hamiltonian H_t generating ``iso`` at time t, sampled on ``grid``.

    V_t is measured by central time differences; DH_t = -E V_t must be
    closed, and is then line-integrated and normalized to 0 at the box center.
    """
    tol = get_settings().numeric.curl_tolerance if curl_tolerance is None else curl_tolerance
    pts = grid.points()
    velocity = iso.velocity(pts, t, delta)
    d = pts.shape[1] // 2
    # -E V = (-V_p, V_q)
    dh = np.concatenate([-velocity[:, d:], velocity[:, :d]], axis=1)
    w = np.stack([grid.reshape(dh[:, i]) for i in range(pts.shape[1])])

    residual = _closedness_residual(w, grid)
    logger.debug(f"closedness residual of {iso.label}: {residual:.3e}")
    if residual > tol:
        raise IntegratorError(
            f"closedness test failed for {iso.label}: curl {residual:.3e} > {tol:.1e}"
        )

    values = _path_integrate(w, grid)
    LogUtil.log_array(logger, f"reconstructed generator of {iso.label}", values)
    method = "cubic" if min(grid.shape) >= 4 else "linear"
    center = RegularGridInterpolator(grid.axes, values, method=method)(
        grid.box.center[None, :]
    )[0]
    return GridField(grid, values - center, name=f"generator of {iso.label} at t={t:g}")
