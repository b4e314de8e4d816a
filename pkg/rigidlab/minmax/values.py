"""
Min-max critical values c(1, S), c(mu, S), the gamma invariant and lower
bounds on the spectral norm of Hamiltonian diffeomorphisms.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from rigidlab.config import settings
from rigidlab.errors import MinMaxError
from rigidlab.fields import difference
from rigidlab.gfqi.models import GFQI
from rigidlab.gfqi.operations import base_flow_image, fiber_sum, negate, ominus
from rigidlab.minmax.filtration import (
    build_filtration,
    grid_axes,
    normalize_resolution,
    sample_vertices,
)
from rigidlab.minmax.persistence import PersistenceDiagram, compute_persistence
from rigidlab.phase import ScalarField, c0_norm

logger = logging.getLogger(__name__)

UNIT = "unit"
FUNDAMENTAL = "fundamental"
# fiber half-width margin over the exit level of the negative directions
RADIUS_MARGIN = 1.25


@dataclass(frozen=True)
class BoxParameters:
    radius: float
    c_box: float
    critical_bound: float
    offset_bound: float


@dataclass(frozen=True)
class MinMaxValues:
    """Both min-max values of one GFQI, read off one diagram."""

    unit: float
    fundamental: float
    gamma: float
    cell_step: float
    index: int
    box: BoxParameters
    diagram: PersistenceDiagram = field(repr=False)

    def value(self, which: str) -> float:
        if which == UNIT:
            return self.unit
        if which == FUNDAMENTAL:
            return self.fundamental
        raise MinMaxError(f"unknown class {which!r}; expected 'unit' or 'fundamental'")


def _inner_resolution(S: GFQI, res: Tuple[int, ...]) -> Tuple[int, ...]:
    return res[: S.n] + tuple(max(r, 9) for r in res[S.n :])


def box_parameters(
    S: GFQI, resolution: Union[int, Sequence[int], None] = None, c_box: Optional[float] = None
) -> BoxParameters:
    """
    Fiber half-width R and saturation level c_box.

    c_box defaults to one above max|S| over the critical region
    T^n x [-C, C]^k. R is the larger of C + 1 and the radius at which
    every negative direction of Q drops below -c_box despite the bounded
    part S - Q.
    """
    res = normalize_resolution(S, resolution)
    inner = sample_vertices(S, _inner_resolution(S, res), S.cutoff)
    critical_bound = float(np.max(np.abs(inner)))
    if S.k == 0:
        offset_bound = critical_bound
        radius = S.fiber_radius
    else:
        outer = sample_vertices(S, _inner_resolution(S, res), S.fiber_radius)
        axes = grid_axes(S.n, S.k, _inner_resolution(S, res), S.fiber_radius)
        mesh = np.meshgrid(*axes, indexing="ij")
        xi = np.stack([m.reshape(-1) for m in mesh[S.n :]], axis=1)
        offset_bound = float(np.max(np.abs(outer.reshape(-1) - S.quad.values(xi))))
    if c_box is None:
        c_box = critical_bound + 1.0
    elif not c_box > critical_bound:
        raise MinMaxError(
            f"c_box={c_box:g} too small: "
            f"|S| reaches {critical_bound:.6g} on the critical region"
        )
    if S.k:
        lam = S.quad.min_abs_eigenvalue
        radius = max(S.fiber_radius, RADIUS_MARGIN * np.sqrt((c_box + offset_bound) / lam))
    return BoxParameters(float(radius), float(c_box), critical_bound, offset_bound)


def cell_step(S: GFQI, vertex_values: np.ndarray, radius: float) -> float:
    """
    Largest oscillation of S over a top cell meeting the critical region.
    """
    res = vertex_values.shape
    wmax = vertex_values
    wmin = vertex_values
    for a in range(S.dim):
        wmax = np.maximum(wmax, np.roll(wmax, -1, axis=a))
        wmin = np.minimum(wmin, np.roll(wmin, -1, axis=a))
    inside = np.ones(res, dtype=bool)
    for j, axis in enumerate(grid_axes(S.n, S.k, res, radius)[S.n :]):
        a = S.n + j
        ok = np.zeros(axis.shape[0], dtype=bool)
        ok[:-1] = np.minimum(np.abs(axis[:-1]), np.abs(axis[1:])) <= S.fiber_radius + 1e-12
        shape = [1] * S.dim
        shape[a] = axis.shape[0]
        inside &= ok.reshape(shape)
    if not np.any(inside):
        raise MinMaxError("fiber grid has no cell inside the critical region")
    return float(np.max((wmax - wmin)[inside]))


def _single_essential(diagram: PersistenceDiagram, degree: int, which: str) -> float:
    classes = diagram.essential(degree)
    if len(classes) != 1:
        raise MinMaxError(
            f"expected one essential class in degree {degree} for the {which} class, "
            f"found {len(classes)} (census {diagram.essential_census()}); "
            "invalid GFQI or c_box too small"
        )
    return classes[0].birth


def minmax_values(
    S: GFQI,
    resolution: Union[int, Sequence[int], None] = None,
    c_box: Optional[float] = None,
) -> MinMaxValues:
    """
    c(1, S) and c(mu, S) as births of the essential classes in degrees
    i^- and i^- + n.
    """
    box = box_parameters(S, resolution, c_box)
    filtration = build_filtration(S, resolution, box.c_box, box.radius)
    diagram = compute_persistence(filtration)
    step = cell_step(S, filtration.vertex_values, box.radius)

    unit = _single_essential(diagram, S.index, UNIT)
    fundamental = _single_essential(diagram, S.index + S.n, FUNDAMENTAL)
    gap = fundamental - unit
    if gap < -step:
        logger.warning(
            f"{S.name or 'S'}: c(1)={unit:.6g} exceeds c(mu)={fundamental:.6g} "
            f"beyond one cell ({step:.3g})"
        )
    if gap <= step:
        if gap != 0:
            logger.debug(f"{S.name or 'S'}: gamma {gap:.3g} within one cell, reported as 0")
        gap = 0.0
    logger.debug(
        f"{S.name or 'S'}: c(1)={unit:.9g} c(mu)={fundamental:.9g} cell={step:.3g}"
    )
    return MinMaxValues(unit, fundamental, gap, step, S.index, box, diagram)


def minmax_value(
    S: GFQI,
    which: str = UNIT,
    resolution: Union[int, Sequence[int], None] = None,
    c_box: Optional[float] = None,
) -> float:
    return minmax_values(S, resolution, c_box).value(which)


def gamma_invariant(
    S: GFQI, resolution: Union[int, Sequence[int], None] = None, c_box: Optional[float] = None
) -> float:
    """gamma(L) = c(mu, S) - c(1, S), reported as 0 within one cell."""
    return minmax_values(S, resolution, c_box).gamma


def gamma_distance(
    S1: GFQI,
    S2: GFQI,
    resolution: Union[int, Sequence[int], None] = None,
    c_box: Optional[float] = None,
) -> float:
    return gamma_invariant(ominus(S1, S2), resolution, c_box)


def _critical_grid(S: GFQI, resolution: Optional[int]) -> np.ndarray:
    res = normalize_resolution(S, resolution)
    axes = grid_axes(S.n, S.k, _inner_resolution(S, res), S.cutoff)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _newton_critical(S: GFQI, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Newton on DS = 0; singular Hessians fall back to the pseudo-inverse."""
    for _ in range(settings.numeric.newton_max_iterations):
        _, grads = S.gradients(x)
        hess = S.hessians(x)
        step = np.einsum("mij,mj->mi", np.linalg.pinv(hess), grads)
        x = x - step
        x[:, : S.n] = np.mod(x[:, : S.n], 1.0)
        if np.max(np.abs(step), initial=0.0) < 1e-14:
            break
    values, grads = S.gradients(x)
    return x, values, np.linalg.norm(grads, axis=1)


def critical_value_check(
    S: GFQI, lam: float, tol: float, resolution: Optional[int] = None
) -> bool:
    """
    Whether lam is a critical value of S up to tol.

    Seeds are the grid points of T^n x [-C, C]^k with the smallest |DS| and
    the smallest |S - lam|; each is polished by Newton on DS = 0.
    """
    pts = _critical_grid(S, resolution)
    values, grads = S.gradients(pts)
    norms = np.linalg.norm(grads, axis=1)
    count = min(settings.numeric.critical_newton_seeds, pts.shape[0])
    seeds = np.union1d(
        np.argsort(norms, kind="stable")[:count],
        np.argsort(np.abs(values - lam), kind="stable")[:count],
    )
    x, values, norms = _newton_critical(S, pts[seeds])
    hit = (norms <= tol) & (np.abs(values - lam) <= tol)
    logger.debug(
        f"critical value check at {lam:.6g}: {int(hit.sum())}/{seeds.size} seeds hit "
        f"(best |DS|={norms.min():.3e})"
    )
    return bool(np.any(hit))


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    lhs: float
    rhs: float
    relation: str
    tolerance: float
    passed: bool


@dataclass
class PropertyReport:
    checks: List[PropertyCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, lhs: float, rhs: float, relation: str, tolerance: float) -> None:
        if relation == "=":
            ok = abs(lhs - rhs) <= tolerance
        elif relation == ">=":
            ok = lhs >= rhs - tolerance
        else:
            raise MinMaxError(f"unknown relation {relation!r}")
        self.checks.append(PropertyCheck(name, lhs, rhs, relation, tolerance, bool(ok)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [c.__dict__ for c in self.checks],
            columns=["name", "lhs", "rhs", "relation", "tolerance", "passed"],
        )


def property_checks(
    S1: GFQI,
    S2: Optional[GFQI] = None,
    resolution: Optional[int] = None,
    cells: float = 2.0,
) -> PropertyReport:
    """
    Duality c(1, -S) = -c(mu, S) and subadditivity
    c(u v, S1 + S2) >= c(u, S1) + c(v, S2) for (u, v) = (1, 1) and (1, mu),
    each within ``cells`` grid cells.
    """
    report = PropertyReport()
    subjects = [S1] if S2 is None else [S1, S2]
    computed = {}
    for i, S in enumerate(subjects, start=1):
        v = minmax_values(S, resolution)
        neg = minmax_values(negate(S), resolution)
        computed[i] = v
        report.add(
            f"duality S{i}",
            neg.unit,
            -v.fundamental,
            "=",
            cells * max(v.cell_step, neg.cell_step),
        )
    if S2 is not None:
        total = minmax_values(fiber_sum(S1, S2), resolution)
        a, b = computed[1], computed[2]
        tol = cells * max(a.cell_step, b.cell_step, total.cell_step)
        report.add("subadditivity (1,1)", total.unit, a.unit + b.unit, ">=", tol)
        report.add("subadditivity (1,mu)", total.fundamental, a.unit + b.fundamental, ">=", tol)
    for c in report.checks:
        if not c.passed:
            logger.warning(
                f"{c.name} fails: {c.lhs:.6g} {c.relation} {c.rhs:.6g} "
                f"(tol {c.tolerance:.3g})"
            )
    return report


@dataclass(frozen=True)
class HatGammaBound:
    """
    A lower bound on the spectral norm of phi_H^t: the max of
    gamma(phi(L), L) over a declared family of Lagrangians.
    """

    lower_bound: float
    t: float
    members: Tuple[Tuple[str, float], ...]
    tolerance: float

    def as_dict(self) -> dict:
        return {
            "lower_bound": self.lower_bound,
            "t": self.t,
            "members": [{"name": n, "gamma": g} for n, g in self.members],
            "tolerance": self.tolerance,
        }


def hatgamma_lower_bound(
    H: ScalarField,
    sample_family: Sequence[GFQI],
    t: float = 1.0,
    resolution: Optional[int] = None,
    reach: Optional[float] = None,
) -> HatGammaBound:
    """
    max over the family of gamma(S_{phi^t(L)}, S_L).

    Args:
        H: Hamiltonian, depending on q only where the family lives
        sample_family: generating functions of the Lagrangians L
        t: time
        resolution: grid resolution for the min-max values
        reach: |p| range over which H must not depend on p

    Returns:
        HatGammaBound; never the spectral norm itself
    """
    if not sample_family:
        raise MinMaxError("empty Lagrangian family")
    members = []
    tolerance = 0.0
    for S in sample_family:
        image = base_flow_image(S, H, t, reach)
        values = minmax_values(ominus(image, S), resolution)
        members.append((S.name, values.gamma))
        tolerance = max(tolerance, 2.0 * values.cell_step)
    bound = max(g for _, g in members)
    logger.info(f"hatgamma lower bound for {H.name} at t={t:g}: {bound:.6g}")
    return HatGammaBound(bound, float(t), tuple(members), tolerance)


def hatgamma_hamiltonian_lower_bound(
    H: ScalarField,
    sample_family: Sequence[GFQI],
    resolution: Optional[int] = None,
    times: Optional[int] = None,
) -> HatGammaBound:
    """Supremum over uniformly sampled t in [0, 1] of the per-time bound."""
    count = times or settings.numeric.gamma_times
    best = None
    for t in np.linspace(0.0, 1.0, count):
        bound = hatgamma_lower_bound(H, sample_family, float(t), resolution)
        if best is None or bound.lower_bound > best.lower_bound:
            best = bound
    return best


def hatgamma_distance_lower_bound(
    H1: ScalarField,
    H2: ScalarField,
    sample_family: Sequence[GFQI],
    t: float = 1.0,
    resolution: Optional[int] = None,
) -> HatGammaBound:
    """
    Lower bound on the spectral distance of phi_1^t and phi_2^t for
    base-only Hamiltonians, whose flows commute: phi_1 phi_2^-1 is the
    flow of H1 - H2.
    """
    return hatgamma_lower_bound(difference(H1, H2), sample_family, t, resolution)


def c_convergence_profile(
    H_seq: Sequence[ScalarField],
    H: ScalarField,
    sample_family: Sequence[GFQI],
    resolution: Optional[int] = None,
    grid_resolution: int = 64,
) -> pd.DataFrame:
    """
    ||H_n - H||_C0 next to the lower bound on the spectral distance of the
    time-one maps, one row per n.
    """
    rows = []
    for n, Hn in enumerate(H_seq, start=1):
        distance = c0_norm(difference(Hn, H), grid_resolution)
        bound = hatgamma_distance_lower_bound(Hn, H, sample_family, 1.0, resolution)
        rows.append(
            {
                "n": n,
                "c0_distance": distance,
                "hatgamma_lower_bound": bound.lower_bound,
                "tolerance": bound.tolerance,
                "inequality_holds": bound.lower_bound <= distance + bound.tolerance,
            }
        )
    return pd.DataFrame(rows)
