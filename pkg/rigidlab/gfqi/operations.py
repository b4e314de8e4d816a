"""
Constructions on generating functions: fiberless GFQI, the three
equivalence moves, differences, sums, negation and wavefront extraction.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from rigidlab.config import get_settings
from rigidlab.errors import GFQIError
from rigidlab.gfqi.cores import (
    BaseShiftCore,
    ExpressionCore,
    FiberDiffeo,
    FiberDiffeoCore,
    FiberSumCore,
    NegatedCore,
    ShiftedCore,
    StabilizedCore,
)
from rigidlab.gfqi.models import (
    GFQI,
    PERIODICITY_TOLERANCE,
    QUADRATICITY_TOLERANCE,
    QuadraticForm,
    WavefrontSample,
    direct_sum,
)
from rigidlab.hamlang.models import Expression, Layout
from rigidlab.hamlang.parser import parse_expression
from rigidlab.phase import ScalarField

logger = logging.getLogger(__name__)

DEFAULT_FIBER_RESOLUTION = 33
OUTSIDE_IDENTITY_TOLERANCE = 1e-12


def _check_periodic(S: GFQI) -> None:
    probe = np.random.default_rng(1).random((64, S.dim))
    scale = max(1.0, float(np.max(np.abs(S.values(probe)))))
    defect = S.periodicity_defect()
    if defect > PERIODICITY_TOLERANCE * scale:
        raise GFQIError(
            f"core of {S.name or 'GFQI'} is not 1-periodic in q (defect {defect:.3e})"
        )


def make_gfqi(
    source: Union[str, Expression],
    n: int,
    k: int,
    quad: Optional[QuadraticForm],
    cutoff: float,
    name: str = "",
) -> GFQI:
    """
    A GFQI from a core expression over (q, xi).

    Raises:
        GFQIError: the core is not 1-periodic in q, or S - xi^T Q depends on
            xi beyond the cutoff
    """
    expr = (
        parse_expression(source, (n, k), Layout.GENERATING)
        if isinstance(source, str)
        else source
    )
    S = GFQI(n, k, ExpressionCore(expr), quad, cutoff, name=name or expr.canonical())
    _check_periodic(S)
    check_quadratic_at_infinity(S, modulo_base=True)
    return S


def from_base_function(f: Union[str, Expression], n: int = 1, name: str = "") -> GFQI:
    """
    Fiberless GFQI S(q) = f(q); it generates the graph of df.
    """
    expr = f
    if isinstance(f, str):
        expr = parse_expression(f, (n, 0), Layout.GENERATING)
    if expr.layout is not Layout.GENERATING or expr.k != 0:
        raise GFQIError("a base function is an expression in q only")
    return make_gfqi(expr, expr.d, 0, None, 1.0, name=name)


def ominus(S1: GFQI, S2: GFQI) -> GFQI:
    """S1(q; xi1) - S2(q; xi2), flagged difference-type."""
    if S1.n != S2.n:
        raise GFQIError(f"base mismatch: T^{S1.n} vs T^{S2.n}")
    quad = direct_sum(S1.quad, None if S2.quad is None else S2.quad.negated())
    return GFQI(
        S1.n,
        S1.k + S2.k,
        FiberSumCore([(1.0, S1.core), (-1.0, S2.core)]),
        quad,
        max(S1.cutoff, S2.cutoff),
        kind="difference",
        name=f"({S1.name}) (-) ({S2.name})",
        blocks=S1.blocks + S2.blocks,
    )


def fiber_sum(S1: GFQI, S2: GFQI) -> GFQI:
    """S1(q; xi1) + S2(q; xi2) with separate fiber blocks."""
    if S1.n != S2.n:
        raise GFQIError(f"base mismatch: T^{S1.n} vs T^{S2.n}")
    return GFQI(
        S1.n,
        S1.k + S2.k,
        FiberSumCore([(1.0, S1.core), (1.0, S2.core)]),
        direct_sum(S1.quad, S2.quad),
        max(S1.cutoff, S2.cutoff),
        kind="difference",
        name=f"({S1.name}) (+) ({S2.name})",
        blocks=S1.blocks + S2.blocks,
    )


def negate(S: GFQI) -> GFQI:
    """-S with form -Q; the negative index becomes k - i^-."""
    return GFQI(
        S.n,
        S.k,
        NegatedCore(S.core),
        None if S.quad is None else S.quad.negated(),
        S.cutoff,
        kind=S.kind,
        name=f"-({S.name})",
        blocks=S.blocks,
    )


def stabilize(S: GFQI, B: QuadraticForm) -> GFQI:
    """S(q; xi) + eta^T B eta in fresh variables eta."""
    if not isinstance(B, QuadraticForm):
        B = QuadraticForm(B)
    if B.k == 0:
        return S
    return GFQI(
        S.n,
        S.k + B.k,
        StabilizedCore(S.core, B),
        direct_sum(S.quad, B),
        S.cutoff,
        kind=S.kind,
        name=f"{S.name} + stab(index {B.index})",
        blocks=S.blocks + (B.k,),
    )


@dataclass(frozen=True)
class AddConstant:
    value: float


@dataclass(frozen=True)
class FiberDiffeoMove:
    diffeo: FiberDiffeo


def equivalence_move(
    S: GFQI,
    move: Union[AddConstant, FiberDiffeoMove],
    samples: int = 256,
    rng: Optional[np.random.Generator] = None,
) -> GFQI:
    """
    S + c, or S o (id, phi) for a fiber diffeomorphism that is the identity
    beyond the cutoff. Identity moves return S itself.
    """
    if isinstance(move, AddConstant):
        if move.value == 0:
            return S
        core = ShiftedCore(S.core, move.value)
        name = f"{S.name} + {move.value:g}"
        return GFQI(S.n, S.k, core, S.quad, S.cutoff, S.kind, name, S.blocks)
    if isinstance(move, FiberDiffeoMove):
        if move.diffeo.is_identity:
            return S
        if S.k == 0:
            raise GFQIError("fiber diffeomorphisms need a nontrivial fiber")
        rng = rng or np.random.default_rng(0)
        pts = S.far_points(samples, rng)
        q, xi = pts[:, : S.n], pts[:, S.n :]
        moved = move.diffeo.apply(q, xi)
        err = float(np.max(np.abs(moved - xi)))
        if err > OUTSIDE_IDENTITY_TOLERANCE:
            raise GFQIError(
                f"fiber diffeomorphism moves points beyond the cutoff (by {err:.3e})"
            )
        core = FiberDiffeoCore(S.core, move.diffeo)
        return GFQI(S.n, S.k, core, S.quad, S.cutoff, S.kind, f"{S.name} o phi", S.blocks)
    raise GFQIError(f"unknown equivalence move {move!r}")


def base_flow_image(
    S: GFQI,
    H: ScalarField,
    t: float,
    reach: Optional[float] = None,
    resolution: int = 64,
) -> GFQI:
    """
    GFQI of phi_H^t(L) for H depending on q only where L and its image live.

    There phi^t(q, p) = (q, p - t dh/dq) with h(q) = H(q, 0), so the image
    is generated by S - t h.
    """
    if H.dim != 2 * S.n:
        raise GFQIError("Hamiltonian and generating function bases differ")
    if t == 0:
        return S
    q = (np.arange(resolution) / resolution)[:, None]
    if S.n == 2:
        mesh = np.meshgrid(q[:, 0], q[:, 0], indexing="ij")
        q = np.stack([m.reshape(-1) for m in mesh], axis=1)
    base = np.concatenate([q, np.zeros_like(q)], axis=1)
    h_vals = H.evaluate_many(base)
    if reach is None:
        p_max = float(np.max(np.abs(wavefront(S, resolution).p), initial=0.0))
        slope = float(np.max(np.abs(H.gradient_many(base)[:, : S.n])))
        reach = p_max + abs(t) * slope + 0.5
    for p in np.linspace(-reach, reach, 9):
        pts = np.concatenate([q, np.full_like(q, p)], axis=1)
        if np.max(np.abs(H.evaluate_many(pts) - h_vals)) > 1e-12:
            raise GFQIError(
                f"no analytic image GFQI: {H.name} depends on p within |p| <= {reach:.3g}"
            )
    core = BaseShiftCore(S.core, H, -float(t))
    return GFQI(S.n, S.k, core, S.quad, S.cutoff, S.kind, f"phi^{t:g}({S.name})", S.blocks)


def _base_grid(n: int, resolution: int) -> np.ndarray:
    axis = np.arange(resolution) / resolution
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def wavefront(
    S: GFQI,
    resolution: int = 256,
    residual_tol: float = 1e-10,
    fiber_resolution: int = DEFAULT_FIBER_RESOLUTION,
) -> WavefrontSample:
    """
    Sample the Lagrangian generated by S: fiber-critical points on a q grid,
    seeded from a scan of [-R, R]^k and polished by damped Newton steps.
    """
    q_grid = _base_grid(S.n, resolution)
    if S.k == 0:
        _, grads = S.gradients(q_grid)
        m = q_grid.shape[0]
        return WavefrontSample(
            q_grid, grads[:, : S.n], np.zeros((m, 0)), np.zeros(m), residual_tol
        )

    R = S.fiber_radius
    xi_axis = np.linspace(-R, R, fiber_resolution)
    h_xi = xi_axis[1] - xi_axis[0]
    xi_grid = np.stack(
        [m.reshape(-1) for m in np.meshgrid(*([xi_axis] * S.k), indexing="ij")], axis=1
    )
    mq, mx = q_grid.shape[0], xi_grid.shape[0]
    pts = np.concatenate(
        [np.repeat(q_grid, mx, axis=0), np.tile(xi_grid, (mq, 1))], axis=1
    )
    _, grads = S.gradients(pts)
    g_xi = grads[:, S.n :]
    shaped = g_xi.reshape((mq,) + (fiber_resolution,) * S.k + (S.k,))
    lipschitz = 0.0
    for axis in range(S.k):
        jumps = np.abs(np.diff(shaped, axis=1 + axis))
        lipschitz = max(lipschitz, float(np.max(jumps)) / h_xi)
    seed_tol = 10.0 * h_xi * max(lipschitz, 1e-12)
    seeds = pts[np.linalg.norm(g_xi, axis=1) < seed_tol]
    logger.debug(f"wavefront of {S.name}: {seeds.shape[0]} seeds (tol {seed_tol:.3g})")

    polished, residuals = _newton_polish(S, seeds)
    ok = residuals <= residual_tol
    polished, residuals = polished[ok], residuals[ok]
    if polished.shape[0] == 0:
        logger.warning(f"wavefront of {S.name} is empty: Newton failed at every seed")
        empty = np.zeros((0, S.n))
        return WavefrontSample(
            empty, empty, np.zeros((0, S.k)), np.zeros(0), residual_tol, True
        )

    keys = np.concatenate([polished[:, : S.n], np.round(polished[:, S.n :], 6)], axis=1)
    _, first = np.unique(keys, axis=0, return_index=True)
    first = np.sort(first)
    polished, residuals = polished[first], residuals[first]
    order = np.lexsort(tuple(polished[:, i] for i in reversed(range(S.dim))))
    polished, residuals = polished[order], residuals[order]
    _, grads = S.gradients(polished)
    return WavefrontSample(
        polished[:, : S.n],
        grads[:, : S.n],
        polished[:, S.n :],
        residuals,
        residual_tol,
    )


def _newton_polish(S: GFQI, seeds: np.ndarray):
    max_iter = get_settings().numeric.newton_max_iterations
    pts = np.array(seeds, dtype=float)
    n = S.n
    if pts.shape[0] == 0:
        return pts, np.zeros(0)
    _, grads = S.gradients(pts)
    residual = np.linalg.norm(grads[:, n:], axis=1)
    for _ in range(max_iter):
        active = residual > 1e-15
        if not active.any():
            break
        idx = np.flatnonzero(active)
        hess = S.hessians(pts[idx])[:, n:, n:]
        g = grads[idx, n:]
        try:
            step = np.linalg.solve(hess, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(H, v, rcond=None)[0] for H, v in zip(hess, g)])
        trial = pts[idx].copy()
        trial[:, n:] -= step
        _, trial_grads = S.gradients(trial)
        trial_res = np.linalg.norm(trial_grads[:, n:], axis=1)
        worse = trial_res > residual[idx]
        if worse.any():
            # damp by 1/2 where the residual grew
            half = pts[idx[worse]].copy()
            half[:, n:] -= 0.5 * step[worse]
            _, half_grads = S.gradients(half)
            trial[worse] = half
            trial_grads[worse] = half_grads
            trial_res[worse] = np.linalg.norm(half_grads[:, n:], axis=1)
        pts[idx] = trial
        grads[idx] = trial_grads
        residual[idx] = trial_res
    return pts, residual


def check_quadratic_at_infinity(S: GFQI, count: int = 1000, modulo_base: bool = False) -> float:
    """Quadraticity defect; raises when above tolerance."""
    defect = S.quadratic_defect(count, modulo_base=modulo_base)
    if defect > QUADRATICITY_TOLERANCE:
        raise GFQIError(f"{S.name} is not quadratic at infinity (defect {defect:.3e})")
    return defect


def product_base_function(sources: Sequence[str]) -> GFQI:
    """Fiberless GFQI on T^2 from f1(q1) + f2(q2) given in q1."""
    if len(sources) != 2:
        raise GFQIError("product base functions need two factors")
    second = sources[1].replace("q1", "q2")
    return from_base_function(f"({sources[0]}) + ({second})", n=2)
