"""
Field algebra: linear combinations, products and Poisson-bracket fields.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from rigidlab.errors import DomainError, KinkPointError
from rigidlab.phase import (
    FD_STEP_FACTOR,
    Box,
    GradientMode,
    Regularity,
    ScalarField,
    as_points,
    bracket_gradient,
    bracket_of_gradients,
    fd_gradient_many,
)

logger = logging.getLogger(__name__)

KINK_STEP_HALVINGS = 10


def _common_domain(fields: Sequence[ScalarField]) -> Box:
    dims = {f.dim for f in fields}
    if len(dims) != 1:
        raise DomainError(f"fields live in different dimensions: {sorted(dims)}")
    bounded = [f.domain for f in fields if f.domain.bounded]
    if not bounded:
        return fields[0].domain
    lower = np.max([b.lower for b in bounded], axis=0)
    upper = np.min([b.upper for b in bounded], axis=0)
    periodic = tuple(all(b.periodic[i] for b in bounded) for i in range(len(lower)))
    return Box(tuple(lower), tuple(upper), periodic)


def _common_support(fields: Sequence[ScalarField]) -> Optional[Box]:
    if any(f.support is None for f in fields):
        return None
    lower = np.min([f.support.lower for f in fields], axis=0)
    upper = np.max([f.support.upper for f in fields], axis=0)
    # an axis stays periodic only if every support wraps it the same way
    periodic = tuple(
        all(
            f.support.periodic[a]
            and f.support.lower[a] == lower[a]
            and f.support.upper[a] == upper[a]
            for f in fields
        )
        for a in range(len(lower))
    )
    return Box(tuple(float(v) for v in lower), tuple(float(v) for v in upper), periodic)


class LinearCombinationField(ScalarField):
    """sum_i c_i f_i"""

    def __init__(
        self, terms: Sequence[Tuple[float, ScalarField]], name: str = ""
    ):
        if not terms:
            raise ValueError("empty linear combination")
        self.terms = [(float(c), f) for c, f in terms]
        fields = [f for _, f in self.terms]
        super().__init__(
            _common_domain(fields),
            mode=GradientMode.combine(f.mode for f in fields),
            regularity=Regularity.weakest(f.regularity for f in fields),
            support=_common_support(fields),
            name=name or " + ".join(f"{c:g}*({f.name})" for c, f in self.terms),
        )

    @property
    def max_order(self) -> int:
        return min(f.max_order for _, f in self.terms)

    def evaluate_many(self, points, t=0.0):
        pts = as_points(points)
        return sum(c * f.evaluate_many(pts, t) for c, f in self.terms)

    def gradient_many(self, points, t=0.0):
        pts = as_points(points)
        return sum(c * f.gradient_many(pts, t) for c, f in self.terms)

    def hessian_many(self, points, t=0.0):
        pts = as_points(points)
        return sum(c * f.hessian_many(pts, t) for c, f in self.terms)


def difference(f: ScalarField, g: ScalarField) -> LinearCombinationField:
    return LinearCombinationField([(1.0, f), (-1.0, g)], name=f"({f.name}) - ({g.name})")


def scaled(f: ScalarField, c: float) -> LinearCombinationField:
    return LinearCombinationField([(c, f)], name=f"{c:g}*({f.name})")


class ProductField(ScalarField):
    """f * g"""

    def __init__(self, f: ScalarField, g: ScalarField, name: str = ""):
        super().__init__(
            _common_domain([f, g]),
            mode=GradientMode.combine([f.mode, g.mode]),
            regularity=Regularity.weakest([f.regularity, g.regularity]),
            name=name or f"({f.name})*({g.name})",
        )
        self.f = f
        self.g = g

    @property
    def max_order(self) -> int:
        return min(self.f.max_order, self.g.max_order)

    def evaluate_many(self, points, t=0.0):
        pts = as_points(points)
        return self.f.evaluate_many(pts, t) * self.g.evaluate_many(pts, t)

    def gradient_many(self, points, t=0.0):
        pts = as_points(points)
        fv, gv = self.f.evaluate_many(pts, t), self.g.evaluate_many(pts, t)
        return fv[:, None] * self.g.gradient_many(pts, t) + gv[
            :, None
        ] * self.f.gradient_many(pts, t)

    def hessian_many(self, points, t=0.0):
        pts = as_points(points)
        fv, gv = self.f.evaluate_many(pts, t), self.g.evaluate_many(pts, t)
        df, dg = self.f.gradient_many(pts, t), self.g.gradient_many(pts, t)
        outer = np.einsum("mi,mj->mij", df, dg)
        return (
            fv[:, None, None] * self.g.hessian_many(pts, t)
            + gv[:, None, None] * self.f.hessian_many(pts, t)
            + outer
            + np.swapaxes(outer, 1, 2)
        )


class BracketField(ScalarField):
    """
    The scalar field {f, g} = Df^T E Dg, formed pointwise from first gradients.

    When both inputs have second derivatives the gradient of the bracket is
    exact; otherwise (C1,1 or Lipschitz inputs) it is a finite difference
    whose step halves away from kink points.
    """

    def __init__(self, f: ScalarField, g: ScalarField, name: str = ""):
        domain = _common_domain([f, g])
        if domain.dim % 2:
            raise DomainError("Poisson brackets need an even-dimensional phase space")
        self.f = f
        self.g = g
        self.exact_gradient = f.max_order >= 2 and g.max_order >= 2
        if self.exact_gradient:
            mode = GradientMode.combine([f.mode, g.mode])
            regularity = Regularity.weakest([f.regularity, g.regularity])
        else:
            mode = GradientMode.FD_UNSAFE
            if f.regularity.has_gradient_everywhere and g.regularity.has_gradient_everywhere:
                regularity = Regularity.LIPSCHITZ
            else:
                regularity = Regularity.UNKNOWN
        super().__init__(
            domain,
            mode=mode,
            regularity=regularity,
            support=_common_support([f, g]),
            name=name or f"{{{f.name}, {g.name}}}",
        )

    @property
    def max_order(self) -> int:
        if not self.exact_gradient:
            return 1
        # the bracket's Hessian needs third derivatives, taken by differencing
        return 2 if self.regularity is Regularity.SMOOTH else 1

    @property
    def hessian_is_nested_fd(self) -> bool:
        return False

    def evaluate_many(self, points, t=0.0):
        pts = as_points(points)
        return bracket_of_gradients(self.f.gradient_many(pts, t), self.g.gradient_many(pts, t))

    def gradient_many(self, points, t=0.0):
        pts = as_points(points)
        if self.exact_gradient:
            df, dg = self.f.gradient_many(pts, t), self.g.gradient_many(pts, t)
            hf, hg = self.f.hessian_many(pts, t), self.g.hessian_many(pts, t)
            return bracket_gradient(df, dg, hf, hg)
        return kink_aware_fd_gradient(self, pts, t)


def kink_aware_fd_gradient(
    field: ScalarField, points: np.ndarray, t: float = 0.0
) -> np.ndarray:
    """
    Central differences of ``field`` values, halving the step per point
    whenever the stencil touches a kink of an input gradient.
    """
    pts = as_points(points)
    try:
        return fd_gradient_many(lambda y: field.evaluate_many(y, t), pts)
    except KinkPointError:
        pass
    out = np.empty(pts.shape)
    for i, row in enumerate(pts):
        factor = FD_STEP_FACTOR
        for attempt in range(KINK_STEP_HALVINGS + 1):
            try:
                out[i] = fd_gradient_many(
                    lambda y: field.evaluate_many(y, t), row[None, :], factor
                )[0]
                break
            except KinkPointError:
                if attempt == KINK_STEP_HALVINGS:
                    raise
                factor *= 0.5
    return out


class GridField(ScalarField):
    """
    A field given by samples on a Grid, interpolated with cubic splines.

    Gradients are finite differences of the interpolant.
    """

    def __init__(self, grid, values: np.ndarray, name: str = "grid field"):
        values = np.asarray(values, dtype=float).reshape(grid.shape)
        super().__init__(
            grid.box,
            mode=GradientMode.FINITE_DIFFERENCE,
            regularity=Regularity.SMOOTH,
            name=name,
        )
        self.grid = grid
        self.values = values
        method = "cubic" if min(grid.shape) >= 4 else "linear"
        self._interp = RegularGridInterpolator(
            grid.axes, values, method=method, bounds_error=False, fill_value=None
        )

    def evaluate_many(self, points, t=0.0):
        pts = self._prepare(points)
        return np.asarray(self._interp(pts), dtype=float)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def oscillation(self) -> float:
        return float(np.max(self.values) - np.min(self.values))
