import logging
from typing import Optional, Tuple, Union

import numpy as np

from rigidlab.errors import KinkPointError, PhaseSpaceError
from rigidlab.hamlang.jets import Jet, evaluate_jets
from rigidlab.hamlang.models import Expression, Layout
from rigidlab.hamlang.parser import parse_expression
from rigidlab.phase import (
    ArrayLike,
    Box,
    GradientMode,
    PhasePoint,
    Regularity,
    ScalarField,
    as_coords,
)

logger = logging.getLogger(__name__)

PointLike = Union[PhasePoint, ArrayLike]


def _kink_error(jet_mask: np.ndarray, points: np.ndarray, what: str) -> None:
    if np.any(jet_mask):
        bad = points[int(np.argmax(jet_mask))]
        raise KinkPointError(f"{what} undefined at kink point {bad.tolist()}", bad)


def evaluate(e: Expression, x: PointLike, t: float = 0.0) -> float:
    """Value of an expression at one point (q, p, xi or q, xi by layout)."""
    return float(evaluate_jets(e, as_coords(x), t, order=0).value[0])


def gradient(e: Expression, x: PointLike, t: float = 0.0) -> np.ndarray:
    """Exact gradient at one point; raises KinkPointError at kinks."""
    pts = as_coords(x)[None, :]
    jet = evaluate_jets(e, pts, t, order=1)
    _kink_error(jet.kink1, pts, "gradient")
    return jet.grad[0]


def hessian(e: Expression, x: PointLike, t: float = 0.0) -> np.ndarray:
    """Exact Hessian at one point; raises KinkPointError where it is undefined."""
    pts = as_coords(x)[None, :]
    jet = evaluate_jets(e, pts, t, order=2)
    _kink_error(jet.kink2, pts, "Hessian")
    return jet.hess[0]


def kink_mask(e: Expression, points: np.ndarray, t: float = 0.0) -> np.ndarray:
    """True where the first derivative of ``e`` is undefined."""
    return evaluate_jets(e, points, t, order=1).kink1


class ExpressionField(ScalarField):
    """
    ScalarField defined by a phase-layout expression, with exact derivatives.
    """

    def __init__(
        self,
        expression: Expression,
        domain: Optional[Box] = None,
        support: Optional[Box] = None,
        lipschitz_estimate: Optional[float] = None,
        name: str = "",
    ):
        if expression.layout is not Layout.PHASE or expression.k != 0:
            raise PhaseSpaceError("phase fields need a (q, p) expression without xi")
        n = 2 * expression.d
        super().__init__(
            domain or Box.unbounded(n),
            mode=GradientMode.EXACT,
            regularity=expression.regularity,
            lipschitz_estimate=lipschitz_estimate,
            support=support,
            name=name or expression.canonical(),
        )
        self.expression = expression

    @classmethod
    def from_source(
        cls,
        source: str,
        d: int = 1,
        domain: Optional[Box] = None,
        support: Optional[Box] = None,
        declared: Optional[Regularity] = None,
        name: str = "",
    ) -> "ExpressionField":
        expr = parse_expression(source, (d, 0), Layout.PHASE, declared)
        return cls(expr, domain=domain, support=support, name=name or source)

    def jets(self, points: np.ndarray, t: float = 0.0, order: int = 0) -> Jet:
        return evaluate_jets(self.expression, self._prepare(points), t, order)

    def evaluate_many(self, points, t=0.0):
        return self.jets(points, t, 0).value

    def gradient_many(self, points, t=0.0):
        pts = self._prepare(points)
        jet = evaluate_jets(self.expression, pts, t, order=1)
        _kink_error(jet.kink1, pts, f"{self.name}: gradient")
        return jet.grad

    def try_gradient_many(self, points, t=0.0) -> Tuple[np.ndarray, np.ndarray]:
        pts = self._prepare(points)
        jet = evaluate_jets(self.expression, pts, t, order=1)
        ok = ~jet.kink1
        grads = np.where(ok[:, None], jet.grad, np.nan)
        return grads, ok

    def hessian_many(self, points, t=0.0):
        pts = self._prepare(points)
        jet = evaluate_jets(self.expression, pts, t, order=2)
        _kink_error(jet.kink2, pts, f"{self.name}: Hessian")
        return jet.hess

    @property
    def max_order(self) -> int:
        # C1,1 fields have Hessians only away from their kink set
        return 2 if self.regularity is Regularity.SMOOTH else 1
