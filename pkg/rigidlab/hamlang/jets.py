"""
Batched second-order forward-mode differentiation.

A Jet carries values, gradients and Hessians for m points at once, plus two
boolean masks: ``kink1`` marks points where the first derivative is undefined
and ``kink2`` marks points where the second derivative is undefined.
"""

from typing import Tuple

import numpy as np

from rigidlab.errors import DomainError, PhaseSpaceError
from rigidlab.hamlang.models import (
    BinaryOp,
    Call,
    Expression,
    Negate,
    Node,
    Number,
    Power,
    Variable,
)
from rigidlab.phase import Regularity

KINK_TOLERANCE = 1e-14


def smoothstep(u: np.ndarray) -> np.ndarray:
    return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)


def bump_profile(r: np.ndarray, order: int = 0) -> Tuple[np.ndarray, ...]:
    """
    bump(r) = 1 for |r| <= 1/2, 0 for |r| >= 1, quintic smoothstep between.

    Returns (value,), (value, d1) or (value, d1, d2) depending on ``order``.
    """
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    u = np.clip(2.0 * a - 1.0, 0.0, 1.0)
    value = 1.0 - smoothstep(u)
    if order == 0:
        return (value,)
    # d/du smoothstep = 30 u^2 (1-u)^2, du/dr = 2 sign(r) inside the ramp
    d1 = -30.0 * u * u * (1.0 - u) ** 2 * 2.0 * np.sign(r)
    if order == 1:
        return value, d1
    d2 = -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) * 4.0
    return value, d1, d2


class Jet:
    __slots__ = ("value", "grad", "hess", "kink1", "kink2")

    def __init__(self, value, grad=None, hess=None, kink1=None, kink2=None):
        self.value = value
        self.grad = grad
        self.hess = hess
        m = value.shape[0]
        self.kink1 = np.zeros(m, dtype=bool) if kink1 is None else kink1
        self.kink2 = np.zeros(m, dtype=bool) if kink2 is None else kink2

    @property
    def order(self) -> int:
        if self.hess is not None:
            return 2
        return 1 if self.grad is not None else 0

    @classmethod
    def constant(cls, c: float, m: int, n: int, order: int) -> "Jet":
        value = np.full(m, float(c))
        grad = np.zeros((m, n)) if order >= 1 else None
        hess = np.zeros((m, n, n)) if order >= 2 else None
        return cls(value, grad, hess)

    @classmethod
    def variable(cls, values: np.ndarray, index: int, n: int, order: int) -> "Jet":
        m = values.shape[0]
        grad = None
        if order >= 1:
            grad = np.zeros((m, n))
            grad[:, index] = 1.0
        hess = np.zeros((m, n, n)) if order >= 2 else None
        return cls(np.array(values, dtype=float), grad, hess)

    def _masks(self, other: "Jet") -> Tuple[np.ndarray, np.ndarray]:
        return self.kink1 | other.kink1, self.kink2 | other.kink2

    def __add__(self, other: "Jet") -> "Jet":
        k1, k2 = self._masks(other)
        return Jet(
            self.value + other.value,
            None if self.grad is None else self.grad + other.grad,
            None if self.hess is None else self.hess + other.hess,
            k1,
            k2,
        )

    def __neg__(self) -> "Jet":
        return Jet(
            -self.value,
            None if self.grad is None else -self.grad,
            None if self.hess is None else -self.hess,
            self.kink1.copy(),
            self.kink2.copy(),
        )

    def __sub__(self, other: "Jet") -> "Jet":
        return self + (-other)

    def __mul__(self, other: "Jet") -> "Jet":
        k1, k2 = self._masks(other)
        a, b = self.value, other.value
        grad = hess = None
        if self.grad is not None:
            grad = a[:, None] * other.grad + b[:, None] * self.grad
        if self.hess is not None:
            outer = np.einsum("mi,mj->mij", self.grad, other.grad)
            hess = (
                a[:, None, None] * other.hess
                + b[:, None, None] * self.hess
                + outer
                + np.swapaxes(outer, 1, 2)
            )
        return Jet(a * b, grad, hess, k1, k2)

    def chain(self, f0: np.ndarray, f1=None, f2=None) -> "Jet":
        """Compose with a scalar function given its value and derivatives at self.value."""
        grad = hess = None
        if self.grad is not None:
            grad = f1[:, None] * self.grad
        if self.hess is not None:
            hess = f1[:, None, None] * self.hess + f2[:, None, None] * np.einsum(
                "mi,mj->mij", self.grad, self.grad
            )
        return Jet(f0, grad, hess, self.kink1.copy(), self.kink2.copy())

    def select(self, mask: np.ndarray, other: "Jet") -> "Jet":
        """Rows of self where mask is True, rows of other elsewhere."""
        k1, k2 = self._masks(other)
        grad = hess = None
        if self.grad is not None:
            grad = np.where(mask[:, None], self.grad, other.grad)
        if self.hess is not None:
            hess = np.where(mask[:, None, None], self.hess, other.hess)
        return Jet(np.where(mask, self.value, other.value), grad, hess, k1, k2)


_SMOOTH_UNARY = {
    "sin": lambda v: (np.sin(v), np.cos(v), -np.sin(v)),
    "cos": lambda v: (np.cos(v), -np.sin(v), -np.cos(v)),
    "exp": lambda v: (np.exp(v),) * 3,
    "tanh": lambda v: (
        np.tanh(v),
        1.0 - np.tanh(v) ** 2,
        -2.0 * np.tanh(v) * (1.0 - np.tanh(v) ** 2),
    ),
    "bump": lambda v: bump_profile(v, order=2),
}


class JetEvaluator:
    """
    Evaluates an Expression on an (m, n_coords) batch.

    For C1,1-declared expressions a kink only invalidates the second
    derivative; the first derivative there uses the symmetric branch (sign 0
    for abs, the branch average for min/max), which is exact for C1,1 inputs.
    """

    def __init__(self, expression: Expression, order: int):
        self.expression = expression
        self.order = order
        self.c11 = expression.regularity is Regularity.C11

    def run(self, points: np.ndarray, t) -> Jet:
        self.points = points
        self.m, self.n = points.shape
        self.t = np.broadcast_to(np.asarray(t, dtype=float), (self.m,))
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            jet = self._eval(self.expression.root)
        if not np.all(np.isfinite(jet.value)):
            bad = points[int(np.argmin(np.isfinite(jet.value)))]
            raise DomainError(f"overflow or non-finite value at {bad.tolist()}")
        return jet

    def _mark(self, jet: Jet, kinks: np.ndarray) -> None:
        jet.kink2 = jet.kink2 | kinks
        if not self.c11:
            jet.kink1 = jet.kink1 | kinks

    def _eval(self, node: Node) -> Jet:
        if isinstance(node, Number):
            return Jet.constant(node.value, self.m, self.n, self.order)
        if isinstance(node, Variable):
            if node.kind == "t":
                jet = Jet.constant(0.0, self.m, self.n, self.order)
                jet.value = np.array(self.t, dtype=float)
                return jet
            col = self.expression.coordinate_index(node)
            return Jet.variable(self.points[:, col], col, self.n, self.order)
        if isinstance(node, Negate):
            return -self._eval(node.operand)
        if isinstance(node, BinaryOp):
            left, right = self._eval(node.left), self._eval(node.right)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            out = left * self._reciprocal(right)
            out.value = left.value / right.value
            return out
        if isinstance(node, Power):
            return self._power(self._eval(node.base), node.exponent)
        if isinstance(node, Call):
            args = [self._eval(a) for a in node.args]
            if node.func in ("min", "max"):
                return self._minmax(node.func, args)
            arg = args[0]
            if node.func == "abs":
                return self._abs(arg)
            if node.func == "sqrt":
                return self._sqrt(arg)
            f0, f1, f2 = _SMOOTH_UNARY[node.func](arg.value)
            return arg.chain(f0, f1, f2)
        raise TypeError(f"unknown node {node!r}")

    def _reciprocal(self, jet: Jet) -> Jet:
        v = jet.value
        if np.any(v == 0.0):
            bad = self.points[int(np.argmax(v == 0.0))]
            raise DomainError(f"division by zero at {bad.tolist()}")
        return jet.chain(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def _power(self, jet: Jet, exponent: int) -> Jet:
        if exponent == 0:
            return Jet.constant(1.0, self.m, self.n, self.order)
        if exponent == 1:
            return jet
        v = jet.value
        f0 = v**exponent
        f1 = exponent * v ** (exponent - 1)
        f2 = exponent * (exponent - 1) * v ** (exponent - 2)
        return jet.chain(f0, f1, f2)

    def _sqrt(self, jet: Jet) -> Jet:
        v = jet.value
        if np.any(v < 0.0):
            bad = self.points[int(np.argmax(v < 0.0))]
            raise DomainError(f"sqrt of a negative number at {bad.tolist()}")
        root = np.sqrt(v)
        zero = v == 0.0
        safe = np.where(zero, 1.0, root)
        f1 = np.where(zero, np.nan, 0.5 / safe)
        f2 = np.where(zero, np.nan, -0.25 / safe**3)
        out = jet.chain(root, f1, f2)
        # derivative of sqrt is unbounded at 0
        out.kink1 = out.kink1 | zero
        out.kink2 = out.kink2 | zero
        return out

    def _abs(self, jet: Jet) -> Jet:
        v = jet.value
        kinks = np.abs(v) <= KINK_TOLERANCE
        sign = np.where(kinks, 0.0, np.sign(v))
        out = jet.chain(np.abs(v), sign, np.zeros(self.m))
        self._mark(out, kinks)
        return out

    def _minmax(self, func: str, args) -> Jet:
        acc = args[0]
        for other in args[1:]:
            diff = acc.value - other.value
            ties = np.abs(diff) <= KINK_TOLERANCE
            keep = diff >= 0.0 if func == "max" else diff <= 0.0
            if self.c11 and acc.grad is not None:
                # branch average at ties keeps the first derivative symmetric
                avg = _average(acc, other)
                chosen = acc.select(keep, other)
                acc = avg.select(ties, chosen)
            else:
                acc = acc.select(keep, other)
            self._mark(acc, ties)
        return acc


def _average(a: Jet, b: Jet) -> Jet:
    half = lambda x, y: None if x is None else 0.5 * (x + y)
    return Jet(
        0.5 * (a.value + b.value),
        half(a.grad, b.grad),
        half(a.hess, b.hess),
        a.kink1 | b.kink1,
        a.kink2 | b.kink2,
    )


def evaluate_jets(
    expression: Expression, points: np.ndarray, t=0.0, order: int = 0
) -> Jet:
    """
    Evaluate an expression and its derivatives on a batch of points.

    Args:
        expression: parsed expression
        points: (m, n_coords) array in the expression's layout
        t: time value (scalar or (m,))
        order: 0 values only, 1 adds gradients, 2 adds Hessians

    Returns:
        Jet: values, gradients, Hessians and kink masks
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[1] != expression.n_coords:
        raise PhaseSpaceError(
            f"expression expects {expression.n_coords} coordinates, got {pts.shape[1]}"
        )
    return JetEvaluator(expression, order).run(pts, t)
