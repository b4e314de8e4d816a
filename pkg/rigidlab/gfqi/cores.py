"""
Core functions S(q; xi) of generating functions.

Every core works on (m, n + k) batches laid out as (q1..qn, xi1..xik) and
returns values, (values, gradients) or Hessians.
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from rigidlab.errors import GFQIError, KinkPointError
from rigidlab.gfqi.models import QuadraticForm
from rigidlab.hamlang.jets import bump_profile, evaluate_jets
from rigidlab.hamlang.models import Expression, Layout
from rigidlab.phase import (
    FD_STEP_FACTOR,
    NESTED_FD_STEP_FACTOR,
    Regularity,
    ScalarField,
    fd_gradient_many,
    fd_jacobian_many,
)

logger = logging.getLogger(__name__)


class GeneratingCore(ABC):
    def __init__(self, n: int, k: int, regularity: Regularity = Regularity.SMOOTH):
        self.n = n
        self.k = k
        self.regularity = regularity

    @property
    def dim(self) -> int:
        return self.n + self.k

    @property
    def exact_gradients(self) -> bool:
        return False

    @abstractmethod
    def values(self, points: np.ndarray) -> np.ndarray:
        pass

    def gradients(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.values(points), fd_gradient_many(self.values, points)

    def hessians(self, points: np.ndarray) -> np.ndarray:
        factor = FD_STEP_FACTOR if self.exact_gradients else NESTED_FD_STEP_FACTOR
        hess = fd_jacobian_many(
            lambda y: self.gradients(y)[1], points, factor=factor, richardson=True
        )
        return 0.5 * (hess + np.swapaxes(hess, 1, 2))

    def describe(self) -> str:
        return type(self).__name__


class ExpressionCore(GeneratingCore):
    """Core given by a generating-layout expression."""

    def __init__(self, expression: Expression):
        if expression.layout is not Layout.GENERATING:
            raise GFQIError("generating cores need the (q, xi) layout")
        super().__init__(expression.d, expression.k, expression.regularity)
        self.expression = expression

    @property
    def exact_gradients(self) -> bool:
        return True

    def values(self, points):
        return evaluate_jets(self.expression, points, 0.0, order=0).value

    def gradients(self, points):
        jet = evaluate_jets(self.expression, points, 0.0, order=1)
        if np.any(jet.kink1):
            bad = np.asarray(points)[int(np.argmax(jet.kink1))]
            raise KinkPointError(f"core gradient undefined at {bad.tolist()}", bad)
        return jet.value, jet.grad

    def hessians(self, points):
        jet = evaluate_jets(self.expression, points, 0.0, order=2)
        if np.any(jet.kink2):
            bad = np.asarray(points)[int(np.argmax(jet.kink2))]
            raise KinkPointError(f"core Hessian undefined at {bad.tolist()}", bad)
        return jet.hess

    def describe(self) -> str:
        return self.expression.canonical()


class GridCore(GeneratingCore):
    """
    Core sampled on a grid over [0,1)^n x [-radius, radius]^k.

    Interpolation is cubic and periodic in q. Outside the sampled fiber box
    the value is the boundary sample plus the growth of the quadratic form.
    """

    def __init__(
        self,
        samples: np.ndarray,
        n: int,
        k: int,
        radius: float,
        quad: Optional[QuadraticForm],
    ):
        super().__init__(n, k, Regularity.SMOOTH)
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != n + k:
            raise GFQIError(f"grid samples need {n + k} axes, got {samples.ndim}")
        self.radius = float(radius)
        self.quad = quad
        self.shape = samples.shape
        # pad periodic axes by wrapping so that interpolation is periodic
        pad = [(3, 3)] * n + [(0, 0)] * k
        padded = np.pad(samples, pad, mode="wrap")
        axes = []
        for axis, res in enumerate(samples.shape):
            if axis < n:
                axes.append((np.arange(res + 6) - 3) / res)
            else:
                axes.append(np.linspace(-radius, radius, res))
        method = "cubic" if min(samples.shape) >= 4 else "linear"
        self._interp = RegularGridInterpolator(axes, padded, method=method)

    def values(self, points):
        pts = np.array(np.atleast_2d(points), dtype=float)
        pts[:, : self.n] = np.mod(pts[:, : self.n], 1.0)
        xi = pts[:, self.n :]
        clipped = np.clip(xi, -self.radius, self.radius)
        inner = pts.copy()
        inner[:, self.n :] = clipped
        vals = self._interp(inner)
        if self.quad is not None:
            vals = vals + self.quad.values(xi) - self.quad.values(clipped)
        return vals


class FiberSumCore(GeneratingCore):
    """sum_i sign_i S_i(q; xi_i) with separate fiber blocks xi_i."""

    def __init__(self, parts: Sequence[Tuple[float, GeneratingCore]]):
        ns = {core.n for _, core in parts}
        if len(ns) != 1:
            raise GFQIError(f"base dimensions differ: {sorted(ns)}")
        self.parts = [(float(sign), core) for sign, core in parts]
        super().__init__(
            ns.pop(),
            sum(core.k for _, core in self.parts),
            Regularity.weakest(core.regularity for _, core in self.parts),
        )

    @property
    def exact_gradients(self) -> bool:
        return all(core.exact_gradients for _, core in self.parts)

    def _slices(self, points):
        q = points[:, : self.n]
        start = self.n
        for sign, core in self.parts:
            fiber = points[:, start : start + core.k]
            yield sign, core, np.concatenate([q, fiber], axis=1), start
            start += core.k

    def values(self, points):
        pts = np.atleast_2d(points)
        return sum(sign * core.values(sub) for sign, core, sub, _ in self._slices(pts))

    def gradients(self, points):
        pts = np.atleast_2d(points)
        vals = np.zeros(pts.shape[0])
        grads = np.zeros(pts.shape)
        for sign, core, sub, start in self._slices(pts):
            v, g = core.gradients(sub)
            vals += sign * v
            grads[:, : self.n] += sign * g[:, : self.n]
            grads[:, start : start + core.k] = sign * g[:, self.n :]
        return vals, grads

    def hessians(self, points):
        pts = np.atleast_2d(points)
        n = self.n
        hess = np.zeros((pts.shape[0], pts.shape[1], pts.shape[1]))
        for sign, core, sub, start in self._slices(pts):
            h = sign * core.hessians(sub)
            block = slice(start, start + core.k)
            hess[:, :n, :n] += h[:, :n, :n]
            hess[:, :n, block] = h[:, :n, n:]
            hess[:, block, :n] = h[:, n:, :n]
            hess[:, block, block] = h[:, n:, n:]
        return hess

    def describe(self) -> str:
        return " + ".join(f"{sign:+g}*[{core.describe()}]" for sign, core in self.parts)


class StabilizedCore(GeneratingCore):
    """S(q; xi) + eta^T B eta"""

    def __init__(self, base: GeneratingCore, form: QuadraticForm):
        super().__init__(base.n, base.k + form.k, base.regularity)
        self.base = base
        self.form = form

    @property
    def exact_gradients(self) -> bool:
        return self.base.exact_gradients

    def values(self, points):
        pts = np.atleast_2d(points)
        split = self.base.dim
        return self.base.values(pts[:, :split]) + self.form.values(pts[:, split:])

    def gradients(self, points):
        pts = np.atleast_2d(points)
        split = self.base.dim
        v, g = self.base.gradients(pts[:, :split])
        eta = pts[:, split:]
        return v + self.form.values(eta), np.concatenate(
            [g, self.form.gradients(eta)], axis=1
        )

    def hessians(self, points):
        pts = np.atleast_2d(points)
        split = self.base.dim
        hess = np.zeros((pts.shape[0], pts.shape[1], pts.shape[1]))
        hess[:, :split, :split] = self.base.hessians(pts[:, :split])
        hess[:, split:, split:] = 2.0 * self.form.matrix
        return hess

    def describe(self) -> str:
        return f"{self.base.describe()} + eta^T B eta (B index {self.form.index})"


class ShiftedCore(GeneratingCore):
    """S + c"""

    def __init__(self, base: GeneratingCore, constant: float):
        super().__init__(base.n, base.k, base.regularity)
        self.base = base
        self.constant = float(constant)

    @property
    def exact_gradients(self) -> bool:
        return self.base.exact_gradients

    def values(self, points):
        return self.base.values(points) + self.constant

    def gradients(self, points):
        v, g = self.base.gradients(points)
        return v + self.constant, g

    def hessians(self, points):
        return self.base.hessians(points)

    def describe(self) -> str:
        return f"{self.base.describe()} + {self.constant:g}"


class NegatedCore(GeneratingCore):
    """-S"""

    def __init__(self, base: GeneratingCore):
        super().__init__(base.n, base.k, base.regularity)
        self.base = base

    @property
    def exact_gradients(self) -> bool:
        return self.base.exact_gradients

    def values(self, points):
        return -self.base.values(points)

    def gradients(self, points):
        v, g = self.base.gradients(points)
        return -v, -g

    def hessians(self, points):
        return -self.base.hessians(points)

    def describe(self) -> str:
        return f"-[{self.base.describe()}]"


class FiberDiffeo(ABC):
    """A fiber-preserving map (q, xi) -> (q, phi(q, xi))."""

    @abstractmethod
    def apply(self, q: np.ndarray, xi: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def fiber_jacobian(self, q: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """(m, k, k) derivative of phi in xi."""

    def base_jacobian(self, q: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """(m, k, n) derivative of phi in q."""
        return np.zeros((q.shape[0], xi.shape[1], q.shape[1]))

    @property
    def is_identity(self) -> bool:
        return False


class IdentityFiberDiffeo(FiberDiffeo):
    def apply(self, q, xi):
        return np.array(xi, dtype=float)

    def fiber_jacobian(self, q, xi):
        m, k = xi.shape
        return np.broadcast_to(np.eye(k), (m, k, k)).copy()

    @property
    def is_identity(self) -> bool:
        return True


class FiberShift(FiberDiffeo):
    """
    phi(xi) = xi + bump(|xi| / radius) v

    It is the identity for |xi| >= radius. It is a diffeomorphism when
    |v| stays below the inverse Lipschitz constant of the bump term,
    roughly radius / 3.75.
    """

    def __init__(self, vector: Sequence[float], radius: float):
        self.vector = np.asarray(vector, dtype=float).reshape(-1)
        self.radius = float(radius)
        if not self.radius > 0:
            raise GFQIError("fiber shift radius must be positive")
        if np.linalg.norm(self.vector) * 3.75 >= self.radius:
            raise GFQIError("fiber shift vector too long for a diffeomorphism")

    def apply(self, q, xi):
        r = np.linalg.norm(xi, axis=1) / self.radius
        (weight,) = bump_profile(r, order=0)
        return xi + weight[:, None] * self.vector[None, :]

    def fiber_jacobian(self, q, xi):
        norm = np.linalg.norm(xi, axis=1)
        _, d1 = bump_profile(norm / self.radius, order=1)
        safe = np.where(norm > 0, norm, 1.0)
        grad_weight = (d1 / self.radius / safe)[:, None] * xi
        grad_weight[norm == 0] = 0.0
        m, k = xi.shape
        return np.eye(k)[None, :, :] + np.einsum(
            "i,mj->mij", self.vector, grad_weight
        )


class FiberDiffeoCore(GeneratingCore):
    """S(q; phi(q, xi))"""

    def __init__(self, base: GeneratingCore, diffeo: FiberDiffeo):
        super().__init__(base.n, base.k, base.regularity)
        self.base = base
        self.diffeo = diffeo

    @property
    def exact_gradients(self) -> bool:
        return self.base.exact_gradients

    def _pulled(self, points):
        pts = np.atleast_2d(points)
        q, xi = pts[:, : self.n], pts[:, self.n :]
        return q, xi, np.concatenate([q, self.diffeo.apply(q, xi)], axis=1)

    def values(self, points):
        _, _, moved = self._pulled(points)
        return self.base.values(moved)

    def gradients(self, points):
        q, xi, moved = self._pulled(points)
        v, g = self.base.gradients(moved)
        g_q, g_xi = g[:, : self.n], g[:, self.n :]
        jac_xi = self.diffeo.fiber_jacobian(q, xi)
        jac_q = self.diffeo.base_jacobian(q, xi)
        new_q = g_q + np.einsum("mkn,mk->mn", jac_q, g_xi)
        new_xi = np.einsum("mkj,mk->mj", jac_xi, g_xi)
        return v, np.concatenate([new_q, new_xi], axis=1)

    def describe(self) -> str:
        return f"{self.base.describe()} o fiber diffeo"


class BaseShiftCore(GeneratingCore):
    """
    S(q; xi) + c * h(q), with h(q) = H(q, 0) read from a phase-space field
    that depends on q only on the relevant region.
    """

    def __init__(self, base: GeneratingCore, field: ScalarField, coefficient: float):
        if field.dim != 2 * base.n:
            raise GFQIError("base shift field must live on T*T^n")
        super().__init__(
            base.n, base.k, Regularity.weakest([base.regularity, field.regularity])
        )
        self.base = base
        self.field = field
        self.coefficient = float(coefficient)

    @property
    def exact_gradients(self) -> bool:
        return self.base.exact_gradients and self.field.mode.value == "exact"

    def _phase(self, q: np.ndarray) -> np.ndarray:
        return np.concatenate([q, np.zeros_like(q)], axis=1)

    def values(self, points):
        pts = np.atleast_2d(points)
        shift = self.field.evaluate_many(self._phase(pts[:, : self.n]))
        return self.base.values(pts) + self.coefficient * shift

    def gradients(self, points):
        pts = np.atleast_2d(points)
        phase = self._phase(pts[:, : self.n])
        v, g = self.base.gradients(pts)
        g = np.array(g)
        g[:, : self.n] += self.coefficient * self.field.gradient_many(phase)[:, : self.n]
        return v + self.coefficient * self.field.evaluate_many(phase), g

    def describe(self) -> str:
        return f"{self.base.describe()} + {self.coefficient:g}*{self.field.name}|p=0"
