"""
表达式语言测试
"""

import unittest

import numpy as np
import pytest

from rigidlab.errors import DomainError, KinkPointError, ParseError, PhaseSpaceError
from rigidlab.hamlang import (
    ExpressionField,
    Layout,
    bump_profile,
    evaluate,
    gradient,
    hessian,
    kink_mask,
    parse_expression,
    to_source,
)
from rigidlab.phase import Box, GradientMode, Regularity


class TestParser(unittest.TestCase):
    """测试表达式解析"""

    def test_precedence(self):
        """测试运算符优先级"""
        e = parse_expression("1 + 2*q1^2 - p1/4", (1, 0))
        self.assertEqual(evaluate(e, [3.0, 2.0]), 1.0 + 18.0 - 0.5)

    def test_unary_minus_binds_to_base(self):
        e = parse_expression("-q1^2", (1, 0))
        self.assertEqual(evaluate(e, [3.0, 0.0]), 9.0)
        e = parse_expression("-(q1^2)", (1, 0))
        self.assertEqual(evaluate(e, [3.0, 0.0]), -9.0)

    def test_canonical_source_round_trip(self):
        e = parse_expression("sin(q1)*p2 + max(q2, 0.5, -p1)", (2, 0))
        again = parse_expression(to_source(e.root), (2, 0))
        self.assertEqual(e, again)

    def test_regularity_flags(self):
        """测试正则性标记"""
        self.assertIs(parse_expression("q1*p1", (1, 0)).regularity, Regularity.SMOOTH)
        self.assertIs(
            parse_expression("abs(q1)", (1, 0)).regularity, Regularity.LIPSCHITZ
        )
        declared = parse_expression("q1*abs(q1)", (1, 0), declared=Regularity.C11)
        self.assertIs(declared.regularity, Regularity.C11)
        # a smooth expression stays smooth whatever the author declares
        smooth = parse_expression("q1^2", (1, 0), declared=Regularity.C11)
        self.assertIs(smooth.regularity, Regularity.SMOOTH)

    def test_only_c11_can_be_declared(self):
        with self.assertRaises(ValueError):
            parse_expression("q1", (1, 0), declared=Regularity.LIPSCHITZ)

    def test_generating_layout(self):
        e = parse_expression("cos(q1) + xi1^2", (1, 1), Layout.GENERATING)
        self.assertEqual(e.n_coords, 2)
        self.assertEqual(evaluate(e, [0.0, 2.0]), 5.0)
        with self.assertRaises(ParseError):
            parse_expression("p1", (1, 0), Layout.GENERATING)

    def test_time_variable(self):
        e = parse_expression("t*q1", (1, 0))
        self.assertEqual(evaluate(e, [2.0, 0.0], t=0.25), 0.5)


@pytest.mark.parametrize(
    "source, message",
    [
        ("", "empty"),
        ("   ", "empty"),
        ("q2", "variable index out of range"),
        ("q0", "variable index out of range"),
        ("xi1", "variable index out of range"),
        ("r1", "unknown identifier"),
        ("sin(q1, p1)", "arity mismatch"),
        ("max(q1)", "arity mismatch"),
        ("q1^2.5", "exponent must be a non-negative integer literal"),
        ("q1^-1", "exponent must be a non-negative integer literal"),
        ("(q1 + p1", "expected ')'"),
        ("q1 p1", "unexpected token"),
        ("sin q1", "argument list"),
        ("q1 + $", "unexpected character"),
        ("ξ1", "unexpected character 'ξ'"),
        ("q1²", "unexpected character '²'"),
        ("q1 + ١", "unexpected character"),
        ("1e400*q1", "out of range"),
    ],
)
def test_parse_errors(source, message):
    with pytest.raises(ParseError) as exc_info:
        parse_expression(source, (1, 0))
    assert message in str(exc_info.value)


def test_parse_error_position():
    with pytest.raises(ParseError) as exc_info:
        parse_expression("q1 + $", (1, 0))
    assert exc_info.value.line == 1
    assert exc_info.value.column == 6
    assert "(line 1, column 6)" in str(exc_info.value)

    with pytest.raises(ParseError) as exc_info:
        parse_expression("q1 +\n  r2", (1, 0))
    assert (exc_info.value.line, exc_info.value.column) == (2, 3)


class TestDerivatives(unittest.TestCase):
    """测试精确导数"""

    def test_polynomial(self):
        e = parse_expression("q1^2*p1", (1, 0))
        np.testing.assert_array_equal(gradient(e, [2.0, 3.0]), [12.0, 4.0])
        np.testing.assert_array_equal(hessian(e, [2.0, 3.0]), [[6.0, 4.0], [4.0, 0.0]])

    def test_transcendental(self):
        e = parse_expression("sin(q1)*exp(p1)", (1, 0))
        q, p = 0.3, -0.2
        np.testing.assert_allclose(
            gradient(e, [q, p]),
            [np.cos(q) * np.exp(p), np.sin(q) * np.exp(p)],
            rtol=1e-15,
        )
        np.testing.assert_allclose(
            hessian(e, [q, p]),
            [
                [-np.sin(q) * np.exp(p), np.cos(q) * np.exp(p)],
                [np.cos(q) * np.exp(p), np.sin(q) * np.exp(p)],
            ],
            rtol=1e-14,
        )

    def test_division_and_sqrt(self):
        e = parse_expression("sqrt(1 + q1^2)/p1", (1, 0))
        q, p = 0.75, 2.0
        r = np.sqrt(1 + q * q)
        np.testing.assert_allclose(gradient(e, [q, p]), [q / r / p, -r / p**2])

    def test_bump_profile(self):
        """测试截断函数"""
        value, d1, d2 = bump_profile(np.array([0.0, 0.5, 0.75, 1.0, -2.0]), order=2)
        np.testing.assert_array_equal(value, [1.0, 1.0, 0.5, 0.0, 0.0])
        self.assertEqual(d1[0], 0.0)
        self.assertEqual(d1[3], 0.0)
        self.assertLess(d1[2], 0.0)
        self.assertEqual(d2[2], 0.0)
        e = parse_expression("bump(q1)", (1, 0))
        self.assertEqual(evaluate(e, [0.75, 0.0]), 0.5)
        self.assertEqual(evaluate(e, [-0.75, 0.0]), 0.5)

    def test_abs_kink(self):
        e = parse_expression("abs(q1)", (1, 0))
        np.testing.assert_array_equal(gradient(e, [-0.5, 0.0]), [-1.0, 0.0])
        with self.assertRaises(KinkPointError) as ctx:
            gradient(e, [0.0, 1.0])
        np.testing.assert_array_equal(ctx.exception.point, [0.0, 1.0])
        mask = kink_mask(e, np.array([[0.0, 1.0], [1e-15, 0.0], [0.1, 0.0]]))
        self.assertEqual(mask.tolist(), [True, True, False])

    def test_max_kink(self):
        e = parse_expression("max(q1, p1)", (1, 0))
        np.testing.assert_array_equal(gradient(e, [1.0, 0.0]), [1.0, 0.0])
        np.testing.assert_array_equal(gradient(e, [0.0, 1.0]), [0.0, 1.0])
        with self.assertRaises(KinkPointError):
            gradient(e, [0.5, 0.5])

    def test_c11_keeps_first_derivative(self):
        """C1,1 声明: 折点处一阶导数仍然存在"""
        e = parse_expression("q1*abs(q1)/2", (1, 0), declared=Regularity.C11)
        np.testing.assert_array_equal(gradient(e, [0.0, 0.0]), [0.0, 0.0])
        with self.assertRaises(KinkPointError):
            hessian(e, [0.0, 0.0])
        self.assertEqual(hessian(e, [0.5, 0.0])[0, 0], 1.0)
        self.assertEqual(hessian(e, [-0.5, 0.0])[0, 0], -1.0)

    def test_c11_max_uses_branch_average(self):
        e = parse_expression("max(q1, 0)^2", (1, 0), declared=Regularity.C11)
        np.testing.assert_array_equal(gradient(e, [0.0, 0.0]), [0.0, 0.0])
        np.testing.assert_array_equal(gradient(e, [0.5, 0.0]), [1.0, 0.0])


@pytest.mark.parametrize(
    "source, point",
    [
        ("1/q1", [0.0, 0.0]),
        ("sqrt(q1)", [-1.0, 0.0]),
        ("exp(exp(q1))", [10.0, 0.0]),
    ],
)
def test_domain_errors(source, point):
    e = parse_expression(source, (1, 0))
    with pytest.raises(DomainError):
        evaluate(e, point)


class TestExpressionField(unittest.TestCase):
    """测试 ExpressionField"""

    def test_from_source(self):
        f = ExpressionField.from_source("(q1^2 + q2^2 + p1^2 + p2^2)/2", 2)
        self.assertEqual(f.dim, 4)
        self.assertIs(f.mode, GradientMode.EXACT)
        self.assertEqual(f.max_order, 2)
        self.assertEqual(f.evaluate([1.0, 0.0, 0.0, 1.0]), 1.0)
        self.assertEqual(f.name, "(q1^2 + q2^2 + p1^2 + p2^2)/2")

    def test_batches(self):
        f = ExpressionField.from_source("q1*p1")
        pts = np.array([[1.0, 2.0], [3.0, 4.0], [-1.0, 0.5]])
        np.testing.assert_array_equal(f.evaluate_many(pts), [2.0, 12.0, -0.5])
        np.testing.assert_array_equal(
            f.gradient_many(pts), [[2.0, 1.0], [4.0, 3.0], [0.5, -1.0]]
        )
        self.assertEqual(f.hessian_many(pts).shape, (3, 2, 2))

    def test_try_gradient_marks_kinks(self):
        f = ExpressionField.from_source("abs(q1)*p1")
        self.assertEqual(f.max_order, 1)
        grads, ok = f.try_gradient_many(np.array([[0.0, 1.0], [2.0, 1.0]]))
        self.assertEqual(ok.tolist(), [False, True])
        self.assertTrue(np.all(np.isnan(grads[0])))
        np.testing.assert_array_equal(grads[1], [1.0, 2.0])
        with self.assertRaises(KinkPointError):
            f.gradient_many(np.array([[0.0, 1.0]]))

    def test_domain_is_enforced(self):
        f = ExpressionField.from_source("q1", domain=Box.cube(2, -1.0, 1.0))
        with self.assertRaises(DomainError):
            f.evaluate([1.5, 0.0])
        with self.assertRaises(PhaseSpaceError):
            f.evaluate([0.0, 0.0, 0.0])

    def test_rejects_fiber_variables(self):
        e = parse_expression("q1 + xi1", (1, 1))
        with self.assertRaises(PhaseSpaceError):
            ExpressionField(e)
