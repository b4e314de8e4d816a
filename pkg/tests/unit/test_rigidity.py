"""
辛映射 C0 刚性测试
"""

import unittest

import numpy as np
import pytest
import sympy

from rigidlab.errors import DifferentiationError, RigidityError
from rigidlab.flow import IntegratorConfig
from rigidlab.hamlang import ExpressionField
from rigidlab.phase import Box, symplectic_matrix
from rigidlab.rigidity import (
    RigidityMap,
    bracket_tables,
    c_statistics,
    constancy_system,
    coupling_matrix,
    coupling_matrix_kernel,
    diagonal_brackets,
    flow_family_c0_bound,
    flow_family_member,
    jacobi_elimination_check,
    limit_rigidity_experiment,
    mollified_jacobian,
    oscillating_c0_bound,
    oscillating_map,
    relation_tables,
    symmetric_from_seed,
    symplectic_defects,
    tilde_transform,
)


@pytest.mark.parametrize("d", [2, 3, 7, 50])
def test_coupling_matrix_kernel(d):
    rank, kernel = coupling_matrix_kernel(d)
    assert rank == d - 1
    assert len(kernel) == 1
    assert all(v == 1 for v in kernel[0])
    assert coupling_matrix(d).determinant == 0


def test_coupling_matrix_small_dimensions():
    cm = coupling_matrix(1)
    assert cm.rank == 0
    assert cm.matrix == sympy.Matrix([[0]])
    with pytest.raises(RigidityError):
        coupling_matrix(0)


class TestRigidityMap(unittest.TestCase):
    """测试映射的构造"""

    def test_component_count(self):
        with self.assertRaises(RigidityError):
            RigidityMap.from_expressions(["q1", "p1", "q1"])
        with self.assertRaises(RigidityError):
            RigidityMap([])

    def test_component_dimensions(self):
        q = ExpressionField.from_source("q1")
        p2 = ExpressionField.from_source("p2", 2)
        with self.assertRaises(RigidityError):
            RigidityMap([q, p2])

    def test_identity(self):
        phi = RigidityMap.identity(2)
        x = np.array([[0.1, 0.2, 0.3, 0.4]])
        np.testing.assert_array_equal(phi.apply(x), x)
        np.testing.assert_array_equal(phi.jacobian_many(x)[0], np.eye(4))
        self.assertEqual([c.name for c in phi.components], ["Q1", "Q2", "P1", "P2"])

    def test_linear_symplectic(self):
        rng = np.random.default_rng(4)
        S = symmetric_from_seed(2, rng)
        phi = RigidityMap.linear_symplectic(S)
        pts = rng.standard_normal((5, 4))
        self.assertLessEqual(np.max(symplectic_defects(phi.jacobian_many(pts))), 1e-12)
        back = phi.inverse(phi.apply(pts))
        np.testing.assert_allclose(back, pts, atol=1e-12)

    def test_linear_needs_even_square_matrix(self):
        with self.assertRaises(RigidityError):
            RigidityMap.linear(np.eye(3))


class TestBracketIdentities(unittest.TestCase):
    """测试对角括号与 Jacobi 消元"""

    def setUp(self):
        """设置测试环境"""
        self.shear = RigidityMap.from_expressions(
            ["q1 + 3*p1^2 + p2^2", "q2 + 2*p1*p2", "p1", "p2"], name="shear_d2"
        )
        self.points = Box.cube(4, -1.0, 1.0).grid(3).points()

    def test_component_brackets(self):
        diag = diagonal_brackets(self.shear, self.points)
        np.testing.assert_allclose(diag, 1.0, atol=1e-12)
        tables = relation_tables(self.shear, self.points[:5])
        expected = np.broadcast_to(symplectic_matrix(2), tables.shape)
        np.testing.assert_allclose(tables, expected, atol=1e-6)

    def test_tilde_diagonal_vanishes(self):
        """Q~_i, P~_i 的括号为 1 - d / d = 0"""
        tilde = tilde_transform(self.shear)
        self.assertEqual(tilde.components[0].name, "Q1~")
        diag = diagonal_brackets(tilde, self.points)
        self.assertLessEqual(np.max(np.abs(diag)), 1e-8)

    def test_jacobi_elimination(self):
        report = jacobi_elimination_check(self.shear, [0.2, -0.1, 0.5, 0.3])
        self.assertTrue(report.passed)
        # two outer components for each ordered pair i != j
        self.assertEqual(len(report.entries), 4)
        self.assertLessEqual(report.max_abs, 1e-10)

    def test_jacobi_elimination_needs_second_derivatives(self):
        kink = RigidityMap.from_expressions(["q1 + abs(p1)", "p1"])
        with self.assertRaises(DifferentiationError):
            jacobi_elimination_check(kink, [0.1, 0.2])

    def test_constancy_system(self):
        a, det = constancy_system(self.shear, [0.2, -0.1, 0.5, 0.3])
        self.assertAlmostEqual(det, 1.0, places=12)
        self.assertEqual(a.shape, (4, 4))
        collapsed = RigidityMap.from_expressions(["0*q1", "p1"])
        _, det = constancy_system(collapsed, [0.3, 0.4])
        self.assertEqual(det, 0.0)


def test_c_statistics_of_the_identity():
    pts = Box.cube(2, -1.0, 1.0).grid(5).points()
    tables = bracket_tables(RigidityMap.identity(1).jacobian_many(pts))
    assert c_statistics(tables) == (1.0, 0.0)


def test_mollified_jacobian_is_exact_for_linear_maps():
    matrix = np.array([[1.0, 0.5], [0.0, 1.0]])
    phi = RigidityMap.linear(matrix)
    pts = Box.cube(2, -1.0, 1.0).grid(4).points()
    jac = mollified_jacobian(phi, pts, 0.1)
    np.testing.assert_allclose(jac, np.broadcast_to(matrix, jac.shape), atol=1e-10)


class TestOscillatingFamily(unittest.TestCase):
    """测试振荡剪切族"""

    def test_members_are_symplectic(self):
        pts = Box.cube(2, -1.0, 1.0).grid(7).points()
        for n in (1, 2, 5):
            phi = oscillating_map(n)
            defects = symplectic_defects(phi.jacobian_many(pts))
            self.assertLessEqual(np.max(defects), 1e-12)

    def test_c0_bound(self):
        pts = Box.cube(2, -1.0, 1.0).grid(9).points()
        for n in (1, 3):
            distance = np.linalg.norm(oscillating_map(n).apply(pts) - pts, axis=1)
            self.assertLessEqual(np.max(distance), oscillating_c0_bound(n, 1.0) + 1e-12)

    def test_index_starts_at_one(self):
        with self.assertRaises(RigidityError):
            oscillating_map(0)


def test_limit_experiment_on_oscillating_shears():
    report = limit_rigidity_experiment(
        oscillating_map,
        RigidityMap.identity(1),
        3,
        Box.cube(2, -1.0, 1.0),
        resolution=9,
    )
    frame = report.frame
    assert frame["n"].tolist() == ["1", "2", "3", "limit"]
    assert frame["sup_distance"].iloc[:3].is_monotonic_decreasing
    # C stays 1 along the family and in the limit
    np.testing.assert_allclose(frame["C_estimate"], 1.0, atol=1e-10)
    assert frame["max_table_deviation"].iloc[-1] <= 1e-10
    assert frame["at_infinity_deviation"].isna().all()
    assert report.passed


def test_limit_experiment_on_bump_flows(catalog, tmp_path):
    H = catalog["bump_oscillator"].as_field()
    cfg = IntegratorConfig(dt=1e-2)
    box = Box.cube(2, -3.0, 3.0)
    report = limit_rigidity_experiment(
        lambda n: flow_family_member(H, n, cfg),
        RigidityMap.identity(1),
        2,
        box,
        resolution=7,
        support=H.support,
    )
    frame = report.frame
    assert frame["at_infinity_deviation"].iloc[0] <= 1e-12
    assert frame["sup_distance"].iloc[1] < frame["sup_distance"].iloc[0]
    assert report.passed
    report.to_csv(tmp_path / "limit.csv")
    assert (tmp_path / "limit.csv").read_text().startswith("n,sup_distance")
    assert flow_family_c0_bound(H, 2, box) == pytest.approx(
        flow_family_c0_bound(H, 1, box) / 2
    )


def test_limit_experiment_rejects_non_symplectic_members():
    dilation = RigidityMap.linear(np.diag([2.0, 2.0]))
    with pytest.raises(RigidityError, match="not symplectic"):
        limit_rigidity_experiment(
            [dilation], RigidityMap.identity(1), 1, Box.cube(2, -1.0, 1.0), resolution=5
        )
