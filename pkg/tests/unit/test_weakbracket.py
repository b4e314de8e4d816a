"""
Lipschitz 哈密顿量的集值括号测试
"""

import json
import unittest

import numpy as np
import pandas as pd
import pytest

from rigidlab.errors import WeakBracketError
from rigidlab.fields import BracketField
from rigidlab.hamlang import ExpressionField
from rigidlab.phase import Box, Regularity
from rigidlab.weakbracket import (
    ConvexSetCloud,
    SamplingSchedule,
    VectorField,
    c0_commute_defect,
    deduplicate,
    directions,
    hausdorff_distance,
    rs_lie_bracket,
    weak_hamiltonian_field,
    weak_lie_bracket,
)


@pytest.fixture
def sched():
    return SamplingSchedule(radius=1e-2, shrink=0.5, shells=6, samples=32, seed=7)


class TestSamplingSchedule:
    """测试采样壳层"""

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"radius": 0.0},
            {"shrink": 1.0},
            {"shrink": 0.0},
            {"shells": 2},
            {"samples": 4},
        ],
    )
    def test_rejects_invalid_schedules(self, kwargs):
        with pytest.raises(WeakBracketError):
            SamplingSchedule(**kwargs)

    def test_shell_points_stay_in_their_shell(self, sched):
        x = np.array([0.2, -0.1])
        for shell in range(sched.shells):
            inner, outer = sched.radii(shell)
            r = np.linalg.norm(sched.shell_points(x, shell) - x, axis=1)
            assert np.all(r >= inner) and np.all(r <= outer)

    def test_shell_points_are_reproducible(self, sched):
        x = np.zeros(4)
        first = sched.shell_points(x, 2)
        np.testing.assert_array_equal(first, sched.shell_points(x, 2))
        other = SamplingSchedule.from_dict({**sched.as_dict(), "seed": 8})
        assert not np.array_equal(other.shell_points(x, 2), first)


class TestWeakHamiltonianField:
    """测试弱哈密顿向量场"""

    def test_smooth_field_is_the_classical_vector(self, catalog, sched):
        harmonic = catalog["harmonic"].as_field()
        cloud = weak_hamiltonian_field(harmonic, [0.25, -0.5], sched)
        assert cloud.is_singleton
        np.testing.assert_allclose(cloud.points[0], [-0.5, -0.25])
        assert cloud.provenance["singleton"]

    def test_abs_kink_at_the_origin(self, catalog, sched):
        """|q| 在折点处给出两个极限"""
        kink = catalog["abs_kink"].as_field()
        cloud = weak_hamiltonian_field(kink, [0.0, 0.0], sched)
        assert not cloud.is_singleton
        np.testing.assert_allclose(cloud.points, [[0.0, -1.0], [0.0, 1.0]])
        assert cloud.diameter == 2.0
        assert cloud.provenance["generators"] == 2

    def test_abs_kink_away_from_the_kink(self, catalog, sched):
        kink = catalog["abs_kink"].as_field()
        cloud = weak_hamiltonian_field(kink, [0.5, 0.0], sched)
        assert cloud.is_singleton
        np.testing.assert_allclose(cloud.points[0], [0.0, -1.0])

    def test_max_on_the_diagonal(self, catalog, sched):
        cloud = weak_hamiltonian_field(
            catalog["max_diagonal"].as_field(), [0.3, 0.3], sched
        )
        np.testing.assert_allclose(cloud.points, [[0.0, -1.0], [1.0, 0.0]])

    def test_requires_lipschitz_flag(self, catalog, sched):
        kink = catalog["abs_kink"].as_field()
        unknown = BracketField(kink, catalog["free"].as_field())
        with pytest.raises(WeakBracketError):
            weak_hamiltonian_field(unknown, [0.5, 1.0], sched)


class TestLieBrackets(unittest.TestCase):
    """测试两种 Lie 括号"""

    def setUp(self):
        """设置测试环境"""
        self.sched = SamplingSchedule(seed=3)
        self.harmonic = ExpressionField.from_source("(q1^2 + p1^2)/2")
        self.cubic = ExpressionField.from_source("p1^3/3 + q1^2*p1")

    def test_rs_bracket_of_hamiltonian_fields(self):
        x = np.array([0.4, -0.3])
        cloud = rs_lie_bracket(
            VectorField.hamiltonian(self.harmonic),
            VectorField.hamiltonian(self.cubic),
            x,
            self.sched,
        )
        self.assertTrue(cloud.is_singleton)
        # X_{{H,K}} with {H, K} = q^3 - q p^2
        q, p = x
        expected = [-2 * q * p, p**2 - 3 * q**2]
        np.testing.assert_allclose(cloud.points[0], expected, atol=1e-5)

    def test_rs_bracket_of_constants_vanishes(self):
        cloud = rs_lie_bracket(
            VectorField.constant([1.0, 0.0]),
            VectorField.constant([0.0, 2.0]),
            [0.1, 0.1],
            self.sched,
        )
        np.testing.assert_allclose(cloud.points, [[0.0, 0.0]], atol=1e-12)

    def test_rs_bracket_dimension_mismatch(self):
        with self.assertRaises(WeakBracketError):
            rs_lie_bracket(
                VectorField.constant([1.0, 0.0]),
                VectorField.constant([1.0, 0.0, 0.0, 0.0]),
                [0.0, 0.0],
            )

    def test_weak_lie_bracket_of_c11_inputs(self):
        """{q|q|/2, p^2/2} = |q| p 在 q = 0 处不可微"""
        c11 = ExpressionField.from_source("q1*abs(q1)/2", declared=Regularity.C11)
        free = ExpressionField.from_source("p1^2/2")
        cloud = weak_lie_bracket(c11, free, [0.0, 2.0], self.sched)
        self.assertFalse(cloud.is_singleton)
        self.assertEqual(cloud.provenance["kind"], "weak_lie_bracket")
        up, down, right = cloud.support(np.array([[0.0, 1.0], [0.0, -1.0], [1.0, 0.0]]))
        self.assertAlmostEqual(up, 2.0, delta=0.05)
        self.assertAlmostEqual(down, 2.0, delta=0.05)
        self.assertLessEqual(right, 0.01)

    def test_weak_lie_bracket_requires_c11(self):
        kink = ExpressionField.from_source("abs(q1)")
        with self.assertRaises(WeakBracketError):
            weak_lie_bracket(kink, self.harmonic, [0.5, 0.0], self.sched)


class TestConvexSetCloud(unittest.TestCase):
    """测试凸集生成元"""

    def test_empty_cloud(self):
        with self.assertRaises(WeakBracketError):
            ConvexSetCloud(np.zeros((0, 2)))

    def test_support_and_hausdorff(self):
        segment = ConvexSetCloud([[0.0, -1.0], [0.0, 1.0]])
        dense = ConvexSetCloud(np.stack([np.zeros(5), np.linspace(-1, 1, 5)], axis=1))
        self.assertAlmostEqual(hausdorff_distance(segment, dense), 0.0, places=12)
        origin = ConvexSetCloud.singleton(np.zeros(2))
        self.assertAlmostEqual(hausdorff_distance(segment, origin), 1.0, places=12)
        shifted = ConvexSetCloud.singleton(np.array([3.0, 4.0]))
        self.assertAlmostEqual(hausdorff_distance(origin, shifted), 5.0, places=12)
        with self.assertRaises(WeakBracketError):
            hausdorff_distance(origin, ConvexSetCloud.singleton(np.zeros(4)))

    def test_directions_are_unit_vectors(self):
        for dim in (2, 4):
            dirs = directions(dim, 16)
            self.assertEqual(dirs.shape, (16 + 2 * dim, dim))
            np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)

    def test_deduplicate(self):
        values = np.array([[1.0, 0.0], [0.0, 1.0], [1.0 + 1e-12, 0.0]])
        np.testing.assert_array_equal(deduplicate(values), [[0.0, 1.0], [1.0, 0.0]])


def test_cloud_export(tmp_path):
    provenance = {"kind": "weak_hamiltonian_field"}
    cloud = ConvexSetCloud([[0.0, -1.0], [0.0, 1.0]], provenance)
    path = tmp_path / "cloud.csv"
    cloud.export(path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["v1", "v2"]
    np.testing.assert_array_equal(frame.to_numpy(), cloud.points)
    sidecar = json.loads((tmp_path / "cloud.json").read_text(encoding="utf-8"))
    assert sidecar == provenance


def test_c0_commute_defect():
    """H_n = p + sin(q)/n 与 K = p 的括号按 1/n 衰减"""
    box = Box.cube(2, -1.0, 1.0)
    H = ExpressionField.from_source("p1", support=box)
    K = ExpressionField.from_source("p1", support=box)

    def H_seq(n):
        return ExpressionField.from_source(f"p1 + sin(q1)/{n}", support=box)

    report = c0_commute_defect(H_seq, [K, K, K], H, K, 33, 3, tolerance=0.4)
    frame = report.frame
    assert frame["n"].tolist() == [1, 2, 3]
    n = frame["n"].to_numpy()
    # {H_n, K} = cos(q)/n, largest at q = 0
    np.testing.assert_allclose(frame["bracket_norm"], 1.0 / n, atol=1e-12)
    np.testing.assert_allclose(frame["h_distance"], 2 * np.sin(1.0) / n, atol=1e-12)
    np.testing.assert_array_equal(frame["k_distance"], 0.0)
    assert report.evidence
    assert not c0_commute_defect(H_seq, [K, K, K], H, K, 33, 3).evidence


def test_c0_commute_defect_constant_bracket():
    """{p, q} = -1 处处非零, 不能算作 C0 交换"""
    box = Box.cube(2, -1.0, 1.0)
    H = ExpressionField.from_source("p1", support=box)
    K = ExpressionField.from_source("q1", support=box)
    report = c0_commute_defect([H] * 3, [K] * 3, H, K, 17, 3, tolerance=0.5)
    frame = report.frame
    np.testing.assert_allclose(frame["bracket_norm"], 1.0, atol=1e-12)
    np.testing.assert_array_equal(frame["h_distance"], 0.0)
    assert not report.evidence
    assert not frame["evidence"].any()
