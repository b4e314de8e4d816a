"""
实验类型测试
"""

import os

import numpy as np
import pytest

from evaluation.core.experiments import (
    EXPERIMENTS,
    Assertion,
    ItemContext,
    generated_pairs,
    resolve_field,
    resolve_gfqi,
    run_bracket,
    run_minmax,
    run_property_suite,
    run_rigidity,
)
from evaluation.core.schema import KINDS
from rigidlab.errors import ConfigError
from rigidlab.flow import IntegratorConfig
from rigidlab.phase import Regularity


@pytest.fixture
def ctx(tmp_path):
    return ItemContext(
        name="unit",
        index=0,
        label="item",
        seed=5,
        integrator=IntegratorConfig(),
        schedule={},
        base_dir=str(tmp_path),
        output_dir=str(tmp_path),
    )


def test_every_kind_has_a_runner():
    assert sorted(EXPERIMENTS) == sorted(KINDS)


@pytest.mark.parametrize(
    "assertion, passed",
    [
        (Assertion("a", "le", 1.0, "<=", 1.0), True),
        (Assertion("a", "le", 1.1, "<=", 1.0, 0.05), False),
        (Assertion("a", "ge", 0.96, ">=", 1.0, 0.05), True),
        (Assertion("a", "approx", 1.04, "~=", 1.0, 0.05), True),
        (Assertion("a", "approx", 0.9, "~=", 1.0, 0.05), False),
        (Assertion("a", "eq", 0, "==", 0), True),
        (Assertion("a", "nan", float("nan"), "<=", 1.0), False),
        (Assertion("a", "missing", None, "<=", 1.0), False),
    ],
)
def test_assertion_relations(assertion, passed):
    assert assertion.passed is passed


def test_assertion_as_dict_drops_non_finite_values():
    data = Assertion("a", "inf", float("inf"), "<=", 1.0).as_dict()
    assert data["value"] is None
    assert data["tolerance"] is None
    assert data["passed"] is False


def test_item_streams_are_independent(ctx):
    again = ItemContext(**{**ctx.__dict__})
    other = ItemContext(**{**ctx.__dict__, "index": 1})
    assert ctx.rng().random() == again.rng().random()
    assert ctx.rng().random() != other.rng().random()
    assert ctx.artifact_path("diagram.csv").endswith("unit.item.diagram.csv")


def test_resolve_references():
    ref = {"expression": "q1*abs(q1)", "regularity": "c11", "support": [-1, 1]}
    H = resolve_field(ref)
    assert H.regularity is Regularity.C11
    assert tuple(H.support.upper) == (1.0, 1.0)
    with pytest.raises(ConfigError):
        resolve_field("cos_gfqi")
    with pytest.raises(ConfigError):
        resolve_gfqi("harmonic")
    S = resolve_gfqi({"expression": "cos(6.283185307179586*q1)", "stabilize": [[-1.0]]})
    assert (S.k, S.index) == (1, 1)


def test_run_bracket(ctx):
    item = {
        "f": "momentum",
        "g": "pendulum",
        "expected": "-sin(q1)",
        "points": 20,
        "box": [-2.0, 2.0],
    }
    outcome = run_bracket(item, ctx)
    assert len(outcome.frame) == 20
    assert {"x1", "x2", "bracket", "bracket_fd", "expected"} <= set(outcome.frame)
    assert [a.name for a in outcome.assertions] == [
        "fd bracket relative error",
        "bracket against oracle",
    ]
    assert all(a.passed for a in outcome.assertions)


def test_run_bracket_is_seeded(ctx):
    item = {"f": "harmonic", "g": "cubic", "h": "free", "points": 10}
    first = run_bracket(item, ctx).frame
    second = run_bracket(item, ctx).frame
    assert first.equals(second)


def test_run_minmax(ctx, tmp_path):
    item = {
        "S": "cos_gfqi",
        "resolution": 64,
        "expected_unit": -1.0,
        "expected_fundamental": 1.0,
        "invariance": [[{"add_constant": 0.75}]],
        "export_diagram": True,
    }
    outcome = run_minmax(item, ctx)
    assert all(a.passed for a in outcome.assertions)
    assert outcome.frame["variant"].tolist()[0] == "base"
    assert outcome.artifacts == ["unit.item.diagram.csv"]
    assert os.path.exists(tmp_path / "unit.item.diagram.csv")


def test_run_rigidity_coupling(ctx):
    outcome = run_rigidity({"check": "coupling", "d_min": 2, "d_max": 6}, ctx)
    assert outcome.frame["d"].tolist() == [2, 3, 4, 5, 6]
    assert outcome.frame["kernel_is_ones"].all()
    assert all(a.passed for a in outcome.assertions)


def test_run_rigidity_jacobi(ctx):
    item = {"check": "jacobi", "map": "shear_d2", "point": [0.2, -0.1, 0.5, 0.3]}
    outcome = run_rigidity(item, ctx)
    assert all(a.passed for a in outcome.assertions)
    np.testing.assert_allclose(outcome.frame["constancy_det"], 1.0)


def test_generated_pairs_are_reproducible():
    first = generated_pairs(3, np.random.default_rng(9))
    second = generated_pairs(3, np.random.default_rng(9))
    assert [S.name for S, _ in first] == ["pair1.S1", "pair2.S1", "pair3.S1"]
    pts = np.array([[0.1], [0.6]])
    for (a, b), (c, d) in zip(first, second):
        np.testing.assert_array_equal(a.values(pts), c.values(pts))
        np.testing.assert_array_equal(b.values(pts), d.values(pts))


def test_run_property_suite(ctx):
    item = {"generated": {"count": 2}, "resolution": 64}
    outcome = run_property_suite(item, ctx)
    assert outcome.frame["pair"].unique().tolist() == [1, 2]
    assert outcome.assertions[0].passed
