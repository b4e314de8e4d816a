import numpy as np
import pytest

from rigidlab.errors import (
    DifferentiationError,
    DomainError,
    PhaseSpaceError,
)
from rigidlab.hamlang import ExpressionField
from rigidlab.phase import (
    Box,
    DiffeoSample,
    FunctionField,
    PhasePoint,
    Regularity,
    SymplecticConvention,
    bracket_relation_table,
    c0_norm,
    fd_gradient_many,
    hamiltonian_vector_field,
    jacobi_residual,
    nested_grid,
    poisson_bracket,
    random_points,
    symplectic_matrix,
    symplecticity_defect,
    sup_norm,
)


def _field(source, d=1, **kwargs):
    return ExpressionField.from_source(source, d, **kwargs)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_symplectic_convention(d):
    """E^2 = -I 且 E^T = -E"""
    square, skew = SymplecticConvention(d).check()
    assert square == 0.0
    assert skew == 0.0
    e = symplectic_matrix(d)
    assert e[0, d] == 1.0
    assert e[d, 0] == -1.0


def test_phase_point_rejects_bad_coordinates():
    with pytest.raises(PhaseSpaceError):
        PhasePoint([1.0, 2.0, 3.0])
    with pytest.raises(PhaseSpaceError):
        PhasePoint([])
    with pytest.raises(PhaseSpaceError):
        PhasePoint([0.0, np.nan])
    with pytest.raises(PhaseSpaceError):
        PhasePoint.from_qp([1.0, 2.0], [3.0])


def test_phase_point_split():
    x = PhasePoint.from_qp([1.0, 2.0], [3.0, 4.0])
    assert x.d == 2
    assert x.q.tolist() == [1.0, 2.0]
    assert x.p.tolist() == [3.0, 4.0]
    assert x == PhasePoint([1.0, 2.0, 3.0, 4.0])
    assert len({x, PhasePoint([1.0, 2.0, 3.0, 4.0])}) == 1


def test_canonical_relations(rng):
    """{q_i, p_j} = delta_ij, {q_i, q_j} = {p_i, p_j} = 0"""
    d = 3
    names = [f"q{i + 1}" for i in range(d)] + [f"p{i + 1}" for i in range(d)]
    coords = [_field(n, d) for n in names]
    for x in random_points(Box.cube(2 * d, -2.0, 2.0), 5, rng):
        for i in range(2 * d):
            for j in range(2 * d):
                expected = symplectic_matrix(d)[i, j]
                assert poisson_bracket(coords[i], coords[j], x) == expected


def test_antisymmetry_is_exact(rng):
    f = _field("(q1^2 + p1^2)/2 + q1*p1^3")
    g = _field("sin(q1)*exp(p1) + q1^3")
    for x in random_points(Box.cube(2, -1.0, 1.0), 50, rng):
        assert poisson_bracket(f, g, x) == -poisson_bracket(g, f, x)
        assert poisson_bracket(f, f, x) == 0.0


def test_bracket_of_pendulum_with_momentum():
    p = _field("p1")
    pendulum = _field("p1^2/2 - cos(q1)")
    x = PhasePoint.from_qp([0.7], [0.3])
    assert poisson_bracket(p, pendulum, x) == pytest.approx(-np.sin(0.7), abs=1e-15)


def test_hamiltonian_vector_field_sign():
    """X_H = (dH/dp, -dH/dq)"""
    harmonic = _field("(q1^2 + p1^2)/2")
    v = hamiltonian_vector_field(harmonic, [0.25, -0.5])
    assert v.tolist() == [-0.5, -0.25]


def test_dimension_mismatch():
    f = _field("q1")
    g = _field("q1 + q2", 2)
    with pytest.raises(DomainError):
        poisson_bracket(f, g, [0.0, 0.0])
    with pytest.raises(PhaseSpaceError):
        poisson_bracket(f, f, [0.0, 0.0, 0.0, 0.0])


@pytest.mark.parametrize(
    "sources",
    [
        ("(q1^2 + p1^2)/2", "p1^3/3 + q1^2*p1", "(p1^2/2 - cos(q1))*bump(p1/8)"),
        ("sin(q1)*p1", "exp(q1/4)*p1^2", "tanh(q1 - p1)"),
    ],
)
def test_jacobi_identity(sources, rng):
    f, g, h = (_field(s) for s in sources)
    for x in random_points(Box.cube(2, -1.0, 1.0), 20, rng):
        assert jacobi_residual(f, g, h, x) <= 1e-10


def test_jacobi_needs_second_derivatives():
    kink = _field("abs(q1)")
    smooth = _field("p1^2")
    with pytest.raises(DifferentiationError):
        jacobi_residual(kink, smooth, smooth, [0.5, 0.5])


def test_fd_gradient_matches_exact(rng):
    f = _field("q1^3*p1 - sin(p1)")
    pts = random_points(Box.cube(2, -1.0, 1.0), 30, rng)
    fd = fd_gradient_many(f.evaluate_many, pts)
    assert np.max(np.abs(fd - f.gradient_many(pts))) <= 1e-8


def test_function_field_modes():
    box = Box.cube(2, -1.0, 1.0)
    smooth = FunctionField(lambda x, t: x[:, 0] ** 2, box)
    assert smooth.max_order == 2
    lipschitz = FunctionField(
        lambda x, t: np.abs(x[:, 0]), box, regularity=Regularity.LIPSCHITZ
    )
    assert lipschitz.max_order == 1
    with pytest.raises(DifferentiationError):
        lipschitz.hessian([0.5, 0.0])
    with pytest.raises(DomainError):
        smooth.evaluate([2.0, 0.0])


def test_symplecticity_defect():
    rotation = DiffeoSample.linear(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert symplecticity_defect(rotation, [0.3, 0.1]) == 0.0
    stretch = DiffeoSample.linear(np.diag([2.0, 1.0]))
    assert symplecticity_defect(stretch, [0.3, 0.1]) == pytest.approx(np.sqrt(2.0))
    table = bracket_relation_table(rotation, [0.3, 0.1])
    assert np.array_equal(table, symplectic_matrix(1))


def test_singular_jacobian_is_reported():
    collapse = DiffeoSample(
        2,
        forward=lambda x: np.zeros_like(x),
        jacobian=lambda x: np.zeros((x.shape[0], 2, 2)),
    )
    with pytest.raises(DifferentiationError):
        symplecticity_defect(collapse, [0.0, 0.0])


def test_periodic_grid_skips_endpoint():
    grid = Box.phase_cylinder(1, 2.0).grid(4)
    assert grid.axes[0].tolist() == [0.0, 0.25, 0.5, 0.75]
    assert grid.axes[1].tolist() == pytest.approx([-2.0, -2.0 / 3.0, 2.0 / 3.0, 2.0])
    assert grid.spacing.tolist() == pytest.approx([0.25, 4.0 / 3.0])
    assert grid.points().shape == (16, 2)


def test_box_contains_ignores_periodic_axes():
    box = Box.phase_cylinder(1, 1.0)
    inside = box.contains(np.array([[5.5, 0.5], [0.5, 1.5]]))
    assert inside.tolist() == [True, False]
    with pytest.raises(DomainError):
        box.require(np.array([[0.0, 3.0]]))
    with pytest.raises(PhaseSpaceError):
        Box((0.0,), (0.0,))


def test_c0_norm_uses_support():
    f = _field("q1", support=Box.cube(2, -1.0, 1.0))
    assert c0_norm(f, 5) == 2.0
    unbounded = _field("q1")
    with pytest.raises(DomainError):
        c0_norm(unbounded, 5)


def test_c0_norm_samples_time():
    f = _field("t*q1", support=Box.cube(2, -1.0, 1.0))
    assert c0_norm(f, 5) == 0.0
    assert c0_norm(f, 5, times=[0.0, 0.5, 1.0]) == 2.0


def test_c0_norm_is_monotone_in_resolution():
    """分辨率增加时采样网格嵌套, 范数不减"""
    f = _field("sin(6.283185307179586*q1)", support=Box.cube(2, 0.0, 1.0))
    norms = [c0_norm(f, r) for r in range(2, 10)]
    assert all(b >= a for a, b in zip(norms, norms[1:]))
    assert norms[-1] == pytest.approx(2.0, abs=1e-12)


def test_nested_grid_refines():
    box = Box((0.0, -1.0), (1.0, 1.0), (True, False))
    coarse = nested_grid(box, 3)
    fine = nested_grid(box, 7)
    assert coarse.shape == (4, 3)
    assert fine.shape == (8, 9)
    for a, b in zip(coarse.axes, fine.axes):
        assert np.isin(a, b).all()
    with pytest.raises(PhaseSpaceError):
        nested_grid(box, 1)


def test_sup_norm_of_a_constant():
    f = _field("-1 + 0*q1", support=Box.cube(2, -1.0, 1.0))
    assert c0_norm(f, 5) == 0.0
    assert sup_norm(f, 5) == 1.0
