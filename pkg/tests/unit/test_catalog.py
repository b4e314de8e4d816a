import numpy as np
import pytest

from rigidlab.catalog import (
    CATALOG,
    FAMILY,
    GFQI_KIND,
    HAMILTONIAN,
    MAP,
    build,
    catalog_entry,
    entries,
    list_catalog,
)
from rigidlab.errors import ConfigError
from rigidlab.gfqi import GFQI
from rigidlab.hamlang import ExpressionField
from rigidlab.phase import Box, random_points
from rigidlab.rigidity import RigidityMap, symplectic_defects


def test_kinds_partition_the_catalog():
    kinds = [HAMILTONIAN, GFQI_KIND, MAP, FAMILY]
    assert sum(len(entries(kind)) for kind in kinds) == len(CATALOG)
    assert len(entries()) == len(CATALOG)


@pytest.mark.parametrize("name", [e.name for e in entries(HAMILTONIAN)])
def test_hamiltonians_parse_with_their_flags(name, rng):
    entry = CATALOG[name]
    H = entry.as_field()
    assert isinstance(H, ExpressionField)
    assert H.dim == 2 * entry.d
    assert H.regularity is entry.regularity
    assert H.name == name
    values = H.evaluate_many(random_points(Box.cube(H.dim, -1.0, 1.0), 8, rng))
    assert np.all(np.isfinite(values))


@pytest.mark.parametrize("name", [e.name for e in entries(GFQI_KIND)])
def test_generating_functions_build(name):
    S = build(name)
    assert isinstance(S, GFQI)
    assert S.k == CATALOG[name].k or "stabilize" in CATALOG[name].options
    with pytest.raises(ConfigError):
        CATALOG[name].as_field()


@pytest.mark.parametrize("name", [e.name for e in entries(MAP)])
def test_maps_are_symplectic(name, rng):
    phi = build(name)
    assert isinstance(phi, RigidityMap)
    pts = random_points(Box.cube(phi.dim, -1.0, 1.0), 16, rng)
    assert np.max(symplectic_defects(phi.jacobian_many(pts))) <= 1e-12


def test_families_build_members():
    oscillating = build("oscillating_shears")
    assert oscillating(1).name == "oscillating n=1"
    pts = np.array([[0.3, 0.7]])
    shown = RigidityMap.from_expressions(CATALOG["oscillating_shears"].sources)
    np.testing.assert_allclose(oscillating(1).apply(pts), shown.apply(pts), atol=1e-12)
    flows = build("bump_flows")
    member = flows(2)
    # outside the support the flow is the identity
    np.testing.assert_array_equal(member.apply(np.array([[3.0, 3.0]])), [[3.0, 3.0]])


def test_unknown_entry():
    with pytest.raises(ConfigError, match="unknown catalog entry"):
        catalog_entry("nope")
    with pytest.raises(ConfigError):
        build("nope")


def test_listing_has_one_line_per_entry():
    lines = list_catalog().splitlines()
    assert len(lines) == len(CATALOG)
    assert lines[0].startswith("free")
    assert any("bump_wave" in line and "hamiltonian" in line for line in lines)
