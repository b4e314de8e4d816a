"""
Built-in Hamiltonians, generating functions and map families.

Every entry is given by hamlang source text, so the listing doubles as a
parser fixture.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from rigidlab.errors import ConfigError
from rigidlab.flow import IntegratorConfig
from rigidlab.gfqi.models import QuadraticForm
from rigidlab.gfqi.operations import (
    from_base_function,
    make_gfqi,
    product_base_function,
    stabilize,
)
from rigidlab.hamlang.field import ExpressionField
from rigidlab.hamlang.models import Layout
from rigidlab.phase import Box, Regularity
from rigidlab.rigidity import RigidityMap, flow_family_member, oscillating_map

logger = logging.getLogger(__name__)

TWO_PI = "6.283185307179586"

HAMILTONIAN = "hamiltonian"
GFQI_KIND = "gfqi"
MAP = "map"
FAMILY = "family"


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str
    sources: Tuple[str, ...]
    d: int = 1
    k: int = 0
    regularity: Regularity = Regularity.SMOOTH
    description: str = ""
    support: Optional[Box] = None
    options: Dict[str, Any] = field(default_factory=dict)

    @property
    def layout(self) -> Layout:
        return Layout.GENERATING if self.kind == GFQI_KIND else Layout.PHASE

    @property
    def dims(self) -> Tuple[int, int]:
        return (self.d, self.k)

    def declared(self) -> Optional[Regularity]:
        return Regularity.C11 if self.regularity is Regularity.C11 else None

    def build(self, **overrides):
        """The catalog object: a field, a GFQI, a map or an n -> map callable."""
        builder = _BUILDERS[self.kind]
        return builder(self, **overrides)

    def as_field(self, index: int = 0) -> ExpressionField:
        """Source ``index`` as a phase-space field, e.g. the Hamiltonian of a flow family."""
        if self.kind == GFQI_KIND:
            raise ConfigError(f"{self.name} is a generating function, not a field")
        return _field(self, index)


def _field(entry: CatalogEntry, index: int = 0, **_) -> ExpressionField:
    return ExpressionField.from_source(
        entry.sources[index],
        entry.d,
        support=entry.support,
        declared=entry.declared(),
        name=entry.name if len(entry.sources) == 1 else f"{entry.name}[{index}]",
    )


def _gfqi(entry: CatalogEntry, **_):
    opts = entry.options
    if entry.k == 0:
        if entry.d == 2 and len(entry.sources) == 2:
            S = product_base_function(entry.sources)
        else:
            S = from_base_function(entry.sources[0], entry.d, name=entry.name)
    else:
        S = make_gfqi(
            entry.sources[0],
            entry.d,
            entry.k,
            QuadraticForm(opts["Q"]),
            opts["cutoff"],
            name=entry.name,
        )
    if "stabilize" in opts:
        S = stabilize(S, QuadraticForm(opts["stabilize"]))
    return S


def _map(entry: CatalogEntry, **_) -> RigidityMap:
    return RigidityMap.from_expressions(entry.sources, entry.name, entry.support)


def _family(
    entry: CatalogEntry, cfg: Optional[IntegratorConfig] = None, **_
) -> Callable[[int], RigidityMap]:
    if entry.options.get("family") == "oscillating":
        return oscillating_map
    H = entry.as_field()
    return lambda n: flow_family_member(H, n, cfg)


_BUILDERS = {HAMILTONIAN: _field, GFQI_KIND: _gfqi, MAP: _map, FAMILY: _family}


def _bump_box(d: int, half_width: float) -> Box:
    return Box.cube(2 * d, -half_width, half_width)


CATALOG: Dict[str, CatalogEntry] = {
    e.name: e
    for e in [
        CatalogEntry("free", HAMILTONIAN, ("p1^2/2",), description="free particle"),
        CatalogEntry("momentum", HAMILTONIAN, ("p1",), description="momentum coordinate"),
        CatalogEntry(
            "harmonic",
            HAMILTONIAN,
            ("(q1^2 + p1^2)/2",),
            description="harmonic oscillator",
        ),
        CatalogEntry(
            "pendulum",
            HAMILTONIAN,
            ("(p1^2/2 - cos(q1))*bump(p1/8)",),
            description="pendulum, cut off at |p| >= 8",
        ),
        CatalogEntry(
            "cubic",
            HAMILTONIAN,
            ("p1^3/3 + q1^2*p1",),
            description="cubic polynomial",
        ),
        CatalogEntry(
            "coupled_oscillators",
            HAMILTONIAN,
            ("(q1^2 + p1^2)/2 + (q2^2 + p2^2) + q1*q2",),
            d=2,
            description="two coupled oscillators",
        ),
        CatalogEntry(
            "henon_heiles",
            HAMILTONIAN,
            ("(p1^2 + p2^2 + q1^2 + q2^2)/2 + q1^2*q2 - q2^3/3",),
            d=2,
            description="Henon-Heiles potential",
        ),
        CatalogEntry(
            "bump_oscillator",
            HAMILTONIAN,
            ("(q1^2 + p1^2)/2*bump(q1/2)*bump(p1/2)",),
            support=_bump_box(1, 2.0),
            description="oscillator with compact support in [-2, 2]^2",
        ),
        CatalogEntry(
            "bump_wave",
            HAMILTONIAN,
            (f"cos({TWO_PI}*q1)*bump(p1/16)",),
            support=Box.phase_cylinder(1, 16.0),
            description="base-only for |p| <= 8: cos(2 pi q)",
        ),
        CatalogEntry(
            "c11_square",
            HAMILTONIAN,
            ("q1*abs(q1)/2",),
            regularity=Regularity.C11,
            description="q|q|/2, gradient Lipschitz",
        ),
        CatalogEntry(
            "c11_kinetic",
            HAMILTONIAN,
            ("p1^2/2*bump(p1/4)",),
            description="kinetic energy cut off at |p| >= 4",
        ),
        CatalogEntry(
            "abs_kink",
            HAMILTONIAN,
            ("abs(q1)",),
            regularity=Regularity.LIPSCHITZ,
            description="|q|, kink along q = 0",
        ),
        CatalogEntry(
            "max_diagonal",
            HAMILTONIAN,
            ("max(q1, p1)",),
            regularity=Regularity.LIPSCHITZ,
            description="max(q, p), kink along the diagonal",
        ),
        CatalogEntry(
            "zero_section",
            GFQI_KIND,
            ("0",),
            description="the zero section of T*T^1",
        ),
        CatalogEntry(
            "cos_gfqi",
            GFQI_KIND,
            (f"cos({TWO_PI}*q1)",),
            description="fiberless a cos(2 pi q) on T^1 (a = 1)",
        ),
        CatalogEntry(
            "half_cos_gfqi",
            GFQI_KIND,
            (f"0.5*cos({TWO_PI}*q1)",),
            description="fiberless 0.5 cos(2 pi q) on T^1",
        ),
        CatalogEntry(
            "torus_product",
            GFQI_KIND,
            (f"cos({TWO_PI}*q1)", f"0.5*sin({TWO_PI}*q1)"),
            d=2,
            description="cos(2 pi q1) + 0.5 sin(2 pi q2) on T^2",
        ),
        CatalogEntry(
            "qai_fiber",
            GFQI_KIND,
            (f"xi1^2 + 0.3*cos({TWO_PI}*q1)*bump(xi1/3)",),
            k=1,
            options={"Q": [[1.0]], "cutoff": 3.0},
            description="xi^2 + 0.3 cos(2 pi q) bump(xi/3), quadratic beyond |xi| = 3",
        ),
        CatalogEntry(
            "stabilized_cos",
            GFQI_KIND,
            (f"cos({TWO_PI}*q1)",),
            options={"stabilize": [[-1.0]]},
            description="cos(2 pi q) - eta^2",
        ),
        CatalogEntry(
            "shear",
            MAP,
            ("q1 + p1^3", "p1"),
            description="symplectic shear (q + p^3, p)",
        ),
        CatalogEntry(
            "shear_d2",
            MAP,
            ("q1 + 3*p1^2 + p2^2", "q2 + 2*p1*p2", "p1", "p2"),
            d=2,
            description="q -> q + grad F(p), F = p1^3 + p1 p2^2",
        ),
        CatalogEntry(
            "oscillating_shears",
            FAMILY,
            (
                "q1 + sin(6.283185307179586*q1)/39.47841760435743",
                "p1/(1 + cos(6.283185307179586*q1)/6.283185307179586)",
            ),
            options={"family": "oscillating"},
            description="shrinking oscillating shears, member n = 1 shown",
        ),
        CatalogEntry(
            "bump_flows",
            FAMILY,
            ("(q1^2 + p1^2)/2*bump(q1/2)*bump(p1/2)",),
            support=_bump_box(1, 2.0),
            options={"family": "flow"},
            description="time-one flows of bump_oscillator / n",
        ),
    ]
}


def catalog_entry(name: str) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise ConfigError(f"unknown catalog entry {name!r}") from None


def build(name: str, **overrides):
    return catalog_entry(name).build(**overrides)


def list_catalog() -> str:
    """One line per entry: name, kind, regularity, description and sources."""
    lines = []
    width = max(len(name) for name in CATALOG)
    for entry in CATALOG.values():
        lines.append(
            f"{entry.name:<{width}}  {entry.kind:<11}  {entry.regularity.value:<11}  "
            f"{entry.description}: {'; '.join(entry.sources)}"
        )
    return "\n".join(lines)


def entries(kind: Optional[str] = None) -> List[CatalogEntry]:
    return [e for e in CATALOG.values() if kind is None or e.kind == kind]
