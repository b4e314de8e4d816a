"""
Min-max critical values via persistent homology of cubical sublevel
filtrations.
"""

from rigidlab.minmax.filtration import CubicalFiltration, build_filtration
from rigidlab.minmax.persistence import (
    PersistenceDiagram,
    PersistencePair,
    compute_persistence,
)
from rigidlab.minmax.values import (
    FUNDAMENTAL,
    UNIT,
    HatGammaBound,
    MinMaxValues,
    PropertyReport,
    box_parameters,
    c_convergence_profile,
    critical_value_check,
    gamma_distance,
    gamma_invariant,
    hatgamma_distance_lower_bound,
    hatgamma_hamiltonian_lower_bound,
    hatgamma_lower_bound,
    minmax_value,
    minmax_values,
    property_checks,
)

__all__ = [
    "FUNDAMENTAL",
    "UNIT",
    "CubicalFiltration",
    "HatGammaBound",
    "MinMaxValues",
    "PersistenceDiagram",
    "PersistencePair",
    "PropertyReport",
    "box_parameters",
    "build_filtration",
    "c_convergence_profile",
    "compute_persistence",
    "critical_value_check",
    "gamma_distance",
    "gamma_invariant",
    "hatgamma_distance_lower_bound",
    "hatgamma_hamiltonian_lower_bound",
    "hatgamma_lower_bound",
    "minmax_value",
    "minmax_values",
    "property_checks",
]
