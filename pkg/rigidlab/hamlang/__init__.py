"""
Expression language for Hamiltonians, generating-function cores and map components.
"""

from rigidlab.hamlang.field import (
    ExpressionField,
    evaluate,
    gradient,
    hessian,
    kink_mask,
)
from rigidlab.hamlang.jets import Jet, bump_profile, evaluate_jets
from rigidlab.hamlang.models import Expression, Layout, to_source
from rigidlab.hamlang.parser import parse_expression

__all__ = [
    "Expression",
    "ExpressionField",
    "Jet",
    "Layout",
    "bump_profile",
    "evaluate",
    "evaluate_jets",
    "gradient",
    "hessian",
    "kink_mask",
    "parse_expression",
    "to_source",
]
