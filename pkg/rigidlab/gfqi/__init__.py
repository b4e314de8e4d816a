"""
Generating functions quadratic at infinity.
"""

from rigidlab.gfqi.cores import (
    ExpressionCore,
    FiberShift,
    GeneratingCore,
    GridCore,
    IdentityFiberDiffeo,
)
from rigidlab.gfqi.grid_import import load_grid_gfqi, save_grid_gfqi
from rigidlab.gfqi.models import GFQI, QuadraticForm, WavefrontSample
from rigidlab.gfqi.operations import (
    AddConstant,
    FiberDiffeoMove,
    base_flow_image,
    check_quadratic_at_infinity,
    equivalence_move,
    fiber_sum,
    from_base_function,
    make_gfqi,
    negate,
    ominus,
    product_base_function,
    stabilize,
    wavefront,
)

__all__ = [
    "AddConstant",
    "ExpressionCore",
    "FiberDiffeoMove",
    "FiberShift",
    "GFQI",
    "GeneratingCore",
    "GridCore",
    "IdentityFiberDiffeo",
    "QuadraticForm",
    "WavefrontSample",
    "base_flow_image",
    "check_quadratic_at_infinity",
    "equivalence_move",
    "fiber_sum",
    "from_base_function",
    "load_grid_gfqi",
    "make_gfqi",
    "negate",
    "ominus",
    "product_base_function",
    "save_grid_gfqi",
    "stabilize",
    "wavefront",
]
