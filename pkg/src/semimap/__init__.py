"""Numerical analysis toolkit for continuous piecewise semi-algebraic maps.

Covers expression-level map definitions with symbolic Jacobians, co-norm
and convex-hull matrix estimates, regularity-index estimation, Brouwer
degree with independent oracles, and global invertibility diagnostics.
"""

from .conorm import conorm, conorm_many, hull_conorm_details, hull_conorm_inf, opnorm, sign_det
from .degree import (
    DegreeResult,
    axiom_suite,
    boundary_margin,
    degree_1d,
    degree_formula,
    winding_degree_2d,
)
from .dsl import (
    JacobianDef,
    MapDef,
    NOT_SMOOTH,
    collect_guards,
    derivative,
    differentiate,
    eval_jacobian,
    eval_jacobian_batch,
    eval_map,
    parse_map,
    print_map,
)
from .errors import (
    AllSamplesOnGuard,
    ArityError,
    ConditionFails,
    CriticalValueError,
    DimensionMismatch,
    DomainError,
    NewtonDiverged,
    NotRegular,
    ParseError,
    PossiblyInfinitePreimage,
    SignDisagreement,
)
from .globalcheck import (
    GlobalReport,
    global_report,
    hadamard_integral_check,
    hadamard_uniform_check,
    kinf_probe,
    pourciau_check,
    properness_probe,
)
from .region import Region
from .regularity import (
    NuEstimate,
    NuSchedule,
    classify_point,
    classify_value,
    estimate_nu,
    implicit_solve,
    local_inverse_cert,
    mvt_inclusion_check,
    mvt_inequality_check,
    sard_scan,
    sign_at,
)
from .reports import TOOL_VERSION, render_report, to_jsonable, write_report
from .roots import find_preimages

__version__ = TOOL_VERSION
