"""Moving box averages on torus actions: cone geometry, averaging, towers, sweeping out."""

from ._kernels import BACKEND
from .averaging import (
    batch_box_averages,
    composition_defect,
    continuous_box_average,
    convergence_experiment,
    discrete_box_average,
    maximal_average,
)
from .cone_geometry import (
    BoxFamily,
    condition_verdict,
    cross_section,
    explicit_family,
    generate_family,
    orthant_split,
)
from .exact import ExactScalar, as_exact, parse_exact
from .submanifold import (
    dilated_flat_average,
    flat_piece,
    genericity_failure_experiment,
    lower_bound_check,
    reduction_check,
)
from .sweepout import build_counterexample_set, oscillation_scan, ratio_check, sweepout_plan
from .systems import (
    Character,
    Indicator,
    TorusSystem,
    TrigPoly,
    act,
    make_system,
    observable_mean,
    set_measure,
)
from .torus_sets import TorusSet
from .towers import product_tower, rotation_tower, suspension_tower, verify_tower

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoxFamily",
    "Character",
    "ExactScalar",
    "Indicator",
    "TorusSet",
    "TorusSystem",
    "TrigPoly",
    "act",
    "as_exact",
    "batch_box_averages",
    "build_counterexample_set",
    "composition_defect",
    "condition_verdict",
    "continuous_box_average",
    "convergence_experiment",
    "cross_section",
    "dilated_flat_average",
    "discrete_box_average",
    "explicit_family",
    "flat_piece",
    "generate_family",
    "genericity_failure_experiment",
    "lower_bound_check",
    "make_system",
    "maximal_average",
    "observable_mean",
    "orthant_split",
    "oscillation_scan",
    "parse_exact",
    "product_tower",
    "ratio_check",
    "reduction_check",
    "rotation_tower",
    "set_measure",
    "suspension_tower",
    "sweepout_plan",
    "verify_tower",
]
