"""Differentially private noise mechanisms under finite-precision semantics.

The package models number representations and defective uniform generators
bit-exactly, reproduces the privacy attacks they enable, implements the
truncation and rounding corrections, and certifies the degraded privacy level
of the corrected mechanism by exhaustive enumeration.
"""

from .numrep import (
    BiasBoundError,
    FixedPointFormat,
    FixedPointValue,
    RangeOverflowError,
    UniformGeneratorModel,
    fx_add,
    fx_decode,
    fx_encode,
    fx_low_bits,
    fx_mul_pow2,
    named_bias,
    uniform_enumerate,
)
from .geometry import (
    EMPTY,
    Box,
    Disc,
    EmptyRegion,
    Interval,
    diameter,
    distance,
    neighbor_minus,
    neighbor_plus,
    region_from_json,
    region_to_json,
)
from .distributions import (
    EXCEPTION,
    DiscreteDistribution,
    EnumerationBudgetError,
    ExceptionMassMismatchError,
    RoundingAlgebra,
    RoundingGrid,
    bin,
    check_sandwich,
    empirical_epsilon,
    pushforward,
    wasserstein_inf,
)
from .mechanisms import (
    ConvergenceError,
    PrivacyParams,
    Query,
    ReportedAnswer,
    count_query_eval,
    inflated_sensitivity,
    laplace_cdf,
    laplace_density,
    laplace_inv_cdf,
    make_count_query,
    noise_value_arrays,
    output_distribution,
    planar_radius_cdf,
    planar_radius_density,
    planar_radius_inv,
    planar_sample,
    round_answer,
    run_mechanism,
    truncate,
)
from .robustness import (
    ClosenessCertificate,
    DegenerateGridError,
    DivergenceError,
    GridTooCoarseError,
    RobustnessBudget,
    SafePreimage,
    budget_1d,
    budget_2d,
    closeness_check,
    degraded_epsilon,
    lipschitz_bound_1d,
    lipschitz_bound_2d,
    measure_closeness,
    rounding_ratio,
    rounding_ratio_volume_form,
    safe_preimage_fixpoint,
    total_shift,
)
from .attacks import (
    AttackReport,
    fixedpoint_attack,
    step_distribution_attack,
    vulnerable_difference,
)

__version__ = "0.1.0"
