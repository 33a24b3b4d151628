"""Constant step-size SGD on separable objectives as a monotone iterated
function system: absorbing-set decomposition, invariant measures, basin
eigenfunctions, splitting-condition rate certificates, sampling, and the
diffusion-surrogate stationary density."""

__version__ = "0.1.0"

from .absorbing import (
    AbsorbingInterval,
    Decomposition,
    IntervalUnion,
    Rectangle,
    absorbing_intervals,
    decompose,
    left_right_sets,
    rectangle_count_for,
    state_space,
    uniqueness_check,
)
from .diffusion import (
    DiffusionProfile,
    density_cell_masses,
    drift_and_diffusion,
    stationary_density,
    vanishing_points,
)
from .dynamics import (
    EscapeReport,
    MapFamily,
    SampleSummary,
    SplittingCertificate,
    apply_map,
    apply_path,
    escape_path,
    extremal_envelope,
    sgd_sample,
    splitting_certificate_multi,
    splitting_length_1d,
    uniform_escape_length,
    verify_certificate,
)
from .metrics import MetricConfig, d_F, d_alpha_rect, d_tilde, metric_config, total_variation
from .objective import (
    CriticalPointReport,
    SeparableObjective,
    StepConfig,
    bernoulli_pair,
    crossed_quadratics_2d,
    double_well,
    double_well_potential,
    eighth_order,
    eighth_order_potential,
    eta_bound,
    lambda_split,
    lipschitz_constant,
    objective_from_config,
    step_config,
)
from .poly import Polynomial, critical_points, derivative, eval_component, real_roots
from .transfer import (
    BasinFunctions,
    DiscreteMeasure,
    Grid,
    InvariantResult,
    LimitMixtureResult,
    UlamOperator,
    basin_functions,
    block_leakage,
    dual_operator,
    dual_residual,
    invariant_measure,
    limit_mixture,
    mixture_coefficients,
    push_forward,
    ulam_absorption,
    ulam_assemble,
)
