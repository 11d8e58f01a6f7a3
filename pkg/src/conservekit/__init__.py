"""conservekit: exactly-conservative finite-difference schemes for
quasilinear first-order ODE systems via conservation-law multipliers."""

__version__ = "0.1.0"

from .expr import Expression, Point, evaluate, format_expr, parse, partial_derivative
from .divdiff import (
    DiscreteExpression,
    PermutationPlan,
    StencilAssignment,
    StepPair,
    divided_difference_numeric,
    divided_difference_symbolic,
    forward_difference,
    partial_forward_difference,
    permutation_stencils,
    symmetrized_forward_difference,
)
from .multiplier import (
    MultiplierMatrix,
    analytic_multiplier,
    check_continuous_conditions,
    check_discrete_conditions,
    discrete_multiplier,
    discrete_time_partial,
    discrete_total_derivative,
    euler_operator_residual,
)
from .scheme import (
    MinorSelection,
    SchemeDefinition,
    baseline_residual,
    build_conservative_scheme,
    build_ftau,
    closed_form_ftau_dho,
    closed_form_ftau_lv2,
    closed_form_ftau_pr3bp,
    make_scheme,
    select_minor,
)
from .solver import SolverConfig, Trajectory, implicit_step, integrate
from .systems import (
    damped_harmonic_oscillator,
    get_system,
    load_system_file,
    lotka_volterra_2,
    lotka_volterra_3,
    pr3bp,
    registry,
    rigid_body,
)
from .harness import (
    ExperimentConfig,
    Report,
    conservation_error,
    convergence_study,
    reproduce_table,
    run_experiment,
)

__all__ = [
    "Expression",
    "Point",
    "parse",
    "evaluate",
    "partial_derivative",
    "format_expr",
    "StepPair",
    "StencilAssignment",
    "PermutationPlan",
    "DiscreteExpression",
    "forward_difference",
    "partial_forward_difference",
    "permutation_stencils",
    "divided_difference_symbolic",
    "divided_difference_numeric",
    "symmetrized_forward_difference",
    "MultiplierMatrix",
    "analytic_multiplier",
    "discrete_multiplier",
    "discrete_time_partial",
    "discrete_total_derivative",
    "check_continuous_conditions",
    "check_discrete_conditions",
    "euler_operator_residual",
    "MinorSelection",
    "SchemeDefinition",
    "select_minor",
    "build_ftau",
    "build_conservative_scheme",
    "baseline_residual",
    "make_scheme",
    "closed_form_ftau_lv2",
    "closed_form_ftau_pr3bp",
    "closed_form_ftau_dho",
    "SolverConfig",
    "Trajectory",
    "implicit_step",
    "integrate",
    "rigid_body",
    "lotka_volterra_2",
    "lotka_volterra_3",
    "pr3bp",
    "damped_harmonic_oscillator",
    "get_system",
    "registry",
    "load_system_file",
    "ExperimentConfig",
    "Report",
    "conservation_error",
    "run_experiment",
    "reproduce_table",
    "convergence_study",
]
