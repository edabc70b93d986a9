"""Optimal control of one-qubit adiabatic quantum computation schedules."""

from .core import (
    ControlledHamiltonian,
    ControlSchedule,
    EigenSystem,
    Trajectory,
    assemble,
    eigensystem,
    heisenberg_coupling,
    propagate,
    step_propagator,
    xz_model,
)
from .errors import (
    AqcError,
    ConfigurationError,
    DegenerateSpectrumError,
    DomainError,
    NoSolutionError,
    NotAtOptimumError,
    NumericalFailure,
    UnsupportedModelError,
    ValidationError,
)
from .gradcheck import check_gradients
from .objectives import (
    ObjectiveReport,
    ObjectiveSpec,
    adiabatic_ratio_series,
    aqc_spec,
    evaluate,
    gradient,
    hessian_at_optimum,
    hessian_fidelity,
)
from .optimizer import OptimizerConfig, RunRecord, optimize, perturb, sweep
from .schedules import (
    FAMILY_IDS,
    PROBLEMS,
    const_x_adiabatic_set,
    get_problem,
    initial_set,
    linear_constraint_adiabatic_set,
    linear_set,
    reference_gap,
    sine_x_adiabatic_set,
    solve_adiabatic_ode,
    trig_adiabatic_set,
)

__version__ = "0.1.0"
