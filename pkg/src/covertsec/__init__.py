"""Covert-attack analysis and input-coding defenses for discrete-time LTI plants."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .attacks import (
    AttackKind,
    AttackScenario,
    AttackSignalPlan,
    FeasibilityReport,
    check_covert_feasibility,
    make_scenario,
    synthesize_covert_attack,
    synthesize_designed_attack,
)
from .coding import (
    CodingScheme,
    DefenseSpecification,
    Theorem2Result,
    build_decoder_convolution,
    check_theorem2,
    design_decoder,
    encoder_from_decoder,
    verify_inverse,
)
from .errors import (
    CovertSecError,
    DesignFailure,
    NumericalError,
    ValidationError,
)
from .lti import (
    RelativeDegreeProfile,
    StateSpaceSystem,
    build_stacked_io,
    is_left_invertible,
    markov_parameter,
    relative_degree,
)
from .simulation import InputProgram, SimulationConfig, SimulationTrace, compare_traces, simulate

__all__ = [
    "BACKEND",
    "AttackKind",
    "AttackScenario",
    "AttackSignalPlan",
    "CodingScheme",
    "CovertSecError",
    "DefenseSpecification",
    "DesignFailure",
    "FeasibilityReport",
    "InputProgram",
    "NumericalError",
    "RelativeDegreeProfile",
    "SimulationConfig",
    "SimulationTrace",
    "StateSpaceSystem",
    "Theorem2Result",
    "ValidationError",
    "build_decoder_convolution",
    "build_stacked_io",
    "check_covert_feasibility",
    "check_theorem2",
    "compare_traces",
    "design_decoder",
    "encoder_from_decoder",
    "is_left_invertible",
    "make_scenario",
    "markov_parameter",
    "relative_degree",
    "simulate",
    "synthesize_covert_attack",
    "synthesize_designed_attack",
    "verify_inverse",
]
