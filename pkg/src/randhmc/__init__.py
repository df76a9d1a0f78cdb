"""Hamiltonian Monte Carlo for Gaussian targets with long, randomized
integration times: exact/unadjusted/adjusted kernels, a diagnostics layer
for every checkable closed form, and a scaling-sweep harness."""

from .model import (
    FirstOrderOracle,
    GaussianTarget,
    Spectrum,
    make_spectrum,
    make_target,
    sample_exact,
)
from .dynamics import (
    LeapfrogSchedule,
    PhaseState,
    energy_gap,
    exact_evolve,
    hamiltonian,
    leapfrog_closed_form,
    leapfrog_evolve,
    modified_hamiltonian,
    modified_spectrum,
)
from .kernels import (
    KernelConfig,
    RunStats,
    StepOutcome,
    TimeSet,
    build_time_set,
    choose_step_size,
    closed_form_acceptance,
    lazy_wrap,
    run_chain,
    run_pipeline,
    step_adjusted,
    step_idealized,
    step_unadjusted,
)

__all__ = [
    "FirstOrderOracle",
    "GaussianTarget",
    "Spectrum",
    "make_spectrum",
    "make_target",
    "sample_exact",
    "LeapfrogSchedule",
    "PhaseState",
    "energy_gap",
    "exact_evolve",
    "hamiltonian",
    "leapfrog_closed_form",
    "leapfrog_evolve",
    "modified_hamiltonian",
    "modified_spectrum",
    "KernelConfig",
    "RunStats",
    "StepOutcome",
    "TimeSet",
    "build_time_set",
    "choose_step_size",
    "closed_form_acceptance",
    "lazy_wrap",
    "run_chain",
    "run_pipeline",
    "step_adjusted",
    "step_idealized",
    "step_unadjusted",
]

__version__ = "0.1.0"
