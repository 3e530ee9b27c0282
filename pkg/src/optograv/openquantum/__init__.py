"""Open-system dynamics: cavity loss and the leaky-photon environment model."""

from .frame import CoMovingFrame, Displacer
from .integrators import IntegrationStats, rk4_fixed, rkf45_adaptive
from .leaky import LeakyConfig, LeakySample, cfi_environment, environment_cfi_trajectory, evolve_leaky
from .lindblad import (
    FrameSample,
    InitialState,
    LindbladConfig,
    PositivityWarning,
    cfi_mixed,
    cfi_trajectory,
    evolve_lindblad,
    evolve_with_derivative,
    five_point_derivative,
    hamiltonian,
    lindblad_rhs,
    product_lab_state,
)
