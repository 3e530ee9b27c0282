"""Physical constants and the repo-wide numerical tolerances."""

from dataclasses import dataclass

# CODATA 2018 exact / recommended values
HBAR = 1.054571817e-34  # J s
EPSILON_0 = 8.8541878128e-12  # F m^-1
SPEED_OF_LIGHT = 299792458.0  # m s^-1


@dataclass(frozen=True)
class Tolerances:
    norm: float = 1e-9
    trace: float = 1e-9
    hermiticity: float = 1e-9
    positivity_slack: float = 1e-7
    positivity_hard: float = 1e-5
    coherent_warn_deficit: float = 1e-6
    closed_form_max_deficit: float = 1e-4
    pdf_negativity: float = 1e-10
    probability_floor: float = 1e-14
    mass_deficit: float = 1e-6


TOL = Tolerances()
