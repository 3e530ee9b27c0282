"""Fisher information and Cramer-Rao bounds for gravimetry with the optomechanical probe.

Every result carries the dimensionless information about ``gbar`` and the
prefactor ``cos^2(theta) m / (2 hbar omega_m^3)`` that converts it into
information about ``g`` itself (units m^-2 s^4). Without physical
parameters the prefactor is 1 and ``delta_g`` is a bound on ``gbar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import homodyne
from .constants import HBAR, TOL
from .evolution import DimensionlessParams, homodyne_pdf_derivative, tau_eta
from .hilbert import StateVector
from .errors import NumericalError


@dataclass(frozen=True)
class FisherResult:
    value: float
    dimensionless_value: float
    prefactor: float = 1.0
    t: float | None = None
    note: str = ""

    @property
    def delta_g(self) -> float:
        """Single-shot Cramer-Rao bound ``1 / sqrt(value)``."""
        return 1.0 / math.sqrt(self.value) if self.value > 0 else math.inf


def fisher_prefactor(physical=None) -> float:
    """``cos^2(theta) m / (2 hbar omega_m^3)``, or 1 when no physical parameters are given."""
    if physical is None:
        return 1.0
    return math.cos(physical.theta) ** 2 * physical.mass / (2.0 * HBAR * physical.omega_m**3)


def make_result(dimensionless: float, physical=None, t: float | None = None, note: str = "") -> FisherResult:
    pre = fisher_prefactor(physical)
    return FisherResult(pre * dimensionless, dimensionless, pre, t, note)


def five_point(f: Callable[[float], np.ndarray], x: float, h: float) -> np.ndarray:
    """Fourth-order central difference ``(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h``."""
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12.0 * h)


def qfi_pure(
    state_fn: Callable[[float], StateVector], g: float, step: float = 1e-3, *, physical=None, t=None
) -> FisherResult:
    """``4 (<dPsi|dPsi> - |<Psi|dPsi>|^2)`` with the amplitude derivative by five-point differences."""

    def amplitudes(x):
        s = state_fn(x)
        if not isinstance(s, StateVector):
            raise TypeError("state_fn must return a StateVector")
        return s.data

    psi = amplitudes(g)
    dpsi = five_point(amplitudes, g, step)
    value = 4.0 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(psi, dpsi)) ** 2)
    return make_result(max(float(value), 0.0), physical, t)


def qfi_closed_form(params: DimensionlessParams, physical=None) -> FisherResult:
    """QFI at the decoupling time ``t = 2 pi``: dimensionless ``64 pi^2 kbar^2 |alpha|^2``."""
    value = 64.0 * math.pi**2 * params.kbar**2 * abs(params.alpha) ** 2
    return make_result(value, physical, 2.0 * math.pi)


def qfi_coherent(params: DimensionlessParams, t: float, physical=None) -> FisherResult:
    """Joint-state QFI at any ``t`` for a coherent cavity input.

    Both the sector phases and the oscillator labels depend on ``gbar``;
    collecting terms gives ``4 |eta|^2 + 16 kbar^2 |alpha|^2 tau^2`` with
    ``eta = 1 - e^{-it}`` and ``tau = t - sin t``. The oscillator term vanishes
    at ``t = 2 pi`` and the expression reduces to :func:`qfi_closed_form`.
    """
    tau, eta = tau_eta(t)
    value = 4.0 * abs(eta) ** 2 + 16.0 * params.kbar**2 * abs(params.alpha) ** 2 * tau**2
    return make_result(value, physical, t)


def cfi_homodyne(
    params: DimensionlessParams,
    t: float,
    lam: float,
    grid: homodyne.HomodyneGrid | None = None,
    cavity_cutoff: int = 30,
    physical=None,
) -> FisherResult:
    """Rotated-quadrature CFI at time ``t`` with an analytic ``gbar`` derivative of the distribution."""
    x, p, dp = homodyne_pdf_derivative(params, t, lam, grid, cavity_cutoff)
    res = homodyne.fisher_integral(x, p, dp)
    return make_result(res.value, physical, t, note=f"skipped mass {res.skipped_mass:.1e}")


def _is_integer(v: float) -> bool:
    return abs(v - round(v)) < 1e-12


def cfi_closed_form_2pi(params: DimensionlessParams, lam: float, physical=None) -> FisherResult:
    """Quadrature CFI at ``t = 2 pi``: dimensionless ``16 pi^2 kbar^2 (i e^{-i lam} alpha - i e^{i lam} alpha^*)^2``.

    Valid only when ``kbar`` and ``gbar`` are integers, where the cavity state
    returns exactly to its coherent input.
    """
    if not (_is_integer(params.kbar) and _is_integer(params.gbar)):
        raise ValueError(
            f"compact t=2pi form requires integer kbar and gbar (got {params.kbar}, {params.gbar})"
        )
    bracket = (2.0 * (np.exp(-1j * lam) * params.alpha).imag) ** 2
    return make_result(16.0 * math.pi**2 * params.kbar**2 * bracket, physical, 2.0 * math.pi)


@dataclass(frozen=True)
class MeasurementWindow:
    """Width of the CFI peak around ``t = 2 pi`` in rescaled time.

    ``sigma_prose = 1/(2 kbar)`` and ``sigma_derivation = 1/(sqrt2 kbar)`` are the
    two Gaussian widths one can read off for ``|n - n'| = 1``;
    ``lab_time_scale = 1/(omega_m kbar)`` converts to seconds.
    """

    sigma_prose: float
    sigma_derivation: float
    lab_time_scale: float | None

    @property
    def fwhm_prose(self) -> float:
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) * self.sigma_prose

    @property
    def fwhm_derivation(self) -> float:
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) * self.sigma_derivation


def measurement_window(kbar: float, omega_m: float | None = None) -> MeasurementWindow:
    if not kbar > 0:
        raise ValueError("kbar must be positive")
    lab = 1.0 / (omega_m * kbar) if omega_m else None
    return MeasurementWindow(1.0 / (2.0 * kbar), 1.0 / (math.sqrt(2.0) * kbar), lab)


def qfi_heisenberg(params: DimensionlessParams, n_photons: int, physical=None) -> FisherResult:
    """QFI at ``t = 2 pi`` for the cavity input ``(|0> + |n>)/sqrt2``: dimensionless ``16 pi^2 kbar^2 n^2``."""
    if n_photons < 1:
        raise ValueError("n_photons must be at least 1")
    return make_result(16.0 * math.pi**2 * params.kbar**2 * n_photons**2, physical, 2.0 * math.pi)


def lambda_sweep(
    params: DimensionlessParams, t: float, n_angles: int = 64, grid=None, cavity_cutoff: int = 30
) -> tuple[np.ndarray, np.ndarray, float]:
    """CFI on ``n_angles`` evenly spaced quadrature angles in ``[0, pi)``; returns the best angle too."""
    lams = np.linspace(0.0, math.pi, n_angles, endpoint=False)
    vals = np.array([cfi_homodyne(params, t, lam, grid, cavity_cutoff).dimensionless_value for lam in lams])
    return lams, vals, float(lams[int(np.argmax(vals))])


def check_bound(cfi: FisherResult, qfi: FisherResult, slack: float = 1e-6) -> None:
    """Raise if a CFI exceeds the QFI beyond ``slack`` (relative to the QFI)."""
    if cfi.dimensionless_value > qfi.dimensionless_value * (1 + slack) + TOL.probability_floor:
        raise NumericalError(
            f"CFI {cfi.dimensionless_value:.6g} exceeds QFI {qfi.dimensionless_value:.6g}", invariant="cfi_le_qfi"
        )
