"""Closed-form unitary dynamics of the cavity-oscillator system.

All times are dimensionless (lab time times ``omega_m``) and the cavity is in
its rotating frame, so the Hamiltonian is

    H = b^dag b - kbar a^dag a (b + b^dag) + gbar (b + b^dag).

For cavity Fock number ``n`` the oscillator sees a displaced oscillator with
shift ``kappa_n = kbar n - gbar`` and a coherent label

    phi_n(t) = e^{-it} beta + kappa_n (1 - e^{-it}),

while the cavity amplitude picks up the phase
``(kbar^2 n^2 - 2 kbar gbar n) tau + kappa_n Im(eta beta)`` with
``tau = t - sin t`` and ``eta = 1 - e^{-it}``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import homodyne
from .constants import TOL
from .errors import CutoffError
from .hilbert import DensityOperator, StateVector, annihilation
from .states import TruncationWarning, coherent_amplitudes


@dataclass(frozen=True)
class DimensionlessParams:
    """Rescaled couplings ``kbar = k / omega_m`` and ``gbar`` plus the initial coherent labels.

    ``theta`` is kept for bookkeeping only; its ``cos`` is already part of
    ``gbar``. ``r = omega_C / omega_m`` is unused in the rotating frame.
    """

    kbar: float
    gbar: float
    alpha: complex = 1.0
    beta: complex = 1.0
    theta: float = 0.0
    r: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.kbar) and self.kbar >= 0):
            raise ValueError(f"kbar must be finite and nonnegative, got {self.kbar}")
        if not math.isfinite(self.gbar):
            raise ValueError(f"gbar must be finite, got {self.gbar}")
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))

    def with_gbar(self, gbar: float) -> "DimensionlessParams":
        return DimensionlessParams(self.kbar, gbar, self.alpha, self.beta, self.theta, self.r)

    def kappa(self, n) -> np.ndarray:
        return self.kbar * np.asarray(n, dtype=float) - self.gbar


@dataclass(frozen=True)
class EvolutionSnapshot:
    t: float
    tau: float
    eta: complex
    phi: np.ndarray


def tau_eta(t: float) -> tuple[float, complex]:
    return t - math.sin(t), 1.0 - complex(math.cos(t), -math.sin(t))


def snapshot(params: DimensionlessParams, t: float, n_max: int) -> EvolutionSnapshot:
    """``tau``, ``eta`` and the labels ``phi_0 ... phi_{n_max-1}`` at time ``t``."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    tau, eta = tau_eta(t)
    phi = (1.0 - eta) * params.beta + params.kappa(np.arange(n_max)) * eta
    return EvolutionSnapshot(float(t), tau, eta, phi)


def _cavity_input(params: DimensionlessParams, cutoff: int, cavity) -> np.ndarray:
    if cavity is None:
        return coherent_amplitudes(params.alpha, cutoff)
    amps = cavity.data if isinstance(cavity, StateVector) else np.asarray(cavity, dtype=complex)
    if amps.shape != (cutoff,):
        raise ValueError(f"cavity amplitudes have shape {amps.shape}, expected ({cutoff},)")
    return amps


def cavity_weights(params: DimensionlessParams, t: float, cutoff: int, cavity=None) -> np.ndarray:
    """Cavity amplitudes ``c_n(t)`` multiplying ``|n>_C |phi_n(t)>_O`` (not renormalized).

    ``cavity`` optionally replaces the coherent input by arbitrary Fock
    amplitudes (a ``StateVector`` or array of length ``cutoff``).
    """
    n = np.arange(cutoff)
    tau, eta = tau_eta(t)
    kap = params.kappa(n)
    k, g = params.kbar, params.gbar
    phase = (k * k * n * n - 2.0 * k * g * n) * tau + kap * (eta * params.beta).imag
    return _cavity_input(params, cutoff, cavity) * np.exp(1j * phase)


def poisson_tail(alpha: complex, cutoff: int) -> float:
    """Photon-number weight of a coherent state above the cutoff."""
    return float(max(0.0, 1.0 - np.sum(np.abs(coherent_amplitudes(alpha, cutoff)) ** 2)))


def evolve_closed_form(
    params: DimensionlessParams, t: float, cavity_cutoff: int, osc_cutoff: int, cavity=None
) -> StateVector:
    """Joint state at time ``t`` assembled term by term, renormalized after truncation.

    The lost weight is stored in ``norm_deficit``. Above ``1e-4`` the cutoffs
    are rejected outright; above ``1e-6`` a ``TruncationWarning`` is issued.
    """
    snap = snapshot(params, t, cavity_cutoff)
    c = cavity_weights(params, t, cavity_cutoff, cavity)
    amps = np.stack([c[n] * coherent_amplitudes(snap.phi[n], osc_cutoff) for n in range(cavity_cutoff)])
    norm2 = float(np.sum(np.abs(amps) ** 2))
    if cavity is not None:
        norm2 /= float(np.sum(np.abs(_cavity_input(params, cavity_cutoff, cavity)) ** 2))
    deficit = max(0.0, 1.0 - norm2)
    if deficit > TOL.closed_form_max_deficit:
        raise CutoffError(
            f"cutoffs (cavity {cavity_cutoff}, oscillator {osc_cutoff}) lose weight {deficit:.2e} at t={t}; "
            f"largest oscillator label |phi| = {np.max(np.abs(snap.phi)):.2f}",
            invariant="norm",
            time=t,
        )
    if deficit > TOL.coherent_warn_deficit:
        warnings.warn(f"closed-form state truncated weight {deficit:.2e} at t={t}", TruncationWarning, stacklevel=2)
    state = StateVector.normalized(amps.reshape(-1), (cavity_cutoff, osc_cutoff))
    object.__setattr__(state, "norm_deficit", deficit)
    return state


def _overlaps(phi: np.ndarray) -> np.ndarray:
    # <phi_m | phi_n> at [n, m]
    p, q = phi[:, None], phi[None, :]
    return np.exp(-0.5 * np.abs(p) ** 2 - 0.5 * np.abs(q) ** 2 + np.conj(q) * p)


def reduced_cavity_matrix(params: DimensionlessParams, t: float, cavity_cutoff: int, cavity=None) -> np.ndarray:
    """Unnormalized reduced cavity matrix; oscillator overlaps enter analytically."""
    c = cavity_weights(params, t, cavity_cutoff, cavity)
    return np.outer(c, c.conj()) * _overlaps(snapshot(params, t, cavity_cutoff).phi)


def reduced_cavity(params: DimensionlessParams, t: float, cavity_cutoff: int, cavity=None) -> DensityOperator:
    """Reduced cavity state, renormalized over the truncated photon numbers."""
    rho = reduced_cavity_matrix(params, t, cavity_cutoff, cavity)
    tail = 1.0 - np.trace(rho).real
    if cavity is None and tail > TOL.coherent_warn_deficit:
        warnings.warn(f"Poisson tail {tail:.2e} above cavity cutoff {cavity_cutoff}", TruncationWarning, stacklevel=2)
    return DensityOperator(rho / np.trace(rho).real, (cavity_cutoff,))


def reduced_cavity_derivative(params: DimensionlessParams, t: float, cavity_cutoff: int, cavity=None) -> np.ndarray:
    """``d rho_C / d gbar``.

    The oscillator overlaps depend on ``gbar`` only through
    ``phi_n - phi_n'``, which is ``gbar``-free, so only the
    ``-2 kbar gbar n tau`` phase contributes: ``-2i kbar (n - n') tau rho_C``.
    """
    rho = reduced_cavity(params, t, cavity_cutoff, cavity).data
    n = np.arange(cavity_cutoff)
    tau, _ = tau_eta(t)
    return -2j * params.kbar * tau * (n[:, None] - n[None, :]) * rho


def reduced_oscillator(params: DimensionlessParams, t: float, osc_cutoff: int, cavity_cutoff: int) -> DensityOperator:
    """Mixture ``sum_n |c_n|^2 |phi_n><phi_n|`` of oscillator coherent states."""
    snap = snapshot(params, t, cavity_cutoff)
    w = np.abs(cavity_weights(params, t, cavity_cutoff)) ** 2
    rho = np.zeros((osc_cutoff, osc_cutoff), dtype=complex)
    for n in range(cavity_cutoff):
        v = coherent_amplitudes(snap.phi[n], osc_cutoff)
        rho += w[n] * np.outer(v, v.conj())
    return DensityOperator(rho / np.trace(rho).real, (osc_cutoff,))


def oscillator_fidelity(params: DimensionlessParams, t: float, label: complex, cavity_cutoff: int) -> float:
    """``<label| rho_O(t) |label>`` from analytic coherent-state overlaps."""
    snap = snapshot(params, t, cavity_cutoff)
    w = np.abs(cavity_weights(params, t, cavity_cutoff)) ** 2
    return float(np.sum(w * np.exp(-np.abs(snap.phi - label) ** 2)) / np.sum(w))


def quadrature_trajectory(params: DimensionlessParams, t_grid, cavity_cutoff: int = 30) -> np.ndarray:
    """Rows ``(t, <X_C>, <P_C>)`` with ``X = (a + a^dag)/sqrt2`` and ``P = i(a^dag - a)/sqrt2``."""
    a = annihilation(cavity_cutoff)
    x_op = (a + a.conj().T) / math.sqrt(2.0)
    p_op = 1j * (a.conj().T - a) / math.sqrt(2.0)
    rows = []
    for t in np.asarray(t_grid, dtype=float):
        rho = reduced_cavity(params, t, cavity_cutoff)
        rows.append((t, rho.expect(x_op).real, rho.expect(p_op).real))
    return np.array(rows)


def homodyne_pdf(params: DimensionlessParams, t: float, lam: float, grid=None, cavity_cutoff: int = 30):
    """``(x, p(x))`` for a rotated-quadrature measurement of the cavity at time ``t``."""
    return homodyne.pdf(reduced_cavity(params, t, cavity_cutoff).data, lam, grid)


def homodyne_pdf_derivative(params: DimensionlessParams, t: float, lam: float, grid=None, cavity_cutoff: int = 30):
    """``(x, p, dp/dgbar)`` using the analytic cavity derivative."""
    grid = grid or homodyne.HomodyneGrid()
    x, p = homodyne.pdf(reduced_cavity(params, t, cavity_cutoff).data, lam, grid)
    dp = homodyne.density(reduced_cavity_derivative(params, t, cavity_cutoff), lam, x)
    return x, p, dp

