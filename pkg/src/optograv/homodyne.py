"""Rotated-quadrature measurement statistics on a truncated cavity mode.

The measured observable is ``x_lam = (a e^{-i lam} + a^dag e^{i lam}) / sqrt(2)``.
Its eigenstates satisfy ``<n|x_lam> = e^{i n lam} psi_n(x)`` with ``psi_n`` the
normalized harmonic-oscillator eigenfunctions, so for a cavity density matrix

    p(x) = Re sum_{n,n'} rho[n, n'] psi_n(x) psi_n'(x) e^{-i lam (n - n')}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import TOL
from .errors import NumericalError


@dataclass(frozen=True)
class HomodyneGrid:
    """Uniform quadrature grid on ``[-x_max, x_max]``.

    ``x_max=None`` picks ``sqrt(2 * cutoff) + 5``, enough to cover the
    truncated spectrum plus Gaussian tails.
    """

    x_max: float | None = None
    points: int = 2001

    def __post_init__(self):
        if self.points < 3:
            raise ValueError("a homodyne grid needs at least 3 points")
        if self.x_max is not None and not self.x_max > 0:
            raise ValueError(f"x_max must be positive, got {self.x_max}")

    def nodes(self, cutoff: int) -> np.ndarray:
        x_max = self.x_max if self.x_max is not None else math.sqrt(2.0 * cutoff) + 5.0
        return np.linspace(-x_max, x_max, self.points)


def eigenfunctions(n_max: int, x) -> np.ndarray:
    """Rows ``psi_0(x) ... psi_{n_max-1}(x)`` from the normalized three-term recurrence."""
    x = np.asarray(x, dtype=float)
    psi = np.empty((n_max,) + x.shape)
    psi[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max > 1:
        psi[1] = math.sqrt(2.0) * x * psi[0]
    for n in range(2, n_max):
        psi[n] = math.sqrt(2.0 / n) * x * psi[n - 1] - math.sqrt((n - 1) / n) * psi[n - 2]
    return psi


def _phased(n: int, lam: float, x: np.ndarray) -> np.ndarray:
    # rows e^{-i n lam} psi_n(x), so p = Re(u^T rho u^*) per column
    return eigenfunctions(n, x) * np.exp(-1j * lam * np.arange(n))[:, None]


def density(rho: np.ndarray, lam: float, x) -> np.ndarray:
    """``tr[rho |x_lam><x_lam|]`` at each point of ``x``. Also accepts ``d rho``."""
    rho = np.asarray(rho, dtype=complex)
    u = _phased(rho.shape[0], lam, np.asarray(x, dtype=float))
    return np.real(np.einsum("nx,nm,mx->x", u, rho, u.conj()))


def pdf(rho: np.ndarray, lam: float, grid: HomodyneGrid | None = None, *, check: bool = True):
    """Return ``(x, p)`` on the grid; raise if ``p`` dips below ``-1e-10`` or fails to normalize."""
    grid = grid or HomodyneGrid()
    cutoff = np.asarray(rho).shape[0]
    x = grid.nodes(cutoff)
    p = density(rho, lam, x)
    if check:
        lo = p.min()
        if lo < -TOL.pdf_negativity:
            raise NumericalError(
                f"homodyne density reaches {lo:.3e} at cavity cutoff {cutoff}", invariant="pdf_positivity"
            )
        mass = np.trapezoid(p, x)
        if abs(mass - 1.0) > TOL.mass_deficit:
            raise NumericalError(
                f"homodyne density integrates to {mass:.9f} at cavity cutoff {cutoff}; widen the grid",
                invariant="pdf_normalization",
            )
    return x, p


@dataclass(frozen=True)
class FisherIntegral:
    value: float
    skipped_mass: float


def fisher_integral(x: np.ndarray, p: np.ndarray, dp: np.ndarray) -> FisherIntegral:
    """Trapezoid ``int (dp)^2 / p dx`` skipping nodes with ``p`` below the floor."""
    keep = p >= TOL.probability_floor
    integrand = np.where(keep, dp * dp / np.where(keep, p, 1.0), 0.0)
    skipped = float(np.trapezoid(np.where(keep, 0.0, np.clip(p, 0.0, None)), x))
    if skipped > TOL.mass_deficit:
        raise NumericalError(f"{skipped:.3e} probability mass below the floor", invariant="mass_deficit")
    return FisherIntegral(float(np.trapezoid(integrand, x)), skipped)


def quadrature_eigensystem(cutoff: int, lam: float):
    """Eigenvalues and eigenvectors (columns) of the truncated ``x_lam`` matrix."""
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)
    x = (a * np.exp(-1j * lam) + a.T * np.exp(1j * lam)) / math.sqrt(2.0)
    return np.linalg.eigh(x)


def spectral_probabilities(rho: np.ndarray, lam: float):
    """Nodes ``x_j`` and outcome probabilities ``<e_j|rho|e_j>`` of the discrete quadrature measurement."""
    w, v = quadrature_eigensystem(np.asarray(rho).shape[0], lam)
    probs = np.real(np.einsum("nj,nm,mj->j", v.conj(), rho, v))
    return w, probs


def spectral_density(rho: np.ndarray, lam: float):
    """Continuous density evaluated at the eigenvalue nodes from the discrete probabilities.

    The truncated quadrature is a Jacobi matrix of the Hermite recurrence, so the
    weights ``|e_j[0]|^2`` are Gauss-Hermite Christoffel numbers and
    ``p(x_j) = p_j e^{-x_j^2} / (sqrt(pi) |e_j[0]|^2)`` holds exactly for
    states supported in the truncated space.
    """
    w, v = quadrature_eigensystem(np.asarray(rho).shape[0], lam)
    probs = np.real(np.einsum("nj,nm,mj->j", v.conj(), rho, v))
    return w, probs * np.exp(-w * w) / (math.sqrt(math.pi) * np.abs(v[0]) ** 2)


def spectral_fisher(rho: np.ndarray, drho: np.ndarray, lam: float) -> float:
    """Fisher information ``sum_j (dp_j)^2 / p_j`` of the discrete eigenbasis measurement."""
    _, p = spectral_probabilities(rho, lam)
    _, dp = spectral_probabilities(drho, lam)
    keep = p >= TOL.probability_floor
    return float(np.sum(dp[keep] ** 2 / p[keep]))
