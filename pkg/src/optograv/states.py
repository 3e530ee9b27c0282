"""State constructors and single-mode diagnostics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .constants import TOL
from .hilbert import DensityOperator, StateVector, annihilation, dims_of


class TruncationWarning(UserWarning):
    """The Fock cutoff is too small to hold the requested state faithfully."""


@dataclass(frozen=True)
class CoherentLabel:
    amplitude: complex

    def __post_init__(self):
        object.__setattr__(self, "amplitude", complex(self.amplitude))


@dataclass(frozen=True)
class ThermalSpec:
    """Displaced thermal state ``D(xi) rho_th(nbar) D(xi)^dag``."""

    mean_occupation: float
    displacement: complex = 0.0

    def __post_init__(self):
        if not self.mean_occupation >= 0:
            raise ValueError(f"mean occupation must be >= 0, got {self.mean_occupation}")
        object.__setattr__(self, "displacement", complex(self.displacement))

    @classmethod
    def from_inverse_temperature(cls, hbar_omega_beta: float, displacement: complex = 0.0) -> "ThermalSpec":
        """Build from the dimensionless product ``hbar * omega * inverse_temperature``."""
        return cls(1.0 / math.expm1(hbar_omega_beta), displacement)


def _amplitude(label) -> complex:
    return label.amplitude if isinstance(label, CoherentLabel) else complex(label)


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Unnormalized Fock amplitudes ``e^{-|a|^2/2} a^n / sqrt(n!)`` for ``n < dim``."""
    n = np.arange(dim)
    if alpha == 0:
        return (n == 0).astype(complex)
    log_mag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag + 1j * n * np.angle(alpha))


def coherent(space, label) -> StateVector:
    """Truncated, renormalized coherent state; ``norm_deficit`` records the lost weight."""
    dim = dims_of(space)[0]
    alpha = _amplitude(label)
    amps = coherent_amplitudes(alpha, dim)
    state = StateVector.normalized(amps, (dim,))
    if state.norm_deficit > TOL.coherent_warn_deficit or abs(alpha) ** 2 > dim / 4:
        warnings.warn(
            f"coherent amplitude {alpha} at cutoff {dim}: truncated weight {state.norm_deficit:.2e}",
            TruncationWarning,
            stacklevel=2,
        )
    return state


def fock(space, n: int) -> StateVector:
    dim = dims_of(space)[0]
    if not 0 <= n < dim:
        raise ValueError(f"Fock index {n} must be below the cutoff {dim}")
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return StateVector(v, (dim,))


def fock_superposition(space, n: int) -> StateVector:
    """``(|0> + |n>) / sqrt(2)``."""
    dim = dims_of(space)[0]
    if not 1 <= n < dim:
        raise ValueError(f"need 1 <= n < cutoff {dim}, got n={n}")
    v = np.zeros(dim, dtype=complex)
    v[0] = v[n] = 1.0 / math.sqrt(2.0)
    return StateVector(v, (dim,))


def displacement_operator(dim: int, xi: complex) -> np.ndarray:
    """``exp(xi b^dag - xi^* b)`` on a ``dim``-level space via eigendecomposition of its Hermitian generator."""
    b = annihilation(dim)
    gen = 1j * (xi * b.conj().T - np.conj(xi) * b)  # Hermitian; D = exp(-i gen)
    w, v = np.linalg.eigh(gen)
    return (v * np.exp(-1j * w)) @ v.conj().T


def _padding(dim: int, spec: ThermalSpec) -> int:
    r = abs(spec.displacement)
    spread = spec.mean_occupation * 40 + 10 * r + r * r
    return int(dim + spread + 30)


def displaced_thermal(space, spec: ThermalSpec) -> DensityOperator:
    """Displaced thermal state built as a finite mixture in the displaced number basis.

    The mixture is assembled on a padded space, truncated to ``dim`` and renormalized.
    """
    dim = dims_of(space)[0]
    big = _padding(dim, spec)
    nbar = spec.mean_occupation
    m = np.arange(big)
    if nbar == 0:
        weights = (m == 0).astype(float)
    else:
        weights = (1.0 / (1.0 + nbar)) * (nbar / (1.0 + nbar)) ** m
    d = displacement_operator(big, spec.displacement)
    rho_big = (d * weights) @ d.conj().T
    rho = rho_big[:dim, :dim]
    tr = np.trace(rho).real
    deficit = 1.0 - tr
    if deficit > TOL.coherent_warn_deficit:
        warnings.warn(
            f"thermal state (nbar={nbar}, xi={spec.displacement}) loses {deficit:.2e} above cutoff {dim}",
            TruncationWarning,
            stacklevel=2,
        )
    rho = rho / tr
    return DensityOperator(0.5 * (rho + rho.conj().T), (dim,))


def linear_entropy(rho: DensityOperator) -> float:
    """``1 - tr(rho^2)``."""
    return 1.0 - rho.purity()


def fidelity_to_coherent(rho: DensityOperator, label) -> float:
    """``<label| rho |label>`` for a single-mode ``rho``."""
    if len(rho.dims) != 1:
        raise ValueError("fidelity_to_coherent needs a single-mode density operator")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        ket = coherent(rho.dims[0], label).data
    return float(np.real(np.vdot(ket, rho.data @ ket)))
