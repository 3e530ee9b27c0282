"""Photon-number-resolved co-moving frame for the oscillator.

In the sector with ``n`` cavity photons the lossless dynamics is generated by
``H_n = b^dag b - kappa_n (b + b^dag)``, and the exact propagator factorizes as

    U_n(t) = u_n(t) D(phi_n(t)) e^{-i b^dag b t},
    u_n(t) = exp(i kappa_n Im(beta eta) + i kappa_n^2 tau),

with ``phi_n`` the classical coherent label started at ``beta``. Writing the
joint density matrix blockwise as ``rho_nn' = U_n Y_nn' U_n'^dag`` removes
the Hamiltonian from the equations of motion entirely. Cavity loss couples
sector ``n + 1`` to ``n`` through

    U_n^dag U_{n+1} = s_n(t) D(kbar (e^{it} - 1)),
    s_n(t) = conj(u_n) u_{n+1} exp(i Im(conj(phi_n) phi_{n+1})),

a displacement of size at most ``2 kbar``, so the oscillator factor of ``Y``
stays close to its initial support and needs far fewer Fock levels than a
lab-frame description in which coherent labels travel up to
``|beta| + 2 |kappa_n|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..evolution import DimensionlessParams, snapshot, tau_eta
from ..states import coherent_amplitudes


def padded_dimension(size: int, radius: float) -> int:
    """Working dimension for displacements of magnitude ``<= radius`` sliced to ``size`` levels."""
    s = math.sqrt(size) + abs(radius)
    return int(math.ceil(s * s + 10.0 * s + 20.0))


class Displacer:
    """Truncated displacement matrices ``<j|D(xi)|k>`` for ``j < rows``, ``k < cols``.

    The real generator ``b^dag - b`` is diagonalized once on a padded space;
    complex arguments are handled by the phase rotation
    ``D(r e^{i th}) = e^{i th N} D(r) e^{-i th N}``.
    """

    def __init__(self, rows: int, cols: int, max_radius: float):
        self.rows, self.cols, self.max_radius = rows, cols, max_radius
        dim = padded_dimension(max(rows, cols), max_radius)
        b = np.diag(np.sqrt(np.arange(1, dim)), 1)
        w, v = np.linalg.eigh(1j * (b.T - b))  # Hermitian; b^dag - b = -i v w v^dag
        self._w = w
        self._vr = v[:rows]
        self._vc = v[:cols].conj().T

    def __call__(self, xi: complex) -> np.ndarray:
        r, th = abs(xi), np.angle(xi)
        if r > self.max_radius * (1 + 1e-12):
            raise ValueError(f"displacement {r:.3g} beyond the prepared radius {self.max_radius:.3g}")
        d = (self._vr * np.exp(-1j * self._w * r)) @ self._vc
        if th:
            d = np.exp(1j * th * np.arange(self.rows))[:, None] * d * np.exp(-1j * th * np.arange(self.cols))[None, :]
        return d


@dataclass
class CoMovingFrame:
    """Frame data for cavity cutoff ``cavity_cutoff`` and oscillator frame cutoff ``frame_cutoff``."""

    params: DimensionlessParams
    cavity_cutoff: int
    frame_cutoff: int

    def __post_init__(self):
        k = self.params.kbar
        self.n = np.arange(self.cavity_cutoff)
        self.kappa = self.params.kappa(self.n)
        self._jump = Displacer(self.frame_cutoff, self.frame_cutoff, 2.0 * k)
        self._far = Displacer(self.frame_cutoff, self.frame_cutoff, 2.0 * k * max(1, self.cavity_cutoff - 1))
        b = np.diag(np.sqrt(np.arange(1, self.frame_cutoff)), 1).astype(complex)
        self.b = b

    def phases(self, t: float) -> np.ndarray:
        """``u_n(t)`` for every cavity sector."""
        tau, eta = tau_eta(t)
        return np.exp(1j * (self.kappa * (self.params.beta * eta).imag + self.kappa**2 * tau))

    def labels(self, t: float) -> np.ndarray:
        return snapshot(self.params, t, self.cavity_cutoff).phi

    def jump(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Scalars ``s_n`` (length ``cavity_cutoff - 1``) and the shared matrix ``D(kbar (e^{it} - 1))``."""
        u, phi = self.phases(t), self.labels(t)
        s = np.conj(u[:-1]) * u[1:] * np.exp(1j * (np.conj(phi[:-1]) * phi[1:]).imag)
        return s, self._jump(self.params.kbar * (np.exp(1j * t) - 1.0))

    def sector_overlaps(self, t: float) -> np.ndarray:
        """``W[n, n'] = U_n'^dag U_n`` as an array ``(N, N, K, K)``; ``rho_C[n, n'] = tr(Y_nn' W[n, n'])``."""
        u, phi = self.phases(t), self.labels(t)
        ph = u[:, None] * np.conj(u)[None, :] * np.exp(1j * (np.conj(phi)[None, :] * phi[:, None]).imag)
        shift = self.params.kbar * (np.exp(1j * t) - 1.0)
        mats = {d: self._far(d * shift) for d in range(-self.cavity_cutoff + 1, self.cavity_cutoff)}
        out = np.empty((self.cavity_cutoff, self.cavity_cutoff, self.frame_cutoff, self.frame_cutoff), dtype=complex)
        for i in range(self.cavity_cutoff):
            for j in range(self.cavity_cutoff):
                out[i, j] = ph[i, j] * mats[i - j]
        return out

    def source(self, t: float) -> np.ndarray:
        """``U_n^dag (b + b^dag) U_n = b e^{-it} + b^dag e^{it} + 2 Re(phi_n)`` per sector."""
        e = np.exp(-1j * t)
        core = self.b * e + self.b.conj().T * np.conj(e)
        return core[None] + 2.0 * self.labels(t).real[:, None, None] * np.eye(self.frame_cutoff)[None]

    def reduce_cavity(self, blocks: np.ndarray, t: float) -> np.ndarray:
        """Reduced cavity matrix from blocks ``Y[n, n', j, k]`` (works for derivative blocks too)."""
        w = self.sector_overlaps(t)
        return np.einsum("abjk,abkj->ab", blocks, w)

    def lab_operator(self, t: float, n: int, osc_cutoff: int) -> np.ndarray:
        """Matrix of ``U_n(t)`` from frame levels to the first ``osc_cutoff`` lab levels."""
        phi = self.labels(t)[n]
        disp = Displacer(osc_cutoff, self.frame_cutoff, abs(phi))(phi)
        return self.phases(t)[n] * disp * np.exp(-1j * t * np.arange(self.frame_cutoff))[None, :]

    def to_lab(self, blocks: np.ndarray, t: float, osc_cutoff: int) -> np.ndarray:
        """Joint lab-frame matrix on ``cavity (x) oscillator`` with the oscillator cut at ``osc_cutoff``."""
        ops = [self.lab_operator(t, n, osc_cutoff) for n in range(self.cavity_cutoff)]
        nc = self.cavity_cutoff
        out = np.empty((nc, osc_cutoff, nc, osc_cutoff), dtype=complex)
        for i in range(nc):
            for j in range(nc):
                out[i, :, j, :] = ops[i] @ blocks[i, j] @ ops[j].conj().T
        return out.reshape(nc * osc_cutoff, nc * osc_cutoff)

    def from_lab(self, rho: np.ndarray, osc_cutoff: int) -> np.ndarray:
        """Blocks ``Y`` at ``t = 0`` from a lab matrix; all sectors share ``U_n(0) = D(beta)``."""
        nc, k = self.cavity_cutoff, self.frame_cutoff
        dinv = Displacer(k, osc_cutoff, abs(self.params.beta))(-self.params.beta)
        r = np.asarray(rho, dtype=complex).reshape(nc, osc_cutoff, nc, osc_cutoff).transpose(0, 2, 1, 3)
        return dinv @ r @ dinv.conj().T

    def product_blocks(self, cavity_amplitudes: np.ndarray, osc_frame_state=None) -> np.ndarray:
        """Blocks for ``|c><c| (x) sigma`` where ``sigma`` is given in the frame (default: vacuum, i.e. ``|beta>``)."""
        c = np.asarray(cavity_amplitudes, dtype=complex)
        if osc_frame_state is None:
            sigma = np.zeros((self.frame_cutoff, self.frame_cutoff), dtype=complex)
            sigma[0, 0] = 1.0
        else:
            sigma = np.asarray(osc_frame_state, dtype=complex)
        return np.outer(c, c.conj())[:, :, None, None] * sigma[None, None]


def coherent_cavity(params: DimensionlessParams, cavity_cutoff: int) -> np.ndarray:
    """Renormalized truncated coherent amplitudes for the cavity input."""
    c = coherent_amplitudes(params.alpha, cavity_cutoff)
    return c / np.linalg.norm(c)
