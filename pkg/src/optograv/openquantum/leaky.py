"""Leaky-photon model: the cavity exchanges photons with one environment mode.

The environment starts in vacuum and couples through ``gamma_bar (a^dag c + a c^dag)``.
The tripartite pure state is stored as ``Psi[n, e, j]`` (cavity photons,
environment photons, oscillator level in the co-moving frame of sector
``n``). Only the exchange term survives in that frame:

    i dPsi[n, e]/dt = gamma_bar ( sqrt(n (e+1)) M_{n-1}^dag Psi[n-1, e+1]
                                + sqrt((n+1) e) M_n Psi[n+1, e-1] ),

with ``M_n = U_n^dag U_{n+1}`` the sector-to-sector map.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import homodyne
from ..constants import TOL
from ..errors import ConfigError, NumericalError
from ..evolution import DimensionlessParams
from ..metrology import FisherResult, five_point, make_result
from .frame import CoMovingFrame, coherent_cavity
from .integrators import rk4_fixed, rkf45_adaptive


@dataclass(frozen=True)
class LeakyConfig:
    gamma_bar: float = 0.1
    env_cutoff: int = 8
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = math.pi / 50
    integrator: str = "rkf45_adaptive"

    def __post_init__(self):
        if not (math.isfinite(self.gamma_bar) and self.gamma_bar >= 0):
            raise ConfigError("gamma_bar", f"must be finite and nonnegative, got {self.gamma_bar}")
        if int(self.env_cutoff) != self.env_cutoff or self.env_cutoff < 2:
            raise ConfigError("env_cutoff", f"must be an integer >= 2, got {self.env_cutoff}")
        if not 0 < self.max_step <= math.pi / 50 + 1e-15:
            raise ConfigError("max_step", f"must lie in (0, pi/50], got {self.max_step}")
        if self.integrator not in ("rkf45_adaptive", "rk4_fixed"):
            raise ConfigError("integrator", f"unknown integrator {self.integrator!r}")


@dataclass
class LeakySample:
    t: float
    frame: CoMovingFrame = field(repr=False)
    psi: np.ndarray = field(repr=False)

    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def environment(self) -> np.ndarray:
        """Reduced environment matrix ``rho_E[e, e']``."""
        return np.einsum("nej,nfj->ef", self.psi, self.psi.conj())

    def reduced_cavity(self) -> np.ndarray:
        w = self.frame.sector_overlaps(self.t)
        # rho_C[n, n'] = sum_e Psi[n', e]^dag W[n, n'] Psi[n, e]
        return np.einsum("aej,abkj,bek->ab", self.psi, w, self.psi.conj())

    def lab(self, osc_cutoff: int) -> np.ndarray:
        """Lab-basis amplitudes ``[n, e, m]`` with the oscillator cut at ``osc_cutoff``."""
        ops = [self.frame.lab_operator(self.t, n, osc_cutoff) for n in range(self.frame.cavity_cutoff)]
        return np.stack([self.psi[n] @ ops[n].T for n in range(self.frame.cavity_cutoff)])


class _LeakySystem:
    def __init__(self, frame: CoMovingFrame, cfg: LeakyConfig):
        self.frame, self.gamma = frame, cfg.gamma_bar
        nc, ne = frame.cavity_cutoff, cfg.env_cutoff
        n, e = np.arange(nc), np.arange(ne)
        self.shape = (nc, ne, frame.frame_cutoff)
        # coefficient for Psi[n-1, e+1] -> Psi[n, e], n >= 1, e <= ne-2
        self.up = np.sqrt(np.outer(n[1:], e[:-1] + 1))
        # coefficient for Psi[n+1, e-1] -> Psi[n, e], n <= nc-2, e >= 1
        self.down = np.sqrt(np.outer(n[:-1] + 1, e[1:]))

    def rhs(self, t: float, flat: np.ndarray) -> np.ndarray:
        psi = flat.reshape(self.shape)
        out = np.zeros_like(psi)
        if self.gamma:
            s, jump = self.frame.jump(t)
            # M_n v = s_n J v; row vectors use v @ J^T
            out[1:, :-1] += (self.up * np.conj(s)[:, None])[..., None] * (psi[:-1, 1:] @ jump.conj())
            out[:-1, 1:] += (self.down * s[:, None])[..., None] * (psi[1:, :-1] @ jump.T)
        return (-1j * self.gamma * out).ravel()


def evolve_leaky(
    params: DimensionlessParams,
    cfg: LeakyConfig,
    t_end: float,
    sample_times: Sequence[float] | None = None,
    *,
    cavity_cutoff: int = 10,
    frame_cutoff: int = 24,
    cavity=None,
) -> list[LeakySample]:
    """Unitary evolution of ``|alpha>_C |beta>_O |0>_E`` with the exchange coupling.

    Raises :class:`NumericalError` if the norm drifts by more than ``1e-8`` or
    if the top environment level holds more than ``1e-4`` population.
    """
    frame = CoMovingFrame(params, cavity_cutoff, frame_cutoff)
    system = _LeakySystem(frame, cfg)
    psi0 = np.zeros(system.shape, dtype=complex)
    psi0[:, 0, 0] = coherent_cavity(params, cavity_cutoff) if cavity is None else np.asarray(cavity, dtype=complex)
    requested = np.asarray(sample_times if sample_times is not None else [t_end], dtype=float)
    times = np.concatenate([[0.0], requested]) if requested[0] > 0 else requested
    if cfg.integrator == "rk4_fixed":
        states, _ = rk4_fixed(system.rhs, psi0.ravel(), times, cfg.max_step)
    else:
        states, _ = rkf45_adaptive(system.rhs, psi0.ravel(), times, cfg.rel_tol, cfg.abs_tol, cfg.max_step)
    offset = len(times) - len(requested)
    samples = []
    norm0 = np.linalg.norm(psi0)
    for t, flat in zip(times[offset:], states[offset:]):
        sample = LeakySample(float(t), frame, flat.reshape(system.shape))
        drift = abs(sample.norm() - norm0)
        if drift > TOL.norm * 10:
            raise NumericalError(f"tripartite norm drifted by {drift:.2e}", invariant="norm", time=float(t))
        top = float(np.sum(np.abs(sample.psi[:, -1, :]) ** 2))
        if top > 1e-4:
            raise NumericalError(
                f"environment level {cfg.env_cutoff - 1} holds population {top:.2e}; raise env_cutoff",
                invariant="env_cutoff",
                time=float(t),
            )
        samples.append(sample)
    return samples


def cfi_environment(rho_env, drho_env, lam: float, grid=None, physical=None, t=None) -> FisherResult:
    """Homodyne CFI of the environment mode given its state and ``gbar`` derivative."""
    rho_env = np.asarray(rho_env, dtype=complex)
    drho_env = np.asarray(drho_env, dtype=complex)
    if not np.any(np.abs(drho_env) > 1e-15):
        return make_result(0.0, physical, t)
    x, p = homodyne.pdf(rho_env / np.trace(rho_env).real, lam, grid)
    dp = homodyne.density(drho_env, lam, x)
    res = homodyne.fisher_integral(x, p, dp)
    return make_result(res.value, physical, t, note=f"skipped mass {res.skipped_mass:.1e}")


def _environment_run(args):
    params, cfg, times, kwargs = args
    return np.stack([s.environment() for s in evolve_leaky(params, cfg, times[-1], times, **kwargs)])


def environment_cfi_trajectory(
    params: DimensionlessParams,
    cfg: LeakyConfig,
    times: Sequence[float],
    lam: float,
    *,
    h: float = 1e-3,
    grid=None,
    jobs: int = 1,
    **kwargs,
) -> np.ndarray:
    """Dimensionless environment CFI at each time, with ``d rho_E / d gbar`` by five-point differences.

    The five ``gbar``-shifted solves are independent and run in ``jobs`` processes.
    """
    times = np.asarray(times, dtype=float)
    shifts = [params.gbar + k * h for k in (-2, -1, 1, 2)]
    tasks = [(params.with_gbar(g), cfg, times, kwargs) for g in [params.gbar] + shifts]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_environment_run, tasks))
    else:
        runs = [_environment_run(task) for task in tasks]
    centre, shifted = runs[0], dict(zip(shifts, runs[1:]))
    deriv = five_point(lambda g: shifted[g], params.gbar, h)
    return np.array([cfi_environment(centre[i], deriv[i], lam, grid).dimensionless_value for i in range(len(times))])
