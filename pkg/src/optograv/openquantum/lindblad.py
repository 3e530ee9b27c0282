"""Cavity photon loss: master equation, derivative propagation and mixed-state CFI.

The master equation is

    d rho/dt = -i [H, rho] + L rho L^dag - {L^dag L, rho} / 2,   L = sqrt(kappa_bar) a,

with the dimensionless rotating-frame Hamiltonian of :mod:`optograv.evolution`.
:func:`lindblad_rhs` evaluates it densely in the lab Fock basis. The
production solver integrates the same equation in the co-moving frame of
:mod:`optograv.openquantum.frame`, where only the loss terms remain.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .. import homodyne
from ..constants import TOL
from ..errors import ConfigError, CutoffError, NumericalError
from ..evolution import DimensionlessParams
from ..hilbert import DensityOperator, annihilation, identity, number, validate_density
from ..metrology import FisherResult, five_point, make_result
from ..states import TruncationWarning, coherent_amplitudes
from .frame import CoMovingFrame, coherent_cavity
from .integrators import IntegrationStats, rk4_fixed, rkf45_adaptive

INTEGRATORS = ("rkf45_adaptive", "rk4_fixed")


@dataclass(frozen=True)
class LindbladConfig:
    """Loss rate in rescaled time plus integrator settings."""

    kappa_bar: float = 0.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.pi / 50
    integrator: str = "rkf45_adaptive"

    def __post_init__(self):
        if not (math.isfinite(self.kappa_bar) and self.kappa_bar >= 0):
            raise ConfigError("kappa_bar", f"must be finite and nonnegative, got {self.kappa_bar}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("rel_tol", "tolerances must be positive")
        if not 0 < self.max_step <= math.pi / 50 + 1e-15:
            raise ConfigError("max_step", f"must lie in (0, pi/50], got {self.max_step}")
        if self.integrator not in INTEGRATORS:
            raise ConfigError("integrator", f"must be one of {INTEGRATORS}, got {self.integrator!r}")


def hamiltonian(params: DimensionlessParams, cavity_cutoff: int, osc_cutoff: int) -> np.ndarray:
    """Dense ``b^dag b - kbar a^dag a (b + b^dag) + gbar (b + b^dag)`` on cavity (x) oscillator."""
    b = annihilation(osc_cutoff)
    x = b + b.conj().T
    ic = identity(cavity_cutoff)
    return (
        np.kron(ic, number(osc_cutoff))
        - params.kbar * np.kron(number(cavity_cutoff), x)
        + params.gbar * np.kron(ic, x)
    )


def lindblad_rhs(rho, params: DimensionlessParams, cfg: LindbladConfig, dims: tuple[int, int] | None = None) -> np.ndarray:
    """Right-hand side of the master equation for a joint lab-basis matrix."""
    if isinstance(rho, DensityOperator):
        dims = rho.dims
        rho = rho.data
    if dims is None or len(dims) != 2:
        raise ValueError("lindblad_rhs needs a bipartite cavity-oscillator matrix")
    h = hamiltonian(params, *dims)
    out = -1j * (h @ rho - rho @ h)
    if cfg.kappa_bar:
        a = np.kron(annihilation(dims[0]), identity(dims[1]))
        ad = a.conj().T
        n = ad @ a
        out += cfg.kappa_bar * (a @ rho @ ad - 0.5 * (n @ rho + rho @ n))
    return out


class _FrameSystem:
    """Co-moving-frame right-hand sides for ``Y`` alone or for the stacked ``(Y, Z = d_gbar Y)``."""

    def __init__(self, frame: CoMovingFrame, kappa_bar: float):
        self.frame = frame
        self.kappa_bar = kappa_bar
        n = frame.n
        self.decay = 0.5 * kappa_bar * (n[:, None] + n[None, :])
        self.feed = kappa_bar * np.sqrt(np.outer(n[1:], n[1:]))  # sqrt((n+1)(n'+1)) for n, n' < N-1
        self.shape = (frame.cavity_cutoff, frame.cavity_cutoff, frame.frame_cutoff, frame.frame_cutoff)

    def dissipate(self, y: np.ndarray, s: np.ndarray, jump: np.ndarray) -> np.ndarray:
        out = -self.decay[:, :, None, None] * y
        if self.kappa_bar:
            coef = self.feed * s[:, None] * np.conj(s)[None, :]
            out[:-1, :-1] += coef[:, :, None, None] * (jump @ y[1:, 1:] @ jump.conj().T)
        return out

    def state(self, t: float, flat: np.ndarray) -> np.ndarray:
        s, jump = self.frame.jump(t) if self.kappa_bar else (None, None)
        return self.dissipate(flat.reshape(self.shape), s, jump).ravel()

    def stacked(self, t: float, flat: np.ndarray) -> np.ndarray:
        half = flat.size // 2
        y, z = flat[:half].reshape(self.shape), flat[half:].reshape(self.shape)
        s, jump = self.frame.jump(t) if self.kappa_bar else (None, None)
        src = self.frame.source(t)
        dz = self.dissipate(z, s, jump) - 1j * (src[:, None] @ y - y @ src[None, :])
        return np.concatenate([self.dissipate(y, s, jump).ravel(), dz.ravel()])


@dataclass
class FrameSample:
    """Joint state at time ``t`` stored as co-moving-frame blocks ``Y[n, n', j, k]``.

    ``derivative`` holds ``d_gbar`` of the same blocks when propagated.
    """

    t: float
    frame: CoMovingFrame = field(repr=False)
    blocks: np.ndarray = field(repr=False)
    derivative: np.ndarray | None = field(default=None, repr=False)
    # trace that leaked past the frame cutoff before renormalization
    truncation_deficit: float = 0.0

    def joint_matrix(self) -> np.ndarray:
        nc, k = self.frame.cavity_cutoff, self.frame.frame_cutoff
        return self.blocks.transpose(0, 2, 1, 3).reshape(nc * k, nc * k)

    def density(self, positivity: bool = True) -> DensityOperator:
        """Joint state in the co-moving basis, validated as a density operator."""
        nc, k = self.frame.cavity_cutoff, self.frame.frame_cutoff
        return DensityOperator(self.joint_matrix(), (nc, k), check_positivity=positivity)

    def reduced_cavity(self) -> DensityOperator:
        return DensityOperator(self.frame.reduce_cavity(self.blocks, self.t), (self.frame.cavity_cutoff,))

    def reduced_cavity_derivative(self) -> np.ndarray:
        if self.derivative is None:
            raise ValueError("sample was produced without derivative propagation")
        return self.frame.reduce_cavity(self.derivative, self.t)

    def lab(self, osc_cutoff: int) -> np.ndarray:
        """Joint lab-basis matrix with the oscillator truncated at ``osc_cutoff`` (not renormalized)."""
        return self.frame.to_lab(self.blocks, self.t, osc_cutoff)

    def lab_derivative(self, osc_cutoff: int) -> np.ndarray:
        return self.frame.to_lab(self.derivative, self.t, osc_cutoff)


@dataclass(frozen=True)
class InitialState:
    """Initial joint state for the open-system solvers.

    ``cavity`` holds Fock amplitudes (default: coherent ``alpha``). The
    oscillator is ``D(beta) sigma D(beta)^dag`` with ``sigma`` given on the
    frame levels (default: vacuum, so the oscillator starts in ``|beta>``).
    A full lab matrix ``lab`` with its oscillator cutoff may be given instead.
    """

    cavity: np.ndarray | None = None
    sigma: np.ndarray | None = None
    lab: np.ndarray | None = None
    lab_osc_cutoff: int | None = None


def initial_blocks(frame: CoMovingFrame, init: InitialState | None) -> np.ndarray:
    init = init or InitialState()
    if init.lab is not None:
        if init.lab_osc_cutoff is None:
            raise ValueError("lab initial state needs lab_osc_cutoff")
        return frame.from_lab(init.lab, init.lab_osc_cutoff)
    cav = coherent_cavity(frame.params, frame.cavity_cutoff) if init.cavity is None else init.cavity
    return frame.product_blocks(cav, init.sigma)


class PositivityWarning(UserWarning):
    """A sample's smallest eigenvalue is negative beyond the soft slack but within the hard limit."""


def _check_sample(sample: FrameSample, positivity: bool):
    joint = sample.joint_matrix()
    validate_density(joint, positivity=False, time=sample.t)
    if positivity:
        lo = float(np.linalg.eigvalsh(0.5 * (joint + joint.conj().T))[0])
        if lo < -TOL.positivity_hard:
            raise NumericalError(f"minimum eigenvalue {lo:.3e}", invariant="positivity", time=sample.t)
        if lo < -TOL.positivity_slack:
            warnings.warn(f"minimum eigenvalue {lo:.3e} at t={sample.t:.4f}", PositivityWarning, stacklevel=3)
    if sample.derivative is not None:
        nc, k = sample.frame.cavity_cutoff, sample.frame.frame_cutoff
        d = sample.derivative.transpose(0, 2, 1, 3).reshape(nc * k, nc * k)
        tr = abs(np.trace(d))
        if tr > TOL.trace:
            raise NumericalError(f"derivative trace {tr:.3e}", invariant="derivative_trace", time=sample.t)
        herm = np.max(np.abs(d - d.conj().T))
        if herm > TOL.hermiticity:
            raise NumericalError(
                f"derivative non-Hermitian by {herm:.3e}", invariant="derivative_hermiticity", time=sample.t
            )


def _integrate(rhs: Callable, y0: np.ndarray, times: np.ndarray, cfg: LindbladConfig):
    if cfg.integrator == "rk4_fixed":
        return rk4_fixed(rhs, y0, times, cfg.max_step)
    return rkf45_adaptive(rhs, y0, times, cfg.rel_tol, cfg.abs_tol, cfg.max_step)


def _sample_grid(t_end: float, sample_times) -> np.ndarray:
    times = np.asarray(sample_times if sample_times is not None else [t_end], dtype=float)
    if times.size == 0 or np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > t_end + 1e-12:
        raise ConfigError("sample_times", "must be a nonempty ascending list within [0, t_end]")
    return np.concatenate([[0.0], times]) if times[0] > 0 else times


def _run(params, cfg, t_end, sample_times, cavity_cutoff, frame_cutoff, init, with_derivative, positivity):
    frame = CoMovingFrame(params, cavity_cutoff, frame_cutoff)
    system = _FrameSystem(frame, cfg.kappa_bar)
    y0 = initial_blocks(frame, init)
    times = _sample_grid(t_end, sample_times)
    if with_derivative:
        flat0 = np.concatenate([y0.ravel(), np.zeros(y0.size, dtype=complex)])
        states, stats = _integrate(system.stacked, flat0, times, cfg)
    else:
        states, stats = _integrate(system.state, y0.ravel(), times, cfg)
    requested = np.asarray(sample_times if sample_times is not None else [t_end], dtype=float)
    offset = len(times) - len(requested)
    trace0 = float(np.einsum("nnjj->", y0).real)
    samples = []
    for t, flat in zip(times[offset:], states[offset:]):
        if with_derivative:
            half = flat.size // 2
            y, z = flat[:half].reshape(system.shape), flat[half:].reshape(system.shape)
        else:
            y, z = flat.reshape(system.shape), None
        y, z, deficit = _renormalize(y, z, trace0, float(t))
        sample = FrameSample(float(t), frame, y, z, deficit)
        _check_sample(sample, positivity)
        samples.append(sample)
    return samples, stats


def _renormalize(y, z, trace0, t):
    """Divide out weight lost through the top frame levels; the derivative follows ``d(rho / tr rho)``."""
    tr = float(np.einsum("nnjj->", y).real)
    deficit = max(0.0, 1.0 - tr / trace0)
    if deficit > TOL.closed_form_max_deficit:
        raise CutoffError(
            f"{deficit:.2e} of the state left the frame cutoff; raise frame_cutoff", invariant="trace", time=t
        )
    if deficit > TOL.coherent_warn_deficit:
        warnings.warn(f"frame truncation lost {deficit:.2e} of the trace at t={t:.4f}", TruncationWarning, stacklevel=4)
    if z is not None:
        z = z / tr - y * (np.einsum("nnjj->", z) / tr**2)
    return y / tr, z, deficit


def evolve_lindblad(
    params: DimensionlessParams,
    cfg: LindbladConfig,
    t_end: float,
    sample_times: Sequence[float] | None = None,
    *,
    cavity_cutoff: int = 10,
    frame_cutoff: int = 48,
    initial: InitialState | None = None,
    positivity: bool = True,
) -> list[FrameSample]:
    """Integrate the master equation and return validated samples at ``sample_times``.

    ``frame_cutoff`` counts oscillator levels in the co-moving frame. Each lost
    photon displaces the frame state by up to ``2 kbar``, and histories with
    several losses set the required size. Weight pushed past the cutoff is
    divided out and reported as ``truncation_deficit``; above ``1e-4`` a
    :class:`CutoffError` is raised.
    """
    samples, _ = _run(params, cfg, t_end, sample_times, cavity_cutoff, frame_cutoff, initial, False, positivity)
    return samples


def evolve_with_derivative(
    params: DimensionlessParams,
    cfg: LindbladConfig,
    t_end: float,
    sample_times: Sequence[float] | None = None,
    *,
    cavity_cutoff: int = 10,
    frame_cutoff: int = 48,
    initial: InitialState | None = None,
    positivity: bool = True,
) -> list[FrameSample]:
    """Co-integrate ``rho`` and ``d rho / d gbar`` (sourced by ``-i [b + b^dag, rho]``).

    The initial state must not depend on ``gbar``, so the derivative starts at zero.
    """
    samples, _ = _run(params, cfg, t_end, sample_times, cavity_cutoff, frame_cutoff, initial, True, positivity)
    return samples


def five_point_derivative(solver: Callable[[float], np.ndarray], gbar: float, h: float = 1e-3) -> np.ndarray:
    """Fourth-order five-point derivative of ``solver`` (returning arrays or density operators) in ``gbar``."""

    def f(g):
        out = solver(g)
        return out.data if isinstance(out, DensityOperator) else np.asarray(out)

    return five_point(f, gbar, h)


def cfi_mixed(
    rho,
    drho,
    lam: float,
    grid: homodyne.HomodyneGrid | None = None,
    *,
    method: str = "grid",
    physical=None,
    t: float | None = None,
) -> FisherResult:
    """Homodyne CFI of a cavity state with derivative ``drho``.

    ``method="grid"`` integrates ``(tr[drho Pi_x])^2 / tr[rho Pi_x]`` on the
    quadrature grid; ``method="spectral"`` uses the discrete measurement in
    the eigenbasis of the truncated quadrature.
    """
    rho = rho.data if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)
    drho = np.asarray(drho, dtype=complex)
    if not np.any(drho):
        return make_result(0.0, physical, t)
    if method == "spectral":
        return make_result(homodyne.spectral_fisher(rho, drho, lam), physical, t, note="spectral")
    if method != "grid":
        raise ValueError(f"unknown CFI method {method!r}")
    x, p = homodyne.pdf(rho, lam, grid)
    dp = homodyne.density(drho, lam, x)
    res = homodyne.fisher_integral(x, p, dp)
    return make_result(res.value, physical, t, note=f"skipped mass {res.skipped_mass:.1e}")


def cfi_trajectory(
    params: DimensionlessParams,
    cfg: LindbladConfig,
    times: Sequence[float],
    lam: float,
    *,
    cavity_cutoff: int = 10,
    frame_cutoff: int = 48,
    grid=None,
    initial: InitialState | None = None,
) -> np.ndarray:
    """Dimensionless CFI at each of ``times`` from one derivative-propagating run."""
    samples = evolve_with_derivative(
        params, cfg, float(times[-1]), times, cavity_cutoff=cavity_cutoff, frame_cutoff=frame_cutoff, initial=initial
    )
    return np.array(
        [
            cfi_mixed(s.reduced_cavity(), s.reduced_cavity_derivative(), lam, grid).dimensionless_value
            for s in samples
        ]
    )


def product_lab_state(params: DimensionlessParams, cavity_cutoff: int, osc_cutoff: int) -> np.ndarray:
    """Lab-basis ``|alpha><alpha| (x) |beta><beta|`` (renormalized per mode)."""
    c = coherent_amplitudes(params.alpha, cavity_cutoff)
    o = coherent_amplitudes(params.beta, osc_cutoff)
    v = np.kron(c / np.linalg.norm(c), o / np.linalg.norm(o))
    return np.outer(v, v.conj())


__all__ = [
    "FrameSample",
    "InitialState",
    "IntegrationStats",
    "LindbladConfig",
    "PositivityWarning",
    "cfi_mixed",
    "cfi_trajectory",
    "evolve_lindblad",
    "evolve_with_derivative",
    "five_point_derivative",
    "hamiltonian",
    "lindblad_rhs",
    "product_lab_state",
]
