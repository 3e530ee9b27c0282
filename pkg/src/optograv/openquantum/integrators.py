"""Explicit Runge-Kutta integrators for complex array states.

Both integrators land exactly on every requested sample time, so samples
never depend on interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import NumericalError

Rhs = Callable[[float, np.ndarray], np.ndarray]

# Fehlberg 4(5) tableau
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])


@dataclass
class IntegrationStats:
    steps: int = 0
    rejected: int = 0
    rhs_calls: int = 0
    min_step: float = np.inf
    step_sizes: list = field(default_factory=list, repr=False)


def rk4_step(f: Rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_fixed(f: Rhs, y0: np.ndarray, times: Sequence[float], max_step: float, stats=None):
    """Classical RK4 with the largest uniform step ``<= max_step`` inside each sample interval."""
    stats = stats or IntegrationStats()
    y, t = np.array(y0, dtype=complex), float(times[0])
    out = [y.copy()]
    for t_next in times[1:]:
        span = float(t_next) - t
        steps = max(1, int(np.ceil(span / max_step - 1e-12))) if span > 0 else 0
        for i in range(steps):
            h = span / steps
            y = rk4_step(f, t + i * h, y, h)
        stats.steps += steps
        stats.rhs_calls += 4 * steps
        t = float(t_next)
        out.append(y.copy())
    return out, stats


def _error_norm(err: np.ndarray, y_old: np.ndarray, y_new: np.ndarray, rtol: float, atol: float) -> float:
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.max(np.abs(err) / scale)) if err.size else 0.0


def rkf45_adaptive(
    f: Rhs,
    y0: np.ndarray,
    times: Sequence[float],
    rtol: float,
    atol: float,
    max_step: float,
    first_step: float | None = None,
    min_step: float = 1e-12,
    stats=None,
):
    """Runge-Kutta-Fehlberg 4(5), advancing with the fourth-order solution.

    The step is controlled by the mixed error ``atol + rtol |y|`` in the max
    norm. Step-size underflow raises :class:`NumericalError`.
    """
    stats = stats or IntegrationStats()
    y, t = np.array(y0, dtype=complex), float(times[0])
    h = min(first_step or max_step / 4, max_step)
    out = [y.copy()]
    k = [None] * 6
    for t_next in times[1:]:
        t_next = float(t_next)
        while t < t_next:
            h_try = min(h, max_step, t_next - t)
            k[0] = f(t, y)
            for i in range(1, 6):
                incr = sum(a * k[j] for j, a in enumerate(_A[i]) if a)
                k[i] = f(t + _C[i] * h_try, y + h_try * incr)
            stats.rhs_calls += 6
            y4 = y + h_try * sum(b * kk for b, kk in zip(_B4, k) if b)
            y5 = y + h_try * sum(b * kk for b, kk in zip(_B5, k) if b)
            err = _error_norm(y5 - y4, y, y4, rtol, atol)
            if err <= 1.0:
                t += h_try
                y = y4
                stats.steps += 1
                stats.min_step = min(stats.min_step, h_try)
                stats.step_sizes.append(h_try)
                factor = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
                # a step clipped to hit a sample time says nothing about the ideal size
                if h_try >= h or factor < 1.0:
                    h = h_try * factor
            else:
                stats.rejected += 1
                h = h_try * max(0.1, 0.9 * err ** -0.25)
                if h < min_step:
                    raise NumericalError(f"step size underflow ({h:.2e})", invariant="step_size", time=t)
            if t_next - t < 1e-14 * max(1.0, abs(t_next)):
                t = t_next
        out.append(y.copy())
    return out, stats
