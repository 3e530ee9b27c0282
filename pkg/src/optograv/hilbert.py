"""Dense linear algebra on truncated bosonic Fock spaces.

Bipartite objects always put the cavity first: the cavity index is the slow
(leftmost) Kronecker index and the oscillator index the fast one, so the
amplitude of ``|n>_C |m>_O`` lives at flat index ``n * dim_O + m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .constants import TOL
from .errors import NumericalError

CAVITY, OSCILLATOR = 0, 1
_SUBSYSTEM = {"cavity": CAVITY, "oscillator": OSCILLATOR, "environment": 2}


@dataclass(frozen=True)
class TruncatedSpace:
    """Fock space spanned by ``|0>, ..., |dim-1>``."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"Fock cutoff must be an integer >= 2, got {self.dim!r}")


def _dims_of(space) -> tuple[int, ...]:
    if isinstance(space, TruncatedSpace):
        return (space.dim,)
    if isinstance(space, (int, np.integer)):
        return (TruncatedSpace(int(space)).dim,)
    return tuple(d for s in space for d in _dims_of(s))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state. ``dims`` lists the per-mode cutoffs."""

    data: np.ndarray
    dims: tuple[int, ...]
    check: bool = field(default=True, repr=False)
    # norm lost to truncation before renormalization, if the constructor knew it
    norm_deficit: float = field(default=0.0, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex).reshape(-1)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if data.size != int(np.prod(self.dims)):
            raise ValueError(f"amplitude length {data.size} does not match dims {self.dims}")
        if self.check:
            deficit = abs(np.linalg.norm(data) - 1.0)
            if deficit > TOL.norm:
                raise NumericalError(f"state norm off by {deficit:.3e}", invariant="norm")

    @classmethod
    def normalized(cls, amplitudes, dims) -> "StateVector":
        amplitudes = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amplitudes)
        return cls(amplitudes / norm, tuple(dims), norm_deficit=max(0.0, 1.0 - norm**2))

    def as_tensor(self) -> np.ndarray:
        return self.data.reshape(self.dims)

    def projector(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.data, self.data.conj()), self.dims)

    def expect(self, op: np.ndarray) -> complex:
        return np.vdot(self.data, op @ self.data)

    def overlap(self, other: "StateVector") -> complex:
        return np.vdot(self.data, other.data)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, unit-trace, positive (up to slack) matrix.

    ``check_positivity`` costs a full eigendecomposition; callers holding
    large bipartite operators may switch it off and check reduced states.
    """

    data: np.ndarray
    dims: tuple[int, ...]
    check: bool = field(default=True, repr=False)
    check_positivity: bool = field(default=True, repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        n = int(np.prod(self.dims))
        if data.shape != (n, n):
            raise ValueError(f"matrix shape {data.shape} does not match dims {self.dims}")
        if self.check:
            validate_density(data, positivity=self.check_positivity)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def expect(self, op: np.ndarray) -> complex:
        return np.trace(self.data @ op)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.data, self.data)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.data)[0])


def validate_density(data: np.ndarray, *, positivity: bool = True, time: float | None = None):
    """Raise :class:`NumericalError` if ``data`` is not a valid density matrix."""
    herm = np.max(np.abs(data - data.conj().T)) if data.size else 0.0
    if herm > TOL.hermiticity:
        raise NumericalError(f"non-Hermitian by {herm:.3e}", invariant="hermiticity", time=time)
    tr = np.trace(data)
    if abs(tr - 1.0) > TOL.trace:
        raise NumericalError(f"trace is {tr.real:.12f}", invariant="trace", time=time)
    if positivity:
        lo = np.linalg.eigvalsh(0.5 * (data + data.conj().T))[0]
        if lo < -TOL.positivity_slack:
            raise NumericalError(f"minimum eigenvalue {lo:.3e}", invariant="positivity", time=time)


def annihilation(space) -> np.ndarray:
    """Lowering operator with ``sqrt(n)`` at ``(n-1, n)``; ``a^dag |N-1> = 0``."""
    dim = _dims_of(space)[0]
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def creation(space) -> np.ndarray:
    return annihilation(space).conj().T


def number(space) -> np.ndarray:
    dim = _dims_of(space)[0]
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def identity(space) -> np.ndarray:
    return np.eye(int(np.prod(_dims_of(space))), dtype=complex)


def quadrature(space, lam: float) -> np.ndarray:
    """Rotated quadrature ``(a e^{-i lam} + a^dag e^{i lam}) / sqrt(2)``."""
    a = annihilation(space)
    return (a * np.exp(-1j * lam) + a.conj().T * np.exp(1j * lam)) / np.sqrt(2.0)


def basis(space, n: int) -> StateVector:
    dim = _dims_of(space)[0]
    if not 0 <= n < dim:
        raise ValueError(f"basis index {n} outside cutoff {dim}")
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return StateVector(v, (dim,))


def tensor(a, b):
    """Kronecker product, first operand slow. Works on arrays, states and density operators."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.data, b.data), a.dims + b.dims, check=False)
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(np.kron(a.data, b.data), a.dims + b.dims, check=False)
    if isinstance(a, (StateVector, DensityOperator)) or isinstance(b, (StateVector, DensityOperator)):
        raise TypeError("cannot mix states and plain operators in tensor()")
    return np.kron(np.asarray(a), np.asarray(b))


def _subsystem_index(keep) -> int:
    if isinstance(keep, str):
        try:
            return _SUBSYSTEM[keep]
        except KeyError:
            raise ValueError(f"unknown subsystem {keep!r}") from None
    return int(keep)


def partial_trace(rho: DensityOperator, keep="cavity") -> DensityOperator:
    """Reduced density operator on the subsystem ``keep`` (name or index)."""
    if len(rho.dims) < 2:
        raise ValueError("partial_trace needs a multipartite density operator")
    k = _subsystem_index(keep)
    if not 0 <= k < len(rho.dims):
        raise ValueError(f"subsystem {keep!r} not present in dims {rho.dims}")
    nd = len(rho.dims)
    t = rho.data.reshape(rho.dims + rho.dims)
    # contract every index pair except the kept one
    row = list(range(nd))
    col = [nd + i if i == k else i for i in range(nd)]
    reduced = np.einsum(t, row + col, [k, nd + k])
    return DensityOperator(reduced, (rho.dims[k],), check=False)


def reduce_pure(psi: StateVector, keep="cavity") -> DensityOperator:
    """Partial trace of ``|psi><psi|`` without forming the full projector."""
    k = _subsystem_index(keep)
    t = np.moveaxis(psi.as_tensor(), k, 0).reshape(psi.dims[k], -1)
    return DensityOperator(t @ t.conj().T, (psi.dims[k],), check=False)


@dataclass(frozen=True)
class ConvergenceReport:
    cutoff: int
    larger_cutoff: int
    value: float
    larger_value: float

    @property
    def difference(self) -> float:
        return float(np.max(np.abs(np.asarray(self.larger_value) - np.asarray(self.value))))

    def converged(self, tol: float) -> bool:
        return self.difference <= tol


def convergence_check(observable: Callable[[int], float], cutoff: int, increment: int = 10) -> ConvergenceReport:
    """Evaluate ``observable(N)`` at ``cutoff`` and ``cutoff + increment``."""
    return ConvergenceReport(cutoff, cutoff + increment, observable(cutoff), observable(cutoff + increment))


def dims_of(space) -> Sequence[int]:
    return _dims_of(space)
