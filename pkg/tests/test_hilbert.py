import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from optograv.errors import NumericalError
from optograv.evolution import DimensionlessParams, evolve_closed_form, reduced_cavity
from optograv.hilbert import (
    DensityOperator,
    StateVector,
    TruncatedSpace,
    annihilation,
    basis,
    convergence_check,
    creation,
    number,
    partial_trace,
    quadrature,
    reduce_pure,
    tensor,
    validate_density,
)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def complex_vectors(n):
    return st.tuples(arrays(float, n, elements=finite), arrays(float, n, elements=finite)).map(
        lambda ri: ri[0] + 1j * ri[1]
    ).filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_space_rejects_small_cutoff():
    with pytest.raises(ValueError):
        TruncatedSpace(1)


def test_annihilation_dim2():
    np.testing.assert_array_equal(annihilation(2), [[0, 1], [0, 0]])


def test_annihilation_entry():
    assert annihilation(3)[1, 2] == pytest.approx(math.sqrt(2))


def test_creation_is_adjoint_and_truncates():
    a, ad = annihilation(6), creation(6)
    np.testing.assert_array_equal(ad, a.conj().T)
    top = basis(6, 5).data
    assert np.allclose(ad @ top, 0)


def test_number_on_basis_states():
    n = number(12)
    a = annihilation(12)
    for k in range(12):
        v = basis(12, k).data
        np.testing.assert_allclose(a.conj().T @ a @ v, k * v, atol=1e-14)
    np.testing.assert_array_equal(np.diag(n), np.arange(12))


def test_quadrature_examples():
    np.testing.assert_allclose(quadrature(2, 0.0), [[0, 1 / math.sqrt(2)], [1 / math.sqrt(2), 0]])
    a = annihilation(5)
    np.testing.assert_allclose(quadrature(5, math.pi / 2), 1j * (a.conj().T - a) / math.sqrt(2), atol=1e-15)


@given(st.floats(0, 2 * math.pi))
def test_quadrature_conjugate_pair(lam):
    n = 15
    x, p = quadrature(n, lam), quadrature(n, lam + math.pi / 2)
    c = x @ p - p @ x
    np.testing.assert_allclose(c[: n - 1, : n - 1], 1j * np.eye(n - 1), atol=1e-12)
    np.testing.assert_allclose(x, x.conj().T, atol=1e-15)


def test_quadrature_spectrum_is_hermite_roots():
    # x = (a + a^dag)/sqrt2 truncated at N has the roots of H_N as eigenvalues
    roots = np.polynomial.hermite.hermroots([0] * 40 + [1])
    np.testing.assert_allclose(np.linalg.eigvalsh(quadrature(40, 0.0)), np.sort(roots), atol=1e-6)


def test_tensor_ordering():
    v = tensor(basis(3, 0), basis(4, 0))
    assert v.data[0] == 1 and v.dims == (3, 4)
    op = np.kron(number(3), np.eye(4))
    w = tensor(basis(3, 2), basis(4, 1)).data
    np.testing.assert_allclose(op @ w, 2 * w)


def test_tensor_trace_product():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(5, 5)), rng.normal(size=(5, 5))
    assert np.trace(tensor(a, b)) == pytest.approx(np.trace(a) * np.trace(b))


def test_tensor_factors_commute():
    rng = np.random.default_rng(2)
    m, k = rng.normal(size=(3, 3)), rng.normal(size=(4, 4))
    left, right = tensor(m, np.eye(4)), tensor(np.eye(3), k)
    np.testing.assert_allclose(left @ right, right @ left, atol=1e-12)


def test_partial_trace_product_state():
    rng = np.random.default_rng(3)
    ga, gb = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)), rng.normal(size=(4, 4))
    ra = ga @ ga.conj().T
    rb = gb @ gb.T
    ra, rb = ra / np.trace(ra), rb / np.trace(rb)
    rho = DensityOperator(np.kron(ra, rb), (3, 4))
    np.testing.assert_allclose(partial_trace(rho, "cavity").data, ra, atol=1e-12)
    np.testing.assert_allclose(partial_trace(rho, "oscillator").data, rb, atol=1e-12)


def test_partial_trace_bell_state():
    v = np.zeros(4, dtype=complex)
    v[0] = v[3] = 1 / math.sqrt(2)
    rho = StateVector(v, (2, 2)).projector()
    np.testing.assert_allclose(partial_trace(rho).data, np.eye(2) / 2, atol=1e-15)


def test_partial_trace_rejects_single_mode():
    with pytest.raises(ValueError):
        partial_trace(DensityOperator(np.eye(3) / 3, (3,)))


@pytest.mark.filterwarnings("ignore::optograv.states.TruncationWarning")
def test_partial_trace_of_evolved_state_matches_reduced_cavity():
    p = DimensionlessParams(kbar=1, gbar=1, alpha=1, beta=1)
    psi = evolve_closed_form(p, math.pi, 30, 400)
    np.testing.assert_allclose(reduce_pure(psi, "cavity").data, reduced_cavity(p, math.pi, 30).data, atol=1e-8)
    # the explicit projector route at a cutoff small enough to hold it densely
    small = evolve_closed_form(p, math.pi, 8, 300)
    np.testing.assert_allclose(
        partial_trace(small.projector(), "cavity").data, reduced_cavity(p, math.pi, 8).data, atol=1e-8
    )


@given(complex_vectors(12))
def test_partial_trace_of_random_pure_state(v):
    psi = StateVector.normalized(v, (3, 4))
    assert abs(np.linalg.norm(psi.data) - 1) <= 1e-9
    red = partial_trace(psi.projector(), "cavity")
    assert np.trace(red.data).real == pytest.approx(1, abs=1e-9)
    assert np.max(np.abs(red.data - red.data.conj().T)) <= 1e-12
    # Schmidt symmetry: both reductions share their purity
    assert red.purity() == pytest.approx(partial_trace(psi.projector(), "oscillator").purity(), abs=1e-9)


@given(complex_vectors(6), st.floats(0, 2 * math.pi))
def test_unitary_step_keeps_norm(v, t):
    psi = StateVector.normalized(v, (6,))
    u = np.diag(np.exp(-1j * t * np.arange(6)))
    out = StateVector(u @ psi.data, (6,))
    assert abs(np.linalg.norm(out.data) - 1) <= 1e-9


def test_state_vector_rejects_unnormalized():
    with pytest.raises(NumericalError):
        StateVector(np.array([1.0, 1.0]), (2,))


def test_density_invariants_enforced():
    with pytest.raises(NumericalError, match="trace"):
        validate_density(np.eye(2))
    with pytest.raises(NumericalError, match="hermiticity"):
        validate_density(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(NumericalError, match="positivity"):
        validate_density(np.diag([1.1, -0.1]))


def test_convergence_check():
    rep = convergence_check(lambda n: 1.0 - 2.0**-n, 20)
    assert rep.converged(1e-5)
    assert not convergence_check(lambda n: float(n), 20).converged(1e-5)
