import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.stats import unitary_group

from optograv.evolution import DimensionlessParams, reduced_cavity
from optograv.hilbert import DensityOperator, annihilation, number, quadrature
from optograv.states import (
    CoherentLabel,
    ThermalSpec,
    TruncationWarning,
    coherent,
    displaced_thermal,
    displacement_operator,
    fidelity_to_coherent,
    fock,
    fock_superposition,
    linear_entropy,
)


def test_vacuum_label_is_ground_state():
    np.testing.assert_array_equal(coherent(10, 0).data, np.eye(10)[0])


def test_coherent_moments():
    psi = coherent(30, CoherentLabel(1.0))
    assert psi.expect(number(30)).real == pytest.approx(1.0, abs=1e-9)
    assert psi.expect(quadrature(30, 0.0)).real == pytest.approx(math.sqrt(2), abs=1e-8)


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_coherent_is_eigenvector_of_a(re, im):
    alpha = complex(re, im)
    psi = coherent(40, alpha)
    assert psi.expect(annihilation(40)) == pytest.approx(alpha, abs=1e-8)


def test_coherent_warns_when_truncated():
    with pytest.warns(TruncationWarning):
        psi = coherent(5, 2.0)
    assert psi.norm_deficit > 1e-6


def test_fock_superposition():
    psi = fock_superposition(6, 1)
    np.testing.assert_allclose(psi.data[:2], [1 / math.sqrt(2)] * 2)
    assert np.count_nonzero(psi.data) == 2
    for n in (1, 3, 5):
        s = fock_superposition(6, n)
        assert s.expect(number(6)).real == pytest.approx(n / 2)
        assert s.projector().purity() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fock_superposition(6, 6)
    with pytest.raises(ValueError):
        fock(6, 6)


def test_displacement_matches_expm():
    b = annihilation(20)
    xi = 0.4 - 0.3j
    np.testing.assert_allclose(displacement_operator(20, xi), expm(xi * b.conj().T - np.conj(xi) * b), atol=1e-12)


def test_zero_temperature_thermal_is_coherent():
    rho = displaced_thermal(30, ThermalSpec(0.0, 0.7 + 0.2j))
    psi = coherent(30, 0.7 + 0.2j).data
    np.testing.assert_allclose(rho.data, np.outer(psi, psi.conj()), atol=1e-8)


def test_thermal_geometric_weights():
    nbar = 0.5
    rho = displaced_thermal(40, ThermalSpec(nbar))
    m = np.arange(40)
    expected = (1 / (1 + nbar)) * (nbar / (1 + nbar)) ** m
    np.testing.assert_allclose(np.diag(rho.data).real, expected / expected.sum(), atol=1e-12)
    assert np.max(np.abs(rho.data - np.diag(np.diag(rho.data)))) < 1e-12


@pytest.mark.parametrize("nbar,xi", [(0.3, 0.5), (1.0, 1j), (0.8, -0.6 + 0.6j)])
def test_thermal_occupation(nbar, xi):
    rho = displaced_thermal(40, ThermalSpec(nbar, xi))
    assert np.trace(rho.data).real == pytest.approx(1.0, abs=1e-9)
    assert rho.expect(number(40)).real == pytest.approx(nbar + abs(xi) ** 2, abs=1e-6)


def test_inverse_temperature_conversion():
    spec = ThermalSpec.from_inverse_temperature(math.log(3.0))
    assert spec.mean_occupation == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ThermalSpec(-0.1)


def test_linear_entropy_limits():
    assert linear_entropy(coherent(10, 0.5).projector()) == pytest.approx(0.0, abs=1e-9)
    assert linear_entropy(DensityOperator(np.eye(7) / 7, (7,))) == pytest.approx(1 - 1 / 7)


@given(st.integers(0, 10_000))
def test_linear_entropy_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    rho = g @ g.conj().T
    rho = DensityOperator(rho / np.trace(rho), (6,))
    u = unitary_group.rvs(6, random_state=seed)
    turned = DensityOperator(u @ rho.data @ u.conj().T, (6,))
    assert linear_entropy(turned) == pytest.approx(linear_entropy(rho), abs=1e-9)


def test_cavity_entropy_peaks_at_half_period():
    p = DimensionlessParams(kbar=1, gbar=1, alpha=1, beta=1)
    ts = np.linspace(0, 2 * math.pi, 101)
    s = np.array([linear_entropy(reduced_cavity(p, t, 30)) for t in ts])
    assert abs(ts[np.argmax(s)] - math.pi) < 1e-9
    assert s[-1] < 1e-6


def test_fidelity_to_coherent():
    assert fidelity_to_coherent(coherent(20, 0.3j).projector(), 0.3j) == pytest.approx(1.0, abs=1e-9)
    assert fidelity_to_coherent(coherent(20, 0).projector(), 1.0) == pytest.approx(math.exp(-1), abs=1e-6)
