import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from optograv.errors import ConfigError, CutoffError, NumericalError
from optograv.evolution import DimensionlessParams, reduced_cavity
from optograv.metrology import cfi_homodyne
from optograv.openquantum import (
    InitialState,
    LeakyConfig,
    LindbladConfig,
    cfi_mixed,
    cfi_trajectory,
    environment_cfi_trajectory,
    evolve_leaky,
    evolve_lindblad,
    evolve_with_derivative,
    five_point_derivative,
    hamiltonian,
    lindblad_rhs,
    product_lab_state,
    rk4_fixed,
    rkf45_adaptive,
)
from optograv.states import coherent_amplitudes

TWO_PI = 2 * math.pi
UNIT = DimensionlessParams(kbar=1, gbar=1, alpha=1, beta=1)
HALF = DimensionlessParams(kbar=0.5, gbar=0.5, alpha=0.5, beta=0.5)
RK4 = dict(integrator="rk4_fixed")


# integrators


def test_rk4_exponential():
    out, stats = rk4_fixed(lambda t, y: -1j * y, np.array([1.0 + 0j]), [0.0, 1.0, 2.0], 0.01)
    np.testing.assert_allclose(out[-1], np.exp(-2j), atol=1e-9)
    assert stats.steps == 200


def test_rkf45_tolerance_and_stats():
    out, stats = rkf45_adaptive(lambda t, y: np.array([y[1], -y[0]]), np.array([1.0, 0.0]), [0.0, 10.0], 1e-10, 1e-12, 0.1)
    np.testing.assert_allclose(out[-1], [math.cos(10), -math.sin(10)], atol=1e-8)
    assert stats.steps > 0 and stats.min_step > 0


def test_rkf45_step_underflow():
    with pytest.raises(NumericalError, match="step_size"):
        rkf45_adaptive(lambda t, y: y / (1.0 - t) ** 3, np.array([1.0]), [0.0, 1.0], 1e-10, 1e-12, 0.1)


@pytest.mark.parametrize(
    "field,kw",
    [
        ("kappa_bar", dict(kappa_bar=-0.1)),
        ("max_step", dict(max_step=1.0)),
        ("integrator", dict(integrator="euler")),
        ("rel_tol", dict(rel_tol=0.0)),
    ],
)
def test_lindblad_config_validation(field, kw):
    with pytest.raises(ConfigError) as err:
        LindbladConfig(**kw)
    assert err.value.field == field


# master equation in the lab basis


def _random_density(dim, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


@settings(max_examples=15)
@given(st.integers(0, 1000), st.floats(0, 0.5))
def test_rhs_preserves_trace_and_hermiticity(seed, kappa):
    rho = _random_density(4 * 5, seed)
    d = lindblad_rhs(rho, HALF, LindbladConfig(kappa_bar=kappa), (4, 5))
    assert abs(np.trace(d)) < 1e-12
    np.testing.assert_allclose(d, d.conj().T, atol=1e-12)


def test_rhs_matches_oracle_liouvillian():
    rho = _random_density(12, 7)
    d = lindblad_rhs(rho, HALF, LindbladConfig(kappa_bar=0.3), (3, 4))
    lv = oracles.liouvillian(0.5, 0.5, 0.3, 3, 4)
    np.testing.assert_allclose(d, (lv @ rho.reshape(-1)).reshape(12, 12), atol=1e-12)


def test_vacuum_is_dark_for_loss():
    # cavity vacuum with the oscillator in an energy eigenstate of the free part
    p = DimensionlessParams(kbar=0.5, gbar=0.0, alpha=0.0, beta=0.0)
    rho = np.zeros((12, 12), dtype=complex)
    rho[0, 0] = 1.0
    d = lindblad_rhs(rho, p, LindbladConfig(kappa_bar=0.4), (3, 4))
    assert np.max(np.abs(d)) < 1e-14


def test_hamiltonian_is_hermitian():
    h = hamiltonian(UNIT, 3, 6)
    np.testing.assert_allclose(h, h.conj().T)
    np.testing.assert_allclose(h, oracles.sparse_hamiltonian(1, 1, 3, 6).toarray())


# co-moving frame solver


@pytest.fixture(scope="module")
def frame_vs_lab():
    times = [math.pi, TWO_PI]
    cfg = LindbladConfig(kappa_bar=0.2, rel_tol=1e-10, abs_tol=1e-12)
    frame = evolve_with_derivative(HALF, cfg, TWO_PI, times, cavity_cutoff=6, frame_cutoff=40)
    rho0 = product_lab_state(HALF, 6, 40)
    lab = oracles.lindblad(0.5, 0.5, 0.2, rho0, 6, 40, times, derivative=True)
    return frame, lab


def test_frame_solver_matches_lab_oracle(frame_vs_lab):
    frame, lab = frame_vs_lab
    for s, (rho, drho) in zip(frame, lab):
        assert np.max(np.abs(s.lab(40) - rho)) < 1e-6
        assert np.max(np.abs(s.lab_derivative(40) - drho)) < 1e-5


def test_frame_samples_are_valid_states(frame_vs_lab):
    for s in frame_vs_lab[0]:
        rho_c = s.reduced_cavity().data
        assert np.trace(rho_c).real == pytest.approx(1.0, abs=1e-9)
        assert np.linalg.eigvalsh(rho_c).min() > -1e-9
        assert s.truncation_deficit < 1e-6


def test_derivative_vanishes_at_start():
    s = evolve_with_derivative(HALF, LindbladConfig(kappa_bar=0.1, **RK4), 0.0, [0.0], cavity_cutoff=6, frame_cutoff=16)[0]
    assert np.max(np.abs(s.reduced_cavity_derivative())) == 0.0


def test_no_loss_reproduces_closed_form():
    s = evolve_lindblad(UNIT, LindbladConfig(kappa_bar=0.0), 2.5, [2.5], cavity_cutoff=12, frame_cutoff=24)[0]
    np.testing.assert_allclose(s.reduced_cavity().data, reduced_cavity(UNIT, 2.5, 12).data, atol=1e-8)


def test_loss_mixes_the_cavity():
    s = evolve_lindblad(UNIT, LindbladConfig(kappa_bar=0.1, **RK4), TWO_PI, [TWO_PI])[0]
    assert s.reduced_cavity().purity() < 1 - 1e-3


def test_uncoupled_photon_number_decays_exponentially():
    p = DimensionlessParams(kbar=0.0, gbar=0.3, alpha=1.0, beta=0.0)
    times = np.linspace(0.5, 3.0, 6)
    samples = evolve_lindblad(p, LindbladConfig(kappa_bar=0.2, **RK4), 3.0, times, cavity_cutoff=10, frame_cutoff=8)
    n = np.array([np.real(np.trace(np.diag(np.arange(10)) @ s.reduced_cavity().data)) for s in samples])
    assert np.all(np.diff(n) < 0)
    # loss thins the photon distribution, so the mean decays exactly even when truncated
    w = oracles.poisson(1.0, 10)
    np.testing.assert_allclose(n, np.exp(-0.2 * times) * np.dot(np.arange(10), w) / w.sum(), rtol=1e-7)


@pytest.mark.parametrize("kappa", [0.0, 0.05, 0.1, 0.2])
def test_positivity_and_trace_over_loss_rates(kappa):
    samples = evolve_lindblad(HALF, LindbladConfig(kappa_bar=kappa, **RK4), math.pi, [1.0, math.pi], cavity_cutoff=6, frame_cutoff=24)
    for s in samples:
        joint = s.density().data
        assert np.trace(joint).real == pytest.approx(1.0, abs=1e-9)
        assert np.linalg.eigvalsh(joint).min() > -1e-9


def test_frame_cutoff_too_small_raises():
    with pytest.raises(CutoffError):
        evolve_lindblad(UNIT, LindbladConfig(kappa_bar=0.1, **RK4), TWO_PI, [TWO_PI], frame_cutoff=12)


def test_thermal_oscillator_at_zero_loss_matches_mixture_oracle():
    # displaced thermal oscillator on frame levels against an incoherent sum of Fock-start oracle runs
    nbar, K = 0.2, 24
    w = (nbar / (1 + nbar)) ** np.arange(K) / (1 + nbar)
    w /= w.sum()
    p = DimensionlessParams(kbar=0.5, gbar=0.5, alpha=0.5, beta=0.0)
    s = evolve_lindblad(p, LindbladConfig(kappa_bar=0.0), math.pi, [math.pi], cavity_cutoff=6, frame_cutoff=K,
                        initial=InitialState(sigma=np.diag(w).astype(complex)))[0]
    rho_c = np.zeros((6, 6), dtype=complex)
    cav = coherent_amplitudes(0.5, 6)
    for m in range(8):
        start = np.zeros(60, dtype=complex)
        start[m] = 1.0
        h = oracles.sparse_hamiltonian(0.5, 0.5, 6, 60).astype(complex)
        from scipy.sparse.linalg import expm_multiply

        psi = expm_multiply(-1j * math.pi * h, np.kron(cav / np.linalg.norm(cav), start)).reshape(6, 60)
        rho_c += w[m] * psi @ psi.conj().T
    np.testing.assert_allclose(s.reduced_cavity().data, rho_c / np.trace(rho_c), atol=1e-6)


# mixed-state CFI


def test_cfi_mixed_zero_derivative():
    rho = reduced_cavity(UNIT, 1.0, 10).data
    assert cfi_mixed(rho, np.zeros_like(rho), 0.3).value == 0.0
    with pytest.raises(ValueError):
        cfi_mixed(rho, rho, 0.3, method="binned")


def test_cfi_mixed_grid_and_spectral_agree_on_pure_state():
    from optograv.evolution import reduced_cavity_derivative

    rho = reduced_cavity(UNIT, 5.8, 20).data
    drho = reduced_cavity_derivative(UNIT, 5.8, 20)
    grid = cfi_mixed(rho, drho, math.pi / 2).value
    spec = cfi_mixed(rho, drho, math.pi / 2, method="spectral").value
    assert grid == pytest.approx(spec, rel=1e-3)
    assert grid == pytest.approx(cfi_homodyne(UNIT, 5.8, math.pi / 2, cavity_cutoff=20).value, rel=1e-6)


def test_five_point_matches_coupled_derivative():
    cfg = LindbladConfig(kappa_bar=0.1, **RK4)
    kw = dict(cavity_cutoff=6, frame_cutoff=24)
    coupled = evolve_with_derivative(HALF, cfg, 3.0, [3.0], **kw)[0].reduced_cavity_derivative()
    fd = five_point_derivative(
        lambda g: evolve_lindblad(HALF.with_gbar(g), cfg, 3.0, [3.0], **kw)[0].reduced_cavity(), 0.5, 1e-3
    )
    np.testing.assert_allclose(fd, coupled, atol=1e-8)


def test_cfi_decreases_with_loss():
    vals = [
        cfi_trajectory(UNIT, LindbladConfig(kappa_bar=k, **RK4), [TWO_PI], math.pi / 2)[0] for k in (0.0, 0.05, 0.1)
    ]
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals[0] == pytest.approx(64 * math.pi**2, rel=1e-3)


# leaky photon model


def test_leaky_config_validation():
    with pytest.raises(ConfigError):
        LeakyConfig(gamma_bar=-1)
    with pytest.raises(ConfigError):
        LeakyConfig(env_cutoff=1)


def test_leaky_without_coupling_is_closed_evolution():
    s = evolve_leaky(UNIT, LeakyConfig(gamma_bar=0.0), 2.0, [2.0], cavity_cutoff=12, frame_cutoff=24)[0]
    np.testing.assert_allclose(s.reduced_cavity(), reduced_cavity(UNIT, 2.0, 12).data, atol=1e-8)
    assert np.max(np.abs(s.environment() - np.diag([1.0] + [0.0] * 7))) < 1e-14


def test_leaky_environment_gains_photons_and_keeps_norm():
    samples = evolve_leaky(UNIT, LeakyConfig(gamma_bar=0.1), TWO_PI, [math.pi, TWO_PI])
    occ = [np.real(np.sum(np.arange(8) * np.diag(s.environment()))) for s in samples]
    assert 0 < occ[0] < occ[1]
    for s in samples:
        assert s.norm() == pytest.approx(1.0, abs=1e-8)
        total = occ[samples.index(s)] + np.real(np.sum(np.arange(10) * np.diag(s.reduced_cavity())))
        w = oracles.poisson(1.0, 10)
        assert total == pytest.approx(np.dot(np.arange(10), w) / w.sum(), abs=1e-8)


def test_leaky_matches_tripartite_oracle():
    # cavity (x) environment (x) oscillator with the exchange coupling, assembled independently
    import scipy.sparse as sp
    from scipy.sparse.linalg import expm_multiply

    nc, ne, no, gam, t = 5, 4, 40, 0.3, 1.5
    a, e = oracles.ladder(nc), oracles.ladder(ne)
    h_co = oracles.sparse_hamiltonian(0.5, 0.5, nc, no)
    perm_h = _insert_middle(h_co, nc, no, ne)
    exch = gam * (sp.kron(sp.kron(a.T, e), sp.identity(no)) + sp.kron(sp.kron(a, e.T), sp.identity(no)))
    h = (perm_h + exch).astype(complex)
    c = coherent_amplitudes(0.5, nc)
    psi0 = np.kron(np.kron(c / np.linalg.norm(c), np.eye(ne)[0]), oracles.coherent_vector(0.5, no))
    ref = expm_multiply(-1j * t * h, psi0).reshape(nc, ne, no)
    s = evolve_leaky(HALF, LeakyConfig(gamma_bar=gam, env_cutoff=ne), t, [t], cavity_cutoff=nc, frame_cutoff=20)[0]
    got = s.lab(no)
    assert abs(np.vdot(got.ravel(), ref.ravel())) ** 2 > 1 - 1e-8


def _insert_middle(h_co, nc, no, ne):
    """Embed a cavity (x) oscillator operator into cavity (x) env (x) oscillator."""
    import scipy.sparse as sp

    coo = sp.coo_matrix(h_co)
    rows, cols, vals = [], [], []
    for r, c, v in zip(coo.row, coo.col, coo.data):
        (rn, rm), (cn, cm) = divmod(r, no), divmod(c, no)
        for k in range(ne):
            rows.append((rn * ne + k) * no + rm)
            cols.append((cn * ne + k) * no + cm)
            vals.append(v)
    d = nc * ne * no
    return sp.csr_matrix((vals, (rows, cols)), shape=(d, d))


def test_environment_cfi_quadrature_dependence():
    cfg = LeakyConfig(gamma_bar=0.1)
    best = environment_cfi_trajectory(UNIT, cfg, [TWO_PI], math.pi / 2)[0]
    worst = environment_cfi_trajectory(UNIT, cfg, [TWO_PI], 0.0)[0]
    assert best > worst >= 0
    assert best / (64 * math.pi**2) < 0.1
