from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from superlab import dicke, exact
from superlab import geometry as geo
from superlab.dipole import CouplingMatrices, coupling_matrices


def single_atom(omega, delta=0.0):
    return CouplingMatrices(np.zeros((1, 1)), np.ones((1, 1))), omega, delta


def two_level_excited(omega, delta, gamma=1.0):
    """Textbook steady excited-state population of a driven two-level atom."""
    return (omega**2 / 4) / (delta**2 + gamma**2 / 4 + omega**2 / 2)


@pytest.mark.parametrize("omega,delta", [(0.3, 0.0), (2.0, 0.0), (1.5, 0.7), (10.0, -2.0)])
def test_single_atom_steady_state(omega, delta):
    c, w, d = single_atom(omega, delta)
    rho = exact.steady_state_for(c, w, d)
    assert exact.emission_rate(rho, c.Gamma) == pytest.approx(two_level_excited(omega, delta), rel=1e-10)


def test_single_atom_gap_is_half_gamma():
    c, w, d = single_atom(0.0)
    L = exact.build_liouvillian(exact.build_hamiltonian(c, w, d), c.Gamma)
    assert exact.liouvillian_gap(L) == pytest.approx(0.5, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 6), st.sampled_from([0.1, 0.2, 0.5]))
def test_sum_rule_every_sector(n, a):
    rates = exact.hdis_subspace_rates(coupling_matrices(geo.chain(n, a)).Gamma)
    for m, r in rates.items():
        assert r.sum() == pytest.approx(m * comb(n, m), rel=1e-8, abs=1e-12)


def test_hdis_rates_two_atoms():
    c = coupling_matrices(geo.chain(2, 0.2))
    r = exact.hdis_subspace_rates(c.Gamma)
    g12 = c.Gamma[0, 1]
    assert np.allclose(r[1], sorted([1 - g12, 1 + g12]))
    assert np.allclose(r[2], [2.0])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.0, 20.0), st.floats(-3.0, 3.0), st.floats(0.0, np.pi))
def test_generator_preserves_trace_and_hermiticity(a, omega, delta, theta):
    arr = geo.chain(3, a, theta=theta)
    c = coupling_matrices(arr)
    L = exact.build_liouvillian(exact.build_hamiltonian(c, omega, delta, arr), c.Gamma)
    rng = np.random.default_rng(0)
    A = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = A @ A.conj().T
    rho /= np.trace(rho)
    d = L.apply(rho)
    assert abs(np.trace(d)) < 1e-10
    assert np.abs(d - d.conj().T).max() < 1e-10
    assert np.allclose(L.matrix @ rho.ravel(), d.ravel())


def test_hamiltonian_hermitian_and_two_atom_couplings():
    arr = geo.chain(2, 0.3, theta=0.5)
    c = coupling_matrices(arr)
    H = exact.build_hamiltonian(c, 1.3, 0.4, arr).toarray()
    assert np.abs(H - H.conj().T).max() < 1e-14
    # |ge> and |eg> are indices 1 and 2; their exchange element is J_01
    assert H[1, 2] == pytest.approx(c.J[0, 1])


def test_emission_rate_two_routes_agree():
    arr = geo.chain(3, 0.15, theta=0.3)
    c = coupling_matrices(arr)
    rho = exact.steady_state_for(c, 4.0, 0.5, arr)
    assert exact.emission_rate(rho, c.Gamma) == pytest.approx(exact.jump_emission_rate(rho.rho, c.Gamma), rel=1e-10)
    rho.check()


def test_steady_state_matches_long_evolution():
    arr = geo.chain(3, 0.3)
    c = coupling_matrices(arr)
    L = exact.build_liouvillian(exact.build_hamiltonian(c, 3.0, 0.0, arr), c.Gamma)
    ss = exact.steady_state(L)
    traj = exact.evolve(exact.ground_state(3), L, [0.0, 200.0])
    assert np.abs(traj[-1].rho - ss.rho).max() < 1e-7


def test_spectral_evolution_matches_integrator():
    arr = geo.chain(2, 0.2)
    c = coupling_matrices(arr)
    L = exact.build_liouvillian(exact.build_hamiltonian(c, 2.0, 0.0, arr), c.Gamma)
    spec = exact.liouvillian_spectrum(L)
    rho0 = exact.ground_state(2)
    t = [0.0, 0.7, 3.0]
    a = exact.evolve(rho0, L, t, rtol=1e-11, atol=1e-13)
    b = exact.spectral_evolution(spec, rho0, t)
    for x, y in zip(a, b):
        assert np.abs(x.rho - y).max() < 1e-8
    assert np.abs(spec.steady_state().rho - exact.steady_state(L).rho).max() < 1e-9
    assert np.all(np.diff(spec.decay_rates) >= -1e-12)


def test_spectrum_size_cap():
    c = coupling_matrices(geo.chain(7, 0.3))
    L = exact.build_liouvillian(exact.build_hamiltonian(c, 0.0), c.Gamma)
    with pytest.raises(exact.SizeError):
        exact.liouvillian_spectrum(L)


def test_size_cap():
    c = coupling_matrices(geo.chain(11, 0.3))
    with pytest.raises(exact.SizeError):
        exact.build_hamiltonian(c, 1.0)


def test_dicke_limit_needs_initial_state():
    c = CouplingMatrices.dicke(2)
    L = exact.build_liouvillian(exact.build_hamiltonian(c, 40.0), c.Gamma)
    with pytest.raises(exact.SteadyStateError):
        exact.steady_state(L)
    rho = exact.steady_state(L, rho0=exact.ground_state(2))
    assert exact.emission_rate(rho, c.Gamma) == pytest.approx(dicke.DickeModel(2, 40.0).emission_rate(
        dicke.DickeModel(2, 40.0).steady_state()), rel=1e-8)


@pytest.mark.parametrize("n,omega", [(2, 1.0), (3, 2.5), (4, 6.0)])
def test_dicke_ladder_matches_full_space_dynamics(n, omega):
    """Symmetric-ladder evolution equals the full master equation with Gamma_ij = gamma0."""
    c = CouplingMatrices.dicke(n)
    L = exact.build_liouvillian(exact.build_hamiltonian(c, omega), c.Gamma)
    t = [0.0, 0.5, 2.0, 6.0]
    full = exact.evolve(exact.ground_state(n), L, t, rtol=1e-10, atol=1e-12)
    model = dicke.DickeModel(n, omega)
    lad = model.evolve(t, rtol=1e-10, atol=1e-12)
    for f, d in zip(full, lad):
        assert exact.emission_rate(f, c.Gamma) == pytest.approx(model.emission_rate(d), abs=1e-8)
        assert exact.collective_spin(f, n)[2] == pytest.approx(model.spin(d)[2], abs=1e-8)


def test_inverted_state_emits_n_gamma():
    c = coupling_matrices(geo.chain(4, 0.2))
    assert exact.emission_rate(exact.inverted_state(4), c.Gamma) == pytest.approx(4.0)
    assert exact.emission_rate(exact.ground_state(4), c.Gamma) == 0.0


def test_collective_spin_of_ground_state():
    assert exact.collective_spin(exact.ground_state(3), 3) == pytest.approx((0.0, 0.0, -1.5))


def test_overlaps_sum_to_one_and_cluster():
    arr = geo.chain(3, 0.2)
    c = coupling_matrices(arr)
    H = exact.build_hamiltonian(c, 40.0, 0.0, arr)
    ov = exact.eigenstate_overlaps(exact.steady_state_for(c, 40.0, 0.0, arr), H)
    assert sum(o.overlap for o in ov) == pytest.approx(1.0)
    assert sum(o.multiplicity for o in ov) == 8
    with pytest.raises(ValueError):
        exact.eigenstate_overlaps(np.eye(2) / 2, np.array([[0, 1], [0, 0]]))
