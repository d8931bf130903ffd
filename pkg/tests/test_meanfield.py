import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from superlab import geometry as geo
from superlab import meanfield as mf
from superlab.dipole import CouplingMatrices, coupling_matrices, effective_couplings


def numeric_argmax_sy(J, G, g0=1.0):
    """Maximise the linearised s^y over Omega using a complex-step derivative."""
    h = 1e-30

    def dsy(w):
        return mf.linearized_steady_state(J, G, w + 1j * h, g0)[1].imag / h

    hi = 1.0
    while dsy(hi) > 0:
        hi *= 2.0
    return brentq(dsy, 1e-12, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


@settings(max_examples=100)
@given(st.floats(-5, 5), st.floats(-0.95, 10))
def test_critical_drive_is_argmax_of_linear_response(J, G):
    assert mf.critical_drive(J, G) == pytest.approx(numeric_argmax_sy(J, G), rel=1e-9)


@given(st.floats(-3, 3), st.floats(-0.9, 5), st.floats(0.1, 10))
def test_critical_drive_scales_with_gamma(J, G, c):
    assert mf.critical_drive(c * J, c * G, c) == pytest.approx(c * mf.critical_drive(J, G), rel=1e-12)


def test_critical_drive_rejects_nonpositive_decay():
    with pytest.raises(ValueError):
        mf.critical_drive(0.3, -1.0)


def test_critical_drive_dicke_like_limit():
    # J = 0 and Gamma_eff = 0 is a single driven atom: Omega_c = gamma0/sqrt2
    assert mf.critical_drive(0.0, 0.0) == pytest.approx(1 / np.sqrt(2))


@pytest.mark.parametrize("J,G", [(0.5, 0.3), (-1.2, 2.0), (0.0, 0.0)])
def test_fixed_point_agrees_with_linear_response_at_weak_drive(J, G):
    w = 1e-3
    s = mf.effective_fixed_point(J, G, w)
    lin = mf.linearized_steady_state(J, G, w)
    assert s[0] == pytest.approx(lin[0], rel=1e-4, abs=1e-12)
    assert s[1] == pytest.approx(lin[1], rel=1e-4)
    assert np.abs(mf.effective_rhs(s, J, G, w)).max() < 1e-10


def test_ring_reduces_to_effective_spin():
    arr = geo.ring(8, 0.3)
    c = coupling_matrices(arr)
    J_eff, G_eff = effective_couplings(arr)
    s0 = np.array([0.1, 0.2, -0.9])
    t = np.linspace(0, 10, 11)
    full = mf.evolve_meanfield(np.tile(s0, (8, 1)), c, 1.7, 0.0, t, arr, rtol=1e-11, atol=1e-13)
    single = mf.evolve_effective(s0, J_eff, G_eff, 1.7, t, rtol=1e-11, atol=1e-13)
    assert np.abs(full.states - single[:, None, :]).max() < 1e-8


def test_single_atom_meanfield_is_exact_bloch():
    c = CouplingMatrices(np.zeros((1, 1)), np.ones((1, 1)))
    s, _ = mf.meanfield_steady_state(c, 2.0, 0.5)
    w, d = 2.0, 0.5
    pe = (w**2 / 4) / (d**2 + 0.25 + w**2 / 2)
    assert (s[0, 2] + 1) / 2 == pytest.approx(pe, rel=1e-8)


def test_meanfield_steady_state_reports_nonconvergence():
    arr = geo.chain(3, 0.2)
    c = coupling_matrices(arr)
    with pytest.raises(mf.NonConvergenceError) as err:
        mf.meanfield_steady_state(c, 2.0, 0.0, arr, t_max=0.5, window=0.5)
    assert err.value.state.shape == (3, 3)


def test_dicke_meanfield_branches_meet_at_threshold():
    N = 10
    below = mf.dicke_meanfield(N, N / 2 - 1e-9)
    above = mf.dicke_meanfield(N, N / 2 + 1e-9)
    assert below["omega_c"] == 5.0
    assert below["sy"] == pytest.approx(0.5, rel=1e-6) and above["sy"] == pytest.approx(0.5, rel=1e-6)
    with pytest.raises(ValueError):
        mf.dicke_meanfield(N, -1.0)


@pytest.mark.parametrize("omega", [1.0, 3.0])
def test_dicke_meanfield_branch_is_the_collective_fixed_point(omega):
    N = 10
    sol = mf.dicke_meanfield(N, omega)
    s = np.array([0.0, 2 * N * sol["sy"], 2 * N * sol["sz"]])
    assert np.abs(mf.dicke_meanfield_rhs(s, omega)).max() < 1e-12
