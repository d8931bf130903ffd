import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from superlab import dicke


def test_ladder_operators_commutator():
    sp_, sm, sz = dicke.ladder_operators(5)
    comm = (sp_ @ sm - sm @ sp_).toarray()
    assert np.allclose(comm, 2 * sz.toarray())


def test_ladder_decay_rates():
    assert np.array_equal(dicke.ladder_decay_rates(3), [0, 3, 4, 3])


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 30), st.floats(0.0, 40.0))
def test_steady_state_is_valid_density_matrix(n, omega):
    m = dicke.DickeModel(n, omega)
    rho = m.steady_state()
    rho.check()
    assert 0.0 <= m.emission_rate(rho) <= n * (n + 2) / 4 + 1e-9


@pytest.mark.parametrize("n", [2, 6, 12])
def test_strong_drive_limit(n):
    m = dicke.DickeModel(n, 50.0 * n)
    g = m.emission_rate(m.steady_state())
    assert g == pytest.approx(dicke.dicke_emission_strong_drive(n), rel=1e-3)


def test_two_atoms_strong_drive_value():
    assert dicke.dicke_emission_strong_drive(2) == pytest.approx(4 / 3)


def test_undriven_steady_state_is_ground():
    m = dicke.DickeModel(4, 0.0)
    assert m.populations(m.steady_state())[0] == pytest.approx(1.0)


def test_size_validation():
    with pytest.raises(ValueError):
        dicke.DickeModel(0, 1.0)
    with pytest.raises(ValueError):
        dicke.DickeModel(dicke.MAX_ATOMS + 1, 1.0)
