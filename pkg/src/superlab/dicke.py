"""Collective dynamics on the symmetric Dicke ladder ``|S = N/2, m>``.

The ladder is indexed by the excitation number ``n = m + N/2`` running from
0 (all ground) to N (fully inverted), so its dimension grows only linearly in
N.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import exact
from .exact import DensityState, Liouvillian

MAX_ATOMS = 200


def ladder_operators(n_atoms: int):
    """``(S^+, S^-, S_z)`` on the ``N + 1`` dimensional ladder."""
    n = np.arange(n_atoms)
    amp = np.sqrt((n + 1.0) * (n_atoms - n))
    splus = sp.diags(amp, -1, shape=(n_atoms + 1, n_atoms + 1), format="csr", dtype=complex)
    sz = sp.diags(np.arange(n_atoms + 1) - n_atoms / 2.0, 0, format="csr", dtype=complex)
    return splus, sp.csr_matrix(splus.conj().T), sz


class DickeModel:
    """Driven Dicke model ``H = -Delta (S_z + N/2) + Omega/2 (S^+ + S^-)`` with collective decay ``gamma0``."""

    def __init__(self, n_atoms: int, omega: float, delta: float = 0.0, gamma0: float = 1.0):
        if not 1 <= n_atoms <= MAX_ATOMS:
            raise ValueError(f"Dicke backend supports 1 <= N <= {MAX_ATOMS}")
        self.n_atoms = n_atoms
        self.omega = float(omega)
        self.delta = float(delta)
        self.gamma0 = float(gamma0)
        self.splus, self.sminus, self.sz = ladder_operators(n_atoms)
        number = self.sz + n_atoms / 2.0 * sp.identity(n_atoms + 1, format="csr")
        self.H = sp.csr_matrix(-self.delta * number + 0.5 * self.omega * (self.splus + self.sminus))
        self.liouvillian = Liouvillian(self.H, [(self.gamma0, self.sminus)], n_atoms=None)

    @property
    def dim(self) -> int:
        return self.n_atoms + 1

    def ground_state(self) -> DensityState:
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        rho[0, 0] = 1.0
        return DensityState(rho, self.n_atoms)

    def steady_state(self, **kw) -> DensityState:
        rho = exact.steady_state(self.liouvillian, **kw).rho
        return DensityState(rho, self.n_atoms)

    def evolve(self, t_grid, rho0=None, **kw):
        rho0 = self.ground_state() if rho0 is None else rho0
        states = exact.evolve(rho0, self.liouvillian, t_grid, **kw)
        return [DensityState(s.rho, self.n_atoms) for s in states]

    def emission_rate(self, rho) -> float:
        """``gamma0 <S^+ S^->``."""
        rho = rho.rho if isinstance(rho, DensityState) else rho
        return float((self.gamma0 * (self.splus @ self.sminus) @ rho).trace().real)

    def spin(self, rho):
        """``(<S_x>, <S_y>, <S_z>)``."""
        rho = rho.rho if isinstance(rho, DensityState) else rho
        sp_val = complex((self.splus @ rho).trace())
        sz_val = float((self.sz @ rho).trace().real)
        return sp_val.real, sp_val.imag, sz_val

    def populations(self, rho) -> np.ndarray:
        rho = rho.rho if isinstance(rho, DensityState) else rho
        return np.real(np.diag(rho)).copy()


def dicke_emission_strong_drive(n_atoms: int, gamma0: float = 1.0) -> float:
    """Uniform ladder population limit ``gamma0 N (N + 2) / 6``."""
    return gamma0 * n_atoms * (n_atoms + 2) / 6.0


def ladder_decay_rates(n_atoms: int, gamma0: float = 1.0) -> np.ndarray:
    """Decay rate ``gamma0 n (N + 1 - n)`` of each ladder state, ``n = 0..N``."""
    n = np.arange(n_atoms + 1)
    return gamma0 * n * (n_atoms + 1 - n)
