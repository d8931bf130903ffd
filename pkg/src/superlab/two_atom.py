"""Closed forms for two atoms in the dressed basis ``(G, B, D, E)``.

``G = |gg>``, ``B = (|eg> + |ge>)/sqrt2``, ``D = (|eg> - |ge>)/sqrt2`` and
``E = |ee>``, where the first label is atom 0. The drive couplings ``omega_b``
and ``omega_d`` are the matrix elements ``<B|H|G>`` and ``i <D|H|G>`` of the
Hamiltonian used everywhere else in the package, i.e. with the ``Omega/2``
prefactor on the drive, so ``omega_b = Omega cos(kd/2)/sqrt2``.

The dressed frame puts the drive phases ``-kd/2`` and ``+kd/2`` on the two
atoms. The exact backend uses ``0`` and ``kd`` instead; both frames are
related by ``exp(i (kd/2) n_exc)``, which leaves all populations unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .dipole import coupling_matrices
from .geometry import K0, chain

LABELS = ("G", "B", "D", "E")


@dataclass(frozen=True)
class DressedSpec:
    omega_b: float
    omega_d: float
    gamma_b: float
    gamma_d: float
    J: float
    delta: float = 0.0

    def __post_init__(self):
        if self.gamma_b < -1e-12 or self.gamma_d < -1e-12:
            raise ValueError("collective decay rates must be non-negative")

    @property
    def gamma0(self) -> float:
        return 0.5 * (self.gamma_b + self.gamma_d)

    @property
    def half_phase(self) -> float:
        """``kd/2`` recovered from the two drive couplings."""
        return float(np.arctan2(self.omega_d, self.omega_b))

    @property
    def omega(self) -> float:
        return float(np.sqrt(2.0) * np.hypot(self.omega_b, self.omega_d))

    @classmethod
    def from_geometry(cls, a: float, omega: float, theta: float = np.pi / 2, delta=None, gamma0: float = 1.0):
        """Two atoms on the x axis at spacing ``a``; ``delta=None`` means resonant with ``B`` (``Delta = J``)."""
        c = coupling_matrices(chain(2, a, theta=theta), gamma0=gamma0)
        J, G12 = float(c.J[0, 1]), float(c.Gamma[0, 1])
        half = 0.5 * K0 * a * np.cos(theta)
        return cls(omega * np.cos(half) / np.sqrt(2.0), omega * np.sin(half) / np.sqrt(2.0),
                   gamma0 + G12, gamma0 - G12, J, J if delta is None else float(delta))

    @classmethod
    def dicke(cls, omega: float, gamma0: float = 1.0, delta: float = 0.0):
        return cls(omega / np.sqrt(2.0), 0.0, 2.0 * gamma0, 0.0, 0.0, delta)


def dressed_basis() -> np.ndarray:
    """Columns are ``G, B, D, E`` in the site basis (atom 0 most significant, local order g, e)."""
    s = 1.0 / np.sqrt(2.0)
    U = np.zeros((4, 4))
    U[0, 0] = 1.0
    U[2, 1], U[1, 1] = s, s       # |eg> is index 2, |ge> index 1
    U[2, 2], U[1, 2] = s, -s
    U[3, 3] = 1.0
    return U


def populations_in_dressed_basis(rho) -> np.ndarray:
    """``(p_G, p_B, p_D, p_E)`` of a two-atom site-basis density matrix."""
    rho = getattr(rho, "rho", rho)
    U = dressed_basis()
    return np.real(np.diag(U.T @ np.asarray(rho) @ U)).copy()


def dicke_populations(omega_b: float, gamma_b: float):
    """Steady populations for ``Gamma_D = 0`` with resonant bright-state drive."""
    g2, q = omega_b**2, (gamma_b / 2.0) ** 2
    den = (g2 + q) ** 2 + 2.0 * g2**2
    pE = g2**2 / den
    pB = g2 * (g2 + q) / den
    return 1.0 - pB - pE, pB, 0.0, pE


def freespace_populations(omega_b: float, gamma_b: float, gamma_d: float, J: float):
    """Steady populations for perpendicular drive (``omega_d = 0``) at ``Delta = J``, ``gamma_d > 0``.

    Derived symbolically from the dressed master equation and checked
    against the full solver.
    """
    g2, q = omega_b**2, (gamma_b / 2.0) ** 2
    X = 4.0 * J**2 + ((gamma_b + gamma_d) / 2.0) ** 2
    den = 4.0 * g2**2 + (2.0 * g2 + q) * X
    pE = g2**2 / den
    pB = (g2**2 + g2 * X) / den
    return 1.0 - pB - 2.0 * pE, pB, pE, pE


def two_atom_emission(populations, gamma_b: float, gamma_d: float) -> float:
    """``(Gamma_B + Gamma_D) p_E + Gamma_B p_B + Gamma_D p_D``."""
    pG, pB, pD, pE = populations
    if abs(pG + pB + pD + pE - 1.0) > 1e-8:
        raise ValueError("populations must sum to 1")
    return float((gamma_b + gamma_d) * pE + gamma_b * pB + gamma_d * pD)


def dressed_operators(spec: DressedSpec):
    """Hamiltonian and ``[(rate, L)]`` jumps written directly in the ``(G, B, D, E)`` basis."""
    G, B, D, E = range(4)
    H = np.zeros((4, 4), dtype=complex)
    H[B, B] = -spec.delta + spec.J
    H[D, D] = -spec.delta - spec.J
    H[E, E] = -2.0 * spec.delta
    H[B, G] = H[E, B] = spec.omega_b
    H[D, G] = -1j * spec.omega_d
    H[E, D] = 1j * spec.omega_d
    H = H + np.triu(H.conj().T, 1)
    LB = np.zeros((4, 4))
    LB[G, B] = LB[B, E] = 1.0
    LD = np.zeros((4, 4))
    LD[G, D], LD[D, E] = 1.0, -1.0
    return H, [(spec.gamma_b, LB), (spec.gamma_d, LD)]


def _pack(rho):
    pops = np.real(np.diag(rho))
    iu = np.triu_indices(4, 1)
    coh = rho[iu]
    return np.concatenate([pops, coh.real, coh.imag])


@dataclass
class DressedTrajectory:
    t: np.ndarray
    populations: np.ndarray   # (len(t), 4) in G, B, D, E order
    coherences: np.ndarray    # (len(t), 6) complex: GB, GD, GE, BD, BE, DE
    gamma_b: float
    gamma_d: float
    half_phase: float = 0.0

    def density_matrices(self) -> np.ndarray:
        """Dressed-basis density matrices, shape ``(len(t), 4, 4)``."""
        iu = np.triu_indices(4, 1)
        rho = np.zeros((len(self.t), 4, 4), dtype=complex)
        rho[:, range(4), range(4)] = self.populations
        rho[:, iu[0], iu[1]] = self.coherences
        rho[:, iu[1], iu[0]] = np.conj(self.coherences)
        return rho

    def site_density_matrices(self, phase_origin_first_atom: bool = False) -> np.ndarray:
        """Site-basis matrices; optionally moved to the frame with drive phases ``(0, kd)``."""
        U = dressed_basis()
        if phase_origin_first_atom:
            U = np.diag(np.exp(1j * self.half_phase * np.array([0, 1, 1, 2]))) @ U
        return np.einsum("ij,tjk,lk->til", U, self.density_matrices(), U.conj())

    @property
    def gamma_tot(self) -> np.ndarray:
        pG, pB, pD, pE = self.populations.T
        return (self.gamma_b + self.gamma_d) * pE + self.gamma_b * pB + self.gamma_d * pD


def dressed_generator(spec: DressedSpec) -> np.ndarray:
    """16 x 16 superoperator acting on the row-major vectorised dressed density matrix."""
    H, jumps = dressed_operators(spec)
    I = np.eye(4)
    Heff = H - 0.5j * sum(r * L.T @ L for r, L in jumps)
    M = -1j * np.kron(Heff, I) + 1j * np.kron(I, Heff.conj())
    for r, L in jumps:
        M += r * np.kron(L, L)
    return M


def dressed_dynamics(spec: DressedSpec, t_grid, rho0=None) -> DressedTrajectory:
    """Four populations and six coherences in the dressed basis at the requested times.

    The equations are linear with constant coefficients, so they are
    propagated exactly with a matrix exponential between grid points.
    ``rho0`` is a dressed-basis density matrix (default: ``|G><G|``).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be ascending")
    M = dressed_generator(spec)
    if rho0 is None:
        rho0 = np.zeros((4, 4), dtype=complex)
        rho0[0, 0] = 1.0
    v = np.asarray(rho0, dtype=complex).ravel()
    ys, t_prev = [], t_grid[0] if len(t_grid) else 0.0
    for t in t_grid:
        v = expm(M * (t - t_prev)) @ v
        t_prev = t
        ys.append(_pack(v.reshape(4, 4)))
    y = np.array(ys)
    return DressedTrajectory(t_grid, y[:, :4].copy(), y[:, 4:10] + 1j * y[:, 10:], spec.gamma_b, spec.gamma_d,
                             spec.half_phase)


def dressed_steady_state(spec: DressedSpec) -> np.ndarray:
    """Null vector of the dressed 16 x 16 superoperator.

    When ``D`` is fully decoupled (``gamma_d = omega_d = 0``) the steady state
    is not unique and the one with an empty dark sector is returned.
    """
    M = dressed_generator(spec)
    M[0, :] = np.eye(4).ravel()
    b = np.zeros(16, dtype=complex)
    b[0] = 1.0
    if abs(spec.gamma_d) < 1e-14 and spec.omega_d == 0.0:
        # D is decoupled; select the branch reached from |G> with the D sector empty
        D = 2
        for x in range(4):
            for idx in (4 * D + x, 4 * x + D):
                M[idx, :] = 0.0
                M[idx, idx] = 1.0
    rho = np.linalg.solve(M, b).reshape(4, 4)
    return 0.5 * (rho + rho.conj().T)
