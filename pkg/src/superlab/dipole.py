"""Dipole-dipole couplings from the free-space dyadic Green's tensor.

Units: gamma0 = 1, lambda0 = 1, so the resonant wavenumber is k0 = 2*pi.
With ``G = exp(ikr)/(4 pi r) [...]`` the near-field limit of
``Im d.G.d`` is ``k/(6 pi)``, hence the prefactors ``3 pi / k`` and
``6 pi / k`` below give ``Gamma_ij -> gamma0`` as ``r_ij -> 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .geometry import K0, EmitterArray, GeometryError

_MIN_KR = 1e-6


def greens_tensor(r, k: float = K0) -> np.ndarray:
    """Free-space dyadic Green's tensor at separation ``r`` (contact term dropped).

    Parameters
    ----------
    r : array_like, shape (3,)
        Separation vector in units of lambda0.
    k : float
        Wavenumber.

    Returns
    -------
    ndarray, shape (3, 3), complex
    """
    r = np.asarray(r, dtype=float).reshape(3)
    if k <= 0:
        raise ValueError("wavenumber must be positive")
    dist = np.linalg.norm(r)
    kr = k * dist
    if kr < _MIN_KR:
        raise GeometryError("coincident emitters; use Dicke backend")
    rhat = r / dist
    pref = np.exp(1j * kr) / (4.0 * np.pi * dist)
    a = 1.0 + 1j / kr - 1.0 / kr**2
    b = -1.0 - 3j / kr + 3.0 / kr**2
    return pref * (a * np.eye(3) + b * np.outer(rhat, rhat))


def _projected_kernel(sep: np.ndarray, d: np.ndarray, k: float) -> np.ndarray:
    """Vectorised ``d . G(sep) . d`` for an (..., 3) separation array."""
    dist = np.linalg.norm(sep, axis=-1)
    kr = k * dist
    if np.any(kr < _MIN_KR):
        raise GeometryError("coincident emitters; use Dicke backend")
    cos2 = (sep @ d) ** 2 / dist**2
    a = 1.0 + 1j / kr - 1.0 / kr**2
    b = -1.0 - 3j / kr + 3.0 / kr**2
    return np.exp(1j * kr) / (4.0 * np.pi * dist) * (a * (d @ d) + b * cos2)


@dataclass(frozen=True)
class CouplingMatrices:
    """Coherent (``J``) and dissipative (``Gamma``) couplings in units of gamma0.

    ``J`` has a zero diagonal (the self shift is absorbed into the detuning),
    ``Gamma`` has ``gamma0`` on the diagonal.
    """

    J: np.ndarray
    Gamma: np.ndarray
    gamma0: float = 1.0

    @property
    def n_atoms(self) -> int:
        return self.J.shape[0]

    @property
    def J_eff(self) -> float:
        return float(self.J[0, 1:].sum())

    @property
    def Gamma_eff(self) -> float:
        return float(self.Gamma[0, 1:].sum())

    @classmethod
    def dicke(cls, n: int, gamma0: float = 1.0) -> "CouplingMatrices":
        """All-to-all limit: ``Gamma_ij = gamma0`` and ``J_ij = 0``."""
        return cls(np.zeros((n, n)), np.full((n, n), gamma0), gamma0)


def coupling_matrices(array: EmitterArray, gamma0: float = 1.0, k: float = K0) -> CouplingMatrices:
    """``J_ij = -(3 pi gamma0/k) d.Re G.d`` and ``Gamma_ij = (6 pi gamma0/k) d.Im G.d``."""
    pos = array.positions
    n = len(pos)
    J = np.zeros((n, n))
    Gamma = np.eye(n) * gamma0
    if n > 1:
        iu = np.triu_indices(n, 1)
        sep = pos[iu[0]] - pos[iu[1]]
        g = _projected_kernel(sep, array.polarization, k)
        J[iu] = -3.0 * np.pi * gamma0 / k * g.real
        Gamma[iu] = 6.0 * np.pi * gamma0 / k * g.imag
        J = J + J.T
        Gamma = np.triu(Gamma, 1) + np.triu(Gamma, 1).T + np.eye(n) * gamma0
    return CouplingMatrices(J, Gamma, gamma0)


def effective_couplings(array: EmitterArray) -> tuple[float, float]:
    """Row sums of the couplings seen by atom 0, diagonal excluded."""
    c = coupling_matrices(array)
    return c.J_eff, c.Gamma_eff


def find_jeff_zeros(geometry, a_range=(0.05, 1.0), samples: int = 200, xtol: float = 1e-9) -> list[float]:
    """Zero crossings of ``a -> J_eff(a)`` located by bracketing and bisection.

    ``geometry`` is either a callable ``a -> EmitterArray`` or a callable
    ``a -> float`` returning ``J_eff`` directly (anything else a user wants to
    scan). Roots are returned in ascending order.
    """
    lo, hi = a_range
    if not 0 < lo < hi <= 2.0:
        raise ValueError("a_range must lie inside (0, 2]")
    if samples < 16:
        raise ValueError("need at least 16 samples")

    def jeff(a):
        out = geometry(a)
        if isinstance(out, EmitterArray):
            return effective_couplings(out)[0]
        return float(out)

    grid = np.linspace(lo, hi, samples)
    vals = np.array([jeff(a) for a in grid])
    roots = []
    for a0, a1, v0, v1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if v0 == 0.0:
            roots.append(float(a0))
        elif v0 * v1 < 0:
            roots.append(float(brentq(jeff, a0, a1, xtol=xtol)))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots
