"""First-order (mean-field) dynamics of driven dipole-coupled spins.

State arrays have shape ``(N, 3)`` holding ``(s^x, s^y, s^z)`` per atom, the
Pauli expectation values. The drive enters as ``-Omega sin(k.r) s^z`` in
``ds^x/dt`` and ``-Omega cos(k.r) s^z`` in ``ds^y/dt``; a detuning Delta adds
the precession ``(+Delta s^y, -Delta s^x)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import fsolve

from .dipole import CouplingMatrices


class NonConvergenceError(RuntimeError):
    def __init__(self, message, derivative_norm, state=None):
        super().__init__(f"{message} (derivative norm {derivative_norm:.3e})")
        self.derivative_norm = derivative_norm
        self.state = state


def _drive_terms(phases, n):
    phi = np.zeros(n) if phases is None else np.asarray(getattr(phases, "phases", phases), dtype=float)
    return np.sin(phi), np.cos(phi)


def meanfield_rhs(state, couplings: CouplingMatrices, omega: float, delta: float = 0.0, phases=None) -> np.ndarray:
    """Time derivative of the ``(N, 3)`` mean-field state."""
    s = np.asarray(state, dtype=float).reshape(-1, 3)
    sx, sy, sz = s.T
    J = couplings.J
    G = couplings.Gamma - np.diag(np.diag(couplings.Gamma))
    g0 = np.diag(couplings.Gamma)
    sin_p, cos_p = _drive_terms(phases, len(s))
    Jx, Jy = J @ sx, J @ sy
    Gx, Gy = G @ sx, G @ sy
    dx = Jy * sz - 0.5 * g0 * sx + 0.5 * Gx * sz - omega * sin_p * sz + delta * sy
    dy = -Jx * sz - 0.5 * g0 * sy + 0.5 * Gy * sz - omega * cos_p * sz - delta * sx
    dz = (-(sx * Jy - Jx * sy) - g0 * (1.0 + sz) - 0.5 * (sx * Gx + sy * Gy)
          + omega * sin_p * sx + omega * cos_p * sy)
    return np.stack([dx, dy, dz], axis=1)


def ground_state(n: int, perturbation: float = 1e-6) -> np.ndarray:
    """All atoms down, with a small ``s^y`` kick to leave the unstable manifold."""
    s = np.zeros((n, 3))
    s[:, 2] = -1.0
    s[:, 1] = perturbation
    return s


@dataclass
class MeanFieldTrajectory:
    t: np.ndarray
    states: np.ndarray  # (len(t), N, 3)
    derivative_norm: float

    @property
    def collective_spin(self) -> np.ndarray:
        """``<S_alpha> = (1/2) sum_k s_k^alpha`` for every time, shape ``(len(t), 3)``."""
        return 0.5 * self.states.sum(axis=1)


def evolve_meanfield(state0, couplings, omega, delta=0.0, t_grid=(0.0, 100.0), phases=None,
                     rtol=1e-8, atol=1e-10) -> MeanFieldTrajectory:
    s0 = np.asarray(state0, dtype=float)
    n = s0.shape[0]
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be ascending")

    def rhs(_t, y):
        return meanfield_rhs(y.reshape(n, 3), couplings, omega, delta, phases).ravel()

    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), s0.ravel(), method="DOP853", t_eval=t_grid,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"mean-field integration failed: {sol.message}")
    states = sol.y.T.reshape(-1, n, 3)
    dnorm = float(np.abs(rhs(0.0, states[-1].ravel())).max())
    return MeanFieldTrajectory(sol.t, states, dnorm)


def meanfield_steady_state(couplings, omega, delta=0.0, phases=None, state0=None, t_max=200.0,
                           window=5.0, tol=1e-9, rtol=1e-11, atol=1e-13):
    """Integrate until the derivative stays below ``tol`` for a full ``window``.

    Tolerances are tighter than for plain trajectories because integrator
    jitter around the fixed point otherwise keeps the derivative near 1e-8.
    Returns ``(state, t_reached)``. Raises :class:`NonConvergenceError` when
    no certified steady state is reached by ``t_max`` (limit cycles exist);
    the error carries the final state so callers can time-average instead.
    """
    n = couplings.n_atoms
    s = ground_state(n) if state0 is None else np.asarray(state0, dtype=float)
    t = 0.0
    best = np.inf
    while t < t_max - 1e-12:
        grid = np.linspace(t, min(t + window, t_max), 26)
        traj = evolve_meanfield(s, couplings, omega, delta, grid, phases, rtol, atol)
        norms = [np.abs(meanfield_rhs(x, couplings, omega, delta, phases)).max() for x in traj.states]
        s = traj.states[-1]
        t = grid[-1]
        best = max(norms)
        if best < tol:
            return s, t
    raise NonConvergenceError("mean-field did not reach a steady state", best, s)


# ---------------------------------------------------------------------------
# effective single spin

def effective_rhs(s, J_eff: float, Gamma_eff: float, omega: float, gamma0: float = 1.0) -> np.ndarray:
    """Single spin in the mean field of a periodic array."""
    sx, sy, sz = s
    damp = 0.5 * (gamma0 - Gamma_eff * sz)
    return np.array([
        J_eff * sy * sz - damp * sx,
        -J_eff * sx * sz - damp * sy - omega * sz,
        -gamma0 * (1.0 + sz) - 0.5 * Gamma_eff * (sx**2 + sy**2) + omega * sy,
    ])


def evolve_effective(s0, J_eff, Gamma_eff, omega, t_grid, gamma0=1.0, rtol=1e-10, atol=1e-12):
    t_grid = np.asarray(t_grid, dtype=float)
    sol = solve_ivp(lambda _t, y: effective_rhs(y, J_eff, Gamma_eff, omega, gamma0), (t_grid[0], t_grid[-1]),
                    np.asarray(s0, dtype=float), method="DOP853", t_eval=t_grid, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y.T


def effective_fixed_point(J_eff, Gamma_eff, omega, gamma0=1.0, guess=None, tol=1e-10) -> np.ndarray:
    """Root of the effective-spin equations, seeded from the linearised solution."""
    if guess is None:
        dx, dy, dz = linearized_steady_state(J_eff, Gamma_eff, omega, gamma0)
        guess = np.array([dx, dy, -1.0 + dz])
    root, info, ier, msg = fsolve(effective_rhs, guess, args=(J_eff, Gamma_eff, omega, gamma0),
                                  full_output=True, xtol=1e-13)
    if ier != 1 or np.abs(effective_rhs(root, J_eff, Gamma_eff, omega, gamma0)).max() > tol:
        raise NonConvergenceError(f"effective fixed point not found: {msg}",
                                  float(np.abs(effective_rhs(root, J_eff, Gamma_eff, omega, gamma0)).max()))
    return root


def linearized_steady_state(J_eff, Gamma_eff, omega, gamma0=1.0):
    """Steady deviations ``(ds^x, ds^y, ds^z)`` from the fully polarised state."""
    g, G, J, W = gamma0, Gamma_eff, J_eff, omega
    den = (g + G) * (g * (g + G) + 2 * W**2) + 4 * g * J**2
    if den == 0:
        raise ZeroDivisionError("vanishing denominator (Gamma_eff <= -gamma0?)")
    return (-4 * g * J * W / den, 2 * g * W * (g + G) / den, 2 * W**2 * (g + G) / den)


def critical_drive(J_eff, Gamma_eff, gamma0=1.0) -> float:
    """Drive at which the linearised ``s^y`` is maximal."""
    if gamma0 + Gamma_eff <= 0:
        raise ValueError("effective decay non-positive (gamma0 + Gamma_eff <= 0)")
    return float(np.sqrt(gamma0) * np.sqrt(4 * J_eff**2 + (gamma0 + Gamma_eff) ** 2)
                 / (np.sqrt(2.0) * np.sqrt(gamma0 + Gamma_eff)))


# ---------------------------------------------------------------------------
# Dicke limit

def dicke_meanfield_rhs(s, omega, gamma=1.0):
    """Collective Bloch equations for ``s = sum_k <sigma_k>`` (``|s| = N``)."""
    sx, sy, sz = s
    return np.array([
        0.5 * gamma * sz * sx,
        0.5 * gamma * sz * sy - omega * sz,
        -0.5 * gamma * (sx**2 + sy**2) + omega * sy,
    ])


def dicke_meanfield(n_atoms: int, omega: float, gamma: float = 1.0) -> dict:
    """Stable Dicke mean-field solution as ``<S_alpha>/N`` plus the threshold ``N gamma / 2``.

    Below threshold the collective spin sits at ``<S_y> = Omega/gamma`` and
    ``<S_z> = -(N/2) sqrt(1 - (2 Omega / N gamma)^2)``; above it
    ``<S_y> = N^2 gamma / (4 Omega)`` and ``<S_z> = 0``. Both branches meet
    at ``<S_y> = N/2``.
    """
    if omega < 0:
        raise ValueError("omega must be non-negative")
    N = n_atoms
    omega_c = N * gamma / 2.0
    if omega <= omega_c:
        sy = omega / gamma
        sz = -0.5 * N * np.sqrt(max(0.0, 1.0 - (omega / omega_c) ** 2))
    else:
        sy = N**2 * gamma / (4.0 * omega)
        sz = 0.0
    return {"sx": 0.0, "sy": sy / N, "sz": sz / N, "omega_c": omega_c}
