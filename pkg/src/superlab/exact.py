"""Exact master-equation treatment for small arrays.

Basis convention: site 0 is the most significant tensor factor and each site
uses the local basis ``(|g>, |e>)``, so bit ``i`` of a basis index (counted
from the left) is 1 when atom ``i`` is excited.

Superoperators act on row-major vectorised density matrices,
``vec(A rho B) = (A kron B^T) vec(rho)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .dipole import CouplingMatrices
from .geometry import EmitterArray

log = logging.getLogger(__name__)

MAX_ATOMS = 10
MAX_ATOMS_FULL_SPECTRUM = 6
NULL_TOL = 1e-8
_DENSE_DIM = 256


class SizeError(ValueError):
    pass


class SteadyStateError(RuntimeError):
    pass


class IntegrationError(RuntimeError):
    def __init__(self, message, last_time):
        super().__init__(f"{message} (last good time t = {last_time!r})")
        self.last_time = last_time


def _check_size(n, cap=MAX_ATOMS):
    if n > cap:
        mem = 16 * 4.0**n / 2**20
        raise SizeError(
            f"N = {n} exceeds the exact-backend cap N <= {cap}; "
            f"a single dense 4^N vector would need {mem:.0f} MiB"
        )


# ---------------------------------------------------------------------------
# operators

@lru_cache(maxsize=16)
def lowering_operators(n: int) -> tuple:
    """Sparse ``sigma_i^-`` for every site of an ``n``-atom register."""
    _check_size(n)
    sm = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    ops = []
    for i in range(n):
        op = sp.kron(sp.identity(2**i), sm)
        op = sp.kron(op, sp.identity(2 ** (n - i - 1)))
        ops.append(sp.csr_matrix(op, dtype=complex))
    return tuple(ops)


def pauli_operators(n: int):
    """Sparse ``(sigma_x, sigma_y, sigma_z)`` lists for every site."""
    sx, sy, sz = [], [], []
    for sm in lowering_operators(n):
        spl = sm.conj().T
        sx.append(sp.csr_matrix(spl + sm))
        sy.append(sp.csr_matrix(-1j * (spl - sm)))
        sz.append(sp.csr_matrix(spl @ sm * 2 - sp.identity(2**n)))
    return sx, sy, sz


def excitation_numbers(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    return np.array([bin(i).count("1") for i in idx])


def _phases(phases, n):
    if phases is None:
        return np.zeros(n)
    if isinstance(phases, EmitterArray):
        return phases.phases
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (n,):
        raise ValueError(f"expected {n} drive phases, got shape {phases.shape}")
    return phases


def build_hamiltonian(couplings: CouplingMatrices, omega: float, delta: float = 0.0, phases=None) -> sp.csr_matrix:
    """``H = -Delta sum n_i + sum_{i!=j} J_ij s+_i s-_j + Omega/2 sum (e^{i k.r_i} s+_i + h.c.)``.

    ``phases`` is an :class:`EmitterArray` (its ``k . r_i`` are used), an
    explicit array of phases, or ``None`` for uniform illumination.
    """
    n = couplings.n_atoms
    _check_size(n)
    if omega < 0:
        raise ValueError("omega must be non-negative")
    phi = _phases(phases, n)
    sm = lowering_operators(n)
    dim = 2**n
    H = sp.csr_matrix((dim, dim), dtype=complex)
    if delta:
        H = H + sp.diags(-delta * excitation_numbers(n).astype(complex))
    J = couplings.J
    for i in range(n):
        for j in range(n):
            if i != j and J[i, j] != 0.0:
                H = H + J[i, j] * (sm[i].conj().T @ sm[j])
    if omega:
        for i in range(n):
            term = np.exp(1j * phi[i]) * sm[i].conj().T
            H = H + 0.5 * omega * (term + term.conj().T)
    return sp.csr_matrix(H)


def dissipative_hamiltonian(Gamma: np.ndarray) -> sp.csr_matrix:
    """``H_dis = sum_ij Gamma_ij s+_i s-_j``."""
    n = Gamma.shape[0]
    sm = lowering_operators(n)
    H = sp.csr_matrix((2**n, 2**n), dtype=complex)
    for i in range(n):
        for j in range(n):
            if Gamma[i, j] != 0.0:
                H = H + Gamma[i, j] * (sm[i].conj().T @ sm[j])
    return sp.csr_matrix(H)


def collective_jumps(Gamma: np.ndarray, tol: float = 1e-14):
    """Diagonalise ``Gamma`` into independent channels ``(rate, L_mu)``.

    ``sum_ij Gamma_ij s-_i rho s+_j == sum_mu rate_mu L_mu rho L_mu^dag``
    holds exactly; channels with ``|rate| < tol`` are dropped.
    """
    Gamma = np.asarray(Gamma, dtype=float)
    n = Gamma.shape[0]
    sm = lowering_operators(n)
    rates, vecs = np.linalg.eigh(Gamma)
    jumps = []
    for rate, v in zip(rates, vecs.T):
        if abs(rate) < tol:
            continue
        L = sum(v[i] * sm[i] for i in range(n) if v[i] != 0.0)
        jumps.append((float(rate), sp.csr_matrix(L)))
    return jumps


# ---------------------------------------------------------------------------
# Liouvillian

class Liouvillian:
    """Lindblad generator ``-i[H, rho] + sum_mu r_mu (L rho L^+ - {L^+L, rho}/2)``.

    The generator is applied in matrix form by :meth:`apply`; the explicit
    sparse superoperator is assembled lazily by :attr:`matrix`.
    """

    def __init__(self, H, jumps, n_atoms=None):
        self.H = sp.csr_matrix(H, dtype=complex)
        self.jumps = [(float(r), sp.csr_matrix(L, dtype=complex)) for r, L in jumps]
        self.hdim = self.H.shape[0]
        self.n_atoms = n_atoms
        anti = sp.csr_matrix((self.hdim, self.hdim), dtype=complex)
        for r, L in self.jumps:
            anti = anti + r * (L.conj().T @ L)
        self._heff = sp.csr_matrix(self.H - 0.5j * anti)
        self._heff_dag = sp.csr_matrix(self._heff.conj().T)
        self._jumps_dag = [sp.csr_matrix(L.conj().T) for _, L in self.jumps]
        self._matrix = None

    @property
    def dim(self) -> int:
        return self.hdim**2

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self._heff @ rho - (self._heff_dag.T @ rho.T).T)
        for (r, L), Ld in zip(self.jumps, self._jumps_dag):
            out += r * (L @ (Ld.T @ rho.T).T)
        return out

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            eye = sp.identity(self.hdim, dtype=complex, format="csr")
            M = -1j * sp.kron(self._heff, eye) + 1j * sp.kron(eye, self._heff_dag.T)
            for r, L in self.jumps:
                M = M + r * sp.kron(L, L.conj())
            self._matrix = sp.csr_matrix(M)
        return self._matrix

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def build_liouvillian(H, Gamma: np.ndarray) -> Liouvillian:
    """Master-equation generator for Hamiltonian ``H`` and decay matrix ``Gamma``."""
    Gamma = np.asarray(Gamma, dtype=float)
    n = Gamma.shape[0]
    if H.shape != (2**n, 2**n):
        raise ValueError(f"H has shape {H.shape} but Gamma describes {n} atoms (need {2**n})")
    if not np.allclose(Gamma, Gamma.T, atol=1e-14):
        raise ValueError("Gamma must be symmetric")
    return Liouvillian(H, collective_jumps(Gamma), n_atoms=n)


# ---------------------------------------------------------------------------
# states

@dataclass
class DensityState:
    rho: np.ndarray
    n_atoms: int = None

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.n_atoms is None:
            self.n_atoms = int(round(np.log2(self.rho.shape[0])))

    def check(self, herm_tol=1e-10, trace_tol=1e-10, pos_tol=1e-8):
        rho = self.rho
        if np.abs(rho - rho.conj().T).max() > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > trace_tol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -pos_tol:
            raise ValueError("density matrix has negative eigenvalues")
        return self

    def expect(self, op) -> complex:
        return complex((op @ self.rho).trace()) if sp.issparse(op) else complex(np.trace(op @ self.rho))


def ground_state(n: int) -> DensityState:
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1.0
    return DensityState(rho, n)


def inverted_state(n: int) -> DensityState:
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[-1, -1] = 1.0
    return DensityState(rho, n)


def _hermitize(rho):
    asym = np.abs(rho - rho.conj().T).max() if rho.size else 0.0
    if asym > 1e-12:
        log.debug("hermitizing snapshot, max asymmetry %.3e", asym)
    return 0.5 * (rho + rho.conj().T)


def evolve(rho0, L: Liouvillian, t_grid, rtol: float = 1e-8, atol: float = 1e-10, method: str = "DOP853"):
    """Integrate the master equation and return a :class:`DensityState` per time."""
    rho0 = rho0.rho if isinstance(rho0, DensityState) else np.asarray(rho0, dtype=complex)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be ascending and non-negative")
    d = L.hdim
    n = L.n_atoms

    def rhs(_t, y):
        return L.apply(y.reshape(d, d)).ravel()

    if t_grid[-1] == 0.0:
        return [DensityState(rho0.copy(), n) for _ in t_grid]
    sol = solve_ivp(rhs, (0.0, t_grid[-1]), rho0.ravel().astype(complex), method=method,
                    t_eval=t_grid, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"master-equation integration failed: {sol.message}",
                               float(sol.t[-1]) if sol.t.size else 0.0)
    return [DensityState(_hermitize(y.reshape(d, d)), n) for y in sol.y.T]


def _trace_vector(d):
    v = np.zeros(d * d, dtype=complex)
    v[np.arange(d) * (d + 1)] = 1.0
    return v


def _smallest_eigs(L: Liouvillian, k=2):
    """Eigenvalues of ``L`` closest to zero (dense, small systems only)."""
    ev = np.linalg.eigvals(L.dense())
    return ev[np.argsort(np.abs(ev))[:k]]


def _project_onto_null_space(L: Liouvillian, rho0, null_tol):
    if L.dim > 1024:
        raise SteadyStateError("non-unique steady state (dimension too large for projection)")
    M = L.dense()
    _, s, Vh = np.linalg.svd(M)
    right = Vh[s < null_tol * max(1.0, s[0])].conj().T
    _, s2, Vh2 = np.linalg.svd(M.conj().T)
    left = Vh2[s2 < null_tol * max(1.0, s2[0])].conj().T
    P = right @ np.linalg.solve(left.conj().T @ right, left.conj().T)
    return P @ rho0.ravel()


def _inverse_norm_estimate(lu, size, iters=12, seed=0):
    """Estimate ``||A^-1||_2`` from an LU factorisation by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = lu.solve(lu.solve(v, trans="H"))
        est = np.linalg.norm(w)
        if not np.isfinite(est) or est == 0.0:
            return np.inf
        v = w / est
    return float(np.sqrt(est))


def steady_state(L: Liouvillian, null_tol: float = NULL_TOL, rho0=None, check_unique: bool = True) -> DensityState:
    """Zero mode of ``L`` normalised to unit trace.

    The trace condition replaces the ``rho_00`` equation and the bordered
    system is solved by sparse LU. A degenerate null space raises
    :class:`SteadyStateError`, unless ``rho0`` is given: then the long-time
    limit of ``rho0`` (its spectral projection onto the null space) is
    returned instead.
    """
    d = L.hdim
    degenerate = False
    if check_unique and L.dim <= _DENSE_DIM:
        degenerate = int(np.sum(np.abs(_smallest_eigs(L, k=2)) < null_tol)) >= 2
    lu = None
    if not degenerate:
        A = L.matrix.tolil()
        A[0, :] = _trace_vector(d)
        try:
            lu = spla.splu(A.tocsc())
        except RuntimeError:
            degenerate = True
        if lu is not None and check_unique and L.dim > _DENSE_DIM:
            degenerate = _inverse_norm_estimate(lu, d * d) > 1.0 / null_tol
    if degenerate:
        if rho0 is None:
            raise SteadyStateError("non-unique steady state")
        rho0 = rho0.rho if isinstance(rho0, DensityState) else np.asarray(rho0, dtype=complex)
        rho = _project_onto_null_space(L, rho0, null_tol).reshape(d, d)
        return DensityState(_hermitize(rho / np.trace(rho)), L.n_atoms)
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    rho = _hermitize(lu.solve(b).reshape(d, d))
    rho = rho / np.trace(rho).real
    resid = np.linalg.norm(L.apply(rho))
    if not np.isfinite(resid) or resid > 1e-9:
        raise SteadyStateError(f"steady-state residual {resid:.3e} exceeds 1e-9")
    return DensityState(rho, L.n_atoms)


# ---------------------------------------------------------------------------
# spectrum

@dataclass
class LiouvillianSpectrum:
    """Eigenvalues ``lambda_n = -kappa_n + i nu_n`` sorted by ``kappa`` ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = None
    null_tol: float = NULL_TOL

    @property
    def decay_rates(self) -> np.ndarray:
        return -self.eigenvalues.real

    @property
    def zero_mode(self) -> int:
        return int(np.argmin(np.abs(self.eigenvalues)))

    @property
    def gap(self) -> float:
        """Smallest non-zero decay rate."""
        kappa = self.decay_rates
        nonzero = kappa[np.abs(self.eigenvalues) >= self.null_tol]
        return float(nonzero.min())

    @property
    def relaxation_time(self) -> float:
        return 1.0 / self.gap

    def steady_state(self) -> DensityState:
        if self.eigenvectors is None:
            raise ValueError("spectrum computed without eigenvectors")
        v = self.eigenvectors[:, self.zero_mode]
        d = int(round(np.sqrt(v.size)))
        rho = v.reshape(d, d)
        rho = _hermitize(rho / np.trace(rho))
        return DensityState(rho)


def liouvillian_spectrum(L: Liouvillian, vectors: bool = True, null_tol: float = NULL_TOL) -> LiouvillianSpectrum:
    """Full dense spectrum (``N <= 6``)."""
    if L.n_atoms is not None and L.n_atoms > MAX_ATOMS_FULL_SPECTRUM:
        raise SizeError(f"full spectrum is limited to N <= {MAX_ATOMS_FULL_SPECTRUM}; use liouvillian_gap")
    M = L.dense()
    if vectors:
        ev, vec = np.linalg.eig(M)
    else:
        ev, vec = np.linalg.eigvals(M), None
    order = np.lexsort((ev.imag, -ev.real))
    ev = ev[order]
    if vec is not None:
        vec = vec[:, order]
    if np.any(-ev.real < -1e-8):
        raise RuntimeError("Liouvillian eigenvalue with positive real part; generator is not physical")
    n_zero = int(np.sum(np.abs(ev) < null_tol))
    if n_zero != 1:
        log.warning("Liouvillian has %d eigenvalues below null_tol", n_zero)
    return LiouvillianSpectrum(ev, vec, null_tol)


def liouvillian_gap(L: Liouvillian, k: int = 6, null_tol: float = NULL_TOL) -> float:
    """Smallest non-zero decay rate via shift-invert around zero."""
    if L.dim <= _DENSE_DIM:
        return liouvillian_spectrum(L, vectors=False, null_tol=null_tol).gap
    ev = spla.eigs(L.matrix.tocsc(), k=k, sigma=1e-3, which="LM", return_eigenvectors=False, tol=1e-12)
    kappa = -ev.real[np.abs(ev) >= null_tol]
    return float(kappa.min())


def spectral_evolution(spectrum: LiouvillianSpectrum, rho0, times):
    """``rho(t) = sum_n c_n e^{lambda_n t} u_n`` with ``c`` fixed by ``rho0``."""
    rho0 = rho0.rho if isinstance(rho0, DensityState) else np.asarray(rho0)
    V = spectrum.eigenvectors
    c = np.linalg.solve(V, rho0.ravel())
    d = rho0.shape[0]
    return [(V @ (c * np.exp(spectrum.eigenvalues * t))).reshape(d, d) for t in np.atleast_1d(times)]


# ---------------------------------------------------------------------------
# observables

def emission_rate(rho, Gamma: np.ndarray) -> float:
    """Total photon emission rate ``Tr[H_dis rho]``."""
    rho = rho.rho if isinstance(rho, DensityState) else rho
    val = (dissipative_hamiltonian(np.asarray(Gamma)) @ rho).trace()
    return float(val.real)


def jump_emission_rate(rho, Gamma: np.ndarray) -> float:
    """Same rate from the jump term ``sum_ij Gamma_ij Tr[s-_j rho s+_i]``."""
    rho = rho.rho if isinstance(rho, DensityState) else rho
    n = Gamma.shape[0]
    sm = lowering_operators(n)
    total = 0.0
    for i in range(n):
        for j in range(n):
            rho_sp = (sm[i] @ rho.T).T  # rho @ s+_i, sigma^- is real
            total += Gamma[i, j] * (sm[j] @ rho_sp).trace()
    return float(np.real(total))


def collective_spin(rho, n: int):
    """``<S_x>, <S_y>, <S_z>`` with ``S_a = (1/2) sum_i sigma_a^i``."""
    rho = rho.rho if isinstance(rho, DensityState) else rho
    sx, sy, sz = pauli_operators(n)
    return tuple(0.5 * float(sum((op @ rho).trace() for op in ops).real) for ops in (sx, sy, sz))


@dataclass(frozen=True)
class Overlap:
    energy: float
    overlap: float
    multiplicity: int


def eigenstate_overlaps(rho_ss, H, cluster_tol: float = 1e-9) -> list[Overlap]:
    """Populations of ``rho_ss`` in the eigenbasis of ``H``, grouped by degenerate energy."""
    rho = rho_ss.rho if isinstance(rho_ss, DensityState) else rho_ss
    Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
    if np.abs(Hd - Hd.conj().T).max() > 1e-12:
        raise ValueError("H must be Hermitian")
    energies, vecs = np.linalg.eigh(Hd)
    pops = np.real(np.einsum("ai,ab,bi->i", vecs.conj(), rho, vecs))
    out = []
    start = 0
    for i in range(1, len(energies) + 1):
        if i == len(energies) or energies[i] - energies[i - 1] > cluster_tol:
            out.append(Overlap(float(energies[start:i].mean()), float(pops[start:i].sum()), i - start))
            start = i
    return out


def hdis_subspace_rates(Gamma: np.ndarray, n: int = None) -> dict[int, np.ndarray]:
    """Eigenvalues of ``H_dis`` in each excitation-number sector ``m = 0..N``."""
    Gamma = np.asarray(Gamma, dtype=float)
    n = Gamma.shape[0] if n is None else n
    _check_size(n)
    Hd = dissipative_hamiltonian(Gamma).tocsr()
    exc = excitation_numbers(n)
    out = {}
    for m in range(n + 1):
        idx = np.flatnonzero(exc == m)
        block = Hd[idx][:, idx].toarray()
        rates = np.linalg.eigvalsh(0.5 * (block + block.conj().T))
        if len(rates) != comb(n, m):
            raise AssertionError("sector size mismatch")
        out[m] = rates
    return out


def steady_state_for(couplings: CouplingMatrices, omega: float, delta: float = 0.0, phases=None, **kw) -> DensityState:
    """Convenience wrapper: build ``H`` and ``L`` and return the steady state."""
    H = build_hamiltonian(couplings, omega, delta, phases)
    return steady_state(build_liouvillian(H, couplings.Gamma), **kw)


__all__ = [
    "DensityState", "Liouvillian", "LiouvillianSpectrum", "Overlap", "SizeError", "SteadyStateError",
    "IntegrationError", "build_hamiltonian", "build_liouvillian", "collective_spin", "dissipative_hamiltonian",
    "eigenstate_overlaps", "emission_rate", "evolve", "ground_state", "hdis_subspace_rates", "inverted_state",
    "jump_emission_rate", "liouvillian_gap", "liouvillian_spectrum", "lowering_operators", "pauli_operators",
    "spectral_evolution", "steady_state", "steady_state_for",
]
