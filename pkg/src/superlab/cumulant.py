"""Second-order cumulant expansion.

The equations of motion are not hand-written. For every one- and two-point
Pauli product the Heisenberg-picture generator is evaluated exactly on a
one-, two- or three-site template register, and the result is expanded in
Pauli strings. This produces a term table

    (target, source, coefficient, pattern)

where ``source`` names the coupling that multiplies the term (local decay,
detuning, drive quadratures, or ``J``/``Gamma`` between two sites) and
``pattern`` is the Pauli string (0 = identity, 1..3 = x, y, z) on the
template sites. Three-site moments are closed with

    <ABC> = <A><BC> + <B><AC> + <C><AB> - 2 <A><B><C>,

which also holds exactly whenever one of the operators is the identity, so
identities are carried as component 0 throughout. For N = 2 no three-site
terms survive and the hierarchy is exact.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.integrate import solve_ivp

from .dipole import CouplingMatrices

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = (_I, _X, _Y, _Z)
# local basis (|e>, |g>) so that Z = |e><e| - |g><g|
_SM = np.array([[0, 0], [1, 0]], dtype=complex)
_SP = _SM.conj().T

LOCAL_SOURCES = ("gamma", "delta", "cos", "sin")
PAIR_SOURCES = ("J", "G")


class CumulantBreakdownError(RuntimeError):
    def __init__(self, time, value):
        super().__init__(f"cumulant closure breakdown at t = {time!r} (|value| = {value:.4g})")
        self.time = time
        self.value = value


# ---------------------------------------------------------------------------
# term-table generation

def _site_op(op, site, n):
    out = np.array([[1.0 + 0j]])
    for s in range(n):
        out = np.kron(out, op if s == site else _I)
    return out


def _string(pattern):
    out = np.array([[1.0 + 0j]])
    for p in pattern:
        out = np.kron(out, _PAULI[p])
    return out


def _heisenberg(O, source, sites, n):
    """Adjoint generator of one unit-strength coupling acting on ``O``."""
    comm = lambda H: 1j * (H @ O - O @ H)
    if source == "gamma":
        sm = _site_op(_SM, sites[0], n)
        sp = sm.conj().T
        return sp @ O @ sm - 0.5 * (sp @ sm @ O + O @ sp @ sm)
    if source == "delta":
        sm = _site_op(_SM, sites[0], n)
        return comm(-(sm.conj().T @ sm))
    if source == "cos":
        return comm(0.5 * _site_op(_X, sites[0], n))
    if source == "sin":
        return comm(-0.5 * _site_op(_Y, sites[0], n))
    a, b = sites
    sma, smb = _site_op(_SM, a, n), _site_op(_SM, b, n)
    spa, spb = sma.conj().T, smb.conj().T
    if source == "J":
        return comm(spa @ smb + spb @ sma)
    if source == "G":
        out = np.zeros_like(O)
        for (smi, spi), (smj, spj) in (((sma, spa), (smb, spb)), ((smb, spb), (sma, spa))):
            out += 0.5 * (2 * spj @ O @ smi - O @ spi @ smj - spi @ smj @ O)
        return out
    raise ValueError(source)


def _expand(R, n):
    """Real Pauli-string coefficients of a Hermitian operator on ``n`` sites."""
    out = {}
    for pattern in product(range(4), repeat=n):
        c = np.trace(_string(pattern) @ R) / 2**n
        if abs(c.imag) > 1e-12:
            raise AssertionError("generator produced a non-Hermitian result")
        if abs(c.real) > 1e-13:
            out[pattern] = float(np.round(c.real, 12))
    return out


@lru_cache(maxsize=None)
def one_point_table():
    """``{alpha: [(source, where, coef, pattern)]}`` for ``d<sigma_k^alpha>/dt``.

    ``where`` is ``"k"`` for local sources (pattern on site k) or ``"ki"`` for
    a pair source between k and a partner i (pattern on (k, i)).
    """
    table = {}
    for alpha in (1, 2, 3):
        rows = []
        for src in LOCAL_SOURCES:
            R = _heisenberg(_PAULI[alpha], src, (0,), 1)
            rows += [(src, "k", c, pat) for pat, c in _expand(R, 1).items()]
        O = _string((alpha, 0))
        for src in PAIR_SOURCES:
            R = _heisenberg(O, src, (0, 1), 2)
            rows += [(src, "ki", c, pat) for pat, c in _expand(R, 2).items()]
        table[alpha] = rows
    return table


@lru_cache(maxsize=None)
def two_point_table():
    """``{(alpha, beta): rows}`` for ``d<sigma_k^alpha sigma_l^beta>/dt``.

    ``where`` is one of ``"k"``, ``"l"`` (local), ``"kl"`` (pair k-l, pattern on
    (k, l)), ``"kj"`` or ``"lj"`` (pair with a third atom j, pattern on
    (k, l, j)).
    """
    table = {}
    for alpha, beta in product((1, 2, 3), repeat=2):
        rows = []
        O2 = _string((alpha, beta))
        for src in LOCAL_SOURCES:
            for where, site in (("k", 0), ("l", 1)):
                R = _heisenberg(O2, src, (site,), 2)
                rows += [(src, where, c, pat) for pat, c in _expand(R, 2).items()]
        for src in PAIR_SOURCES:
            R = _heisenberg(O2, src, (0, 1), 2)
            rows += [(src, "kl", c, pat) for pat, c in _expand(R, 2).items()]
        O3 = _string((alpha, beta, 0))
        for src in PAIR_SOURCES:
            for where, sites in (("kj", (0, 2)), ("lj", (1, 2))):
                R = _heisenberg(O3, src, sites, 3)
                rows += [(src, where, c, pat) for pat, c in _expand(R, 3).items()]
        table[(alpha, beta)] = rows
    return table


# ---------------------------------------------------------------------------
# state handling

@dataclass
class CorrelatorState:
    """One-point ``s[k, a]`` and two-point ``c[k, l, a, b]`` Pauli expectations.

    Components are indexed ``0, 1, 2 = x, y, z``. ``c`` is stored in full with
    ``c[k, l, a, b] == c[l, k, b, a]`` and zero diagonal blocks; only the
    ``k < l`` entries are independent.
    """

    s: np.ndarray
    c: np.ndarray

    @property
    def n_atoms(self) -> int:
        return self.s.shape[0]

    @classmethod
    def product(cls, s) -> "CorrelatorState":
        s = np.array(s, dtype=float)
        c = np.einsum("ka,lb->klab", s, s)
        n = len(s)
        c[np.arange(n), np.arange(n)] = 0.0
        return cls(s, c)

    @classmethod
    def ground(cls, n: int) -> "CorrelatorState":
        s = np.zeros((n, 3))
        s[:, 2] = -1.0
        return cls.product(s)

    @classmethod
    def inverted(cls, n: int) -> "CorrelatorState":
        s = np.zeros((n, 3))
        s[:, 2] = 1.0
        return cls.product(s)

    def pack(self) -> np.ndarray:
        iu = np.triu_indices(self.n_atoms, 1)
        return np.concatenate([self.s.ravel(), self.c[iu].ravel()])

    @classmethod
    def unpack(cls, y, n: int) -> "CorrelatorState":
        s = y[: 3 * n].reshape(n, 3)
        iu = np.triu_indices(n, 1)
        upper = y[3 * n:].reshape(-1, 3, 3)
        c = np.zeros((n, n, 3, 3))
        c[iu] = upper
        c[iu[1], iu[0]] = upper.transpose(0, 2, 1)
        return cls(s.copy(), c)

    def max_abs(self) -> float:
        return float(max(np.abs(self.s).max(), np.abs(self.c).max() if self.c.size else 0.0))

    def connected(self) -> np.ndarray:
        """Connected correlations ``c - s s`` (diagonal blocks zero)."""
        out = self.c - np.einsum("ka,lb->klab", self.s, self.s)
        n = self.n_atoms
        out[np.arange(n), np.arange(n)] = 0.0
        return out


def _extended(state: CorrelatorState):
    """Moment tables with component 0 standing for the identity."""
    n = state.n_atoms
    S4 = np.ones((n, 4))
    S4[:, 1:] = state.s
    C4 = np.zeros((n, n, 4, 4))
    C4[:, :, 0, 0] = 1.0
    C4[:, :, 1:, 0] = state.s[:, None, :]
    C4[:, :, 0, 1:] = state.s[None, :, :]
    C4[:, :, 1:, 1:] = state.c
    C4[np.arange(n), np.arange(n)] = 0.0
    return S4, C4


def _three_sum(W, S4, C4, p, q, r):
    """``F[k, l] = sum_{j != k, l} W[k, j] <p_k q_l r_j>`` under the closure."""
    Wr = W @ S4[:, r]
    t1 = S4[:, p][:, None] * (W @ C4[:, :, q, r].T)
    t2 = S4[:, q][None, :] * np.einsum("kj,kj->k", W, C4[:, :, p, r])[:, None]
    t3 = C4[:, :, p, q] * Wr[:, None]
    t4 = -2.0 * S4[:, p][:, None] * S4[:, q][None, :] * Wr[:, None]
    # remove the j = l term
    diag_qr = C4[np.arange(len(S4)), np.arange(len(S4)), q, r]
    sub = W * (S4[:, p][:, None] * diag_qr[None, :] + S4[:, q][None, :] * C4[:, :, p, r]
               + S4[:, r][None, :] * C4[:, :, p, q]
               - 2.0 * S4[:, p][:, None] * S4[:, q][None, :] * S4[:, r][None, :])
    return t1 + t2 + t3 + t4 - sub


class CumulantModel:
    """Right-hand side of the second-order cumulant equations for fixed parameters."""

    def __init__(self, couplings: CouplingMatrices, omega: float, delta: float = 0.0, phases=None):
        self.couplings = couplings
        self.n = n = couplings.n_atoms
        phi = np.zeros(n) if phases is None else np.asarray(getattr(phases, "phases", phases), dtype=float)
        self.omega, self.delta = float(omega), float(delta)
        self.local = {
            "gamma": np.diag(couplings.Gamma).astype(float),
            "delta": np.full(n, self.delta),
            "cos": self.omega * np.cos(phi),
            "sin": self.omega * np.sin(phi),
        }
        G = couplings.Gamma.astype(float).copy()
        np.fill_diagonal(G, 0.0)
        J = couplings.J.astype(float).copy()
        np.fill_diagonal(J, 0.0)
        self.pair = {"J": J, "G": G}
        self._one = one_point_table()
        self._two = two_point_table()
        # group three-site terms by (source, where, pattern) to evaluate each sum once
        self._three = defaultdict(list)
        for (a, b), rows in self._two.items():
            for src, where, coef, pat in rows:
                if where in ("kj", "lj"):
                    self._three[(src, where, pat)].append((a, b, coef))

    def one_point_rhs(self, state: CorrelatorState) -> np.ndarray:
        S4, C4 = _extended(state)
        ds = np.zeros((self.n, 3))
        for alpha, rows in self._one.items():
            acc = np.zeros(self.n)
            for src, where, coef, pat in rows:
                if where == "k":
                    acc += coef * self.local[src] * S4[:, pat[0]]
                else:
                    acc += coef * (self.pair[src] * C4[:, :, pat[0], pat[1]]).sum(axis=1)
            ds[:, alpha - 1] = acc
        return ds

    def two_point_rhs(self, state: CorrelatorState) -> np.ndarray:
        S4, C4 = _extended(state)
        n = self.n
        dc = np.zeros((n, n, 3, 3))
        for (alpha, beta), rows in self._two.items():
            acc = np.zeros((n, n))
            for src, where, coef, pat in rows:
                if where == "k":
                    acc += coef * self.local[src][:, None] * C4[:, :, pat[0], pat[1]]
                elif where == "l":
                    acc += coef * self.local[src][None, :] * C4[:, :, pat[0], pat[1]]
                elif where == "kl":
                    acc += coef * self.pair[src] * C4[:, :, pat[0], pat[1]]
            dc[:, :, alpha - 1, beta - 1] = acc
        if n > 2:
            for (src, where, pat), targets in self._three.items():
                p, q, r = pat
                W = self.pair[src]
                F = _three_sum(W, S4, C4, p, q, r) if where == "kj" else _three_sum(W, S4, C4, q, p, r).T
                for a, b, coef in targets:
                    dc[:, :, a - 1, b - 1] += coef * F
        dc[np.arange(n), np.arange(n)] = 0.0
        return dc

    def rhs(self, state: CorrelatorState) -> CorrelatorState:
        return CorrelatorState(self.one_point_rhs(state), self.two_point_rhs(state))

    def packed_rhs(self, _t, y):
        st = CorrelatorState.unpack(y, self.n)
        return self.rhs(st).pack()


def factorized_rhs(s, couplings, omega, delta=0.0, phases=None) -> np.ndarray:
    """One-point derivative with every two-point moment replaced by ``<A><B>``.

    This is the cumulant hierarchy with connected correlations forced to zero
    at every instant, which must coincide with the mean-field equations.
    """
    model = CumulantModel(couplings, omega, delta, phases)
    return model.one_point_rhs(CorrelatorState.product(s))


def cumulant_rhs(state: CorrelatorState, couplings, omega, delta=0.0, phases=None) -> CorrelatorState:
    return CumulantModel(couplings, omega, delta, phases).rhs(state)


def emission_rate_cumulant(state: CorrelatorState, couplings: CouplingMatrices) -> float:
    """``gamma0 sum_k (s_k^z + 1)/2 + sum_{k != l} Gamma_kl (<xx> + <yy>)/4``."""
    g0 = np.diag(couplings.Gamma)
    G = couplings.Gamma - np.diag(g0)
    first = float(np.sum(g0 * (state.s[:, 2] + 1.0) / 2.0))
    second = float(np.sum(G * (state.c[:, :, 0, 0] + state.c[:, :, 1, 1])) / 4.0)
    return first + second


@dataclass
class CumulantTrajectory:
    t: np.ndarray
    states: list
    gamma_tot: np.ndarray

    @property
    def collective_spin(self) -> np.ndarray:
        return np.array([0.5 * st.s.sum(axis=0) for st in self.states])


def evolve_cumulant(state0: CorrelatorState, couplings, omega, delta=0.0, t_grid=(0.0, 100.0), phases=None,
                    rtol=1e-7, atol=1e-9, method="DOP853", blowup=1.0 + 1e-3) -> CumulantTrajectory:
    """Integrate the cumulant hierarchy, checking that every moment stays in [-1, 1]."""
    model = CumulantModel(couplings, omega, delta, phases)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be ascending")
    n = model.n
    y0 = state0.pack()
    if t_grid[-1] == t_grid[0]:
        states = [CorrelatorState.unpack(y0, n) for _ in t_grid]
    else:
        sol = solve_ivp(model.packed_rhs, (t_grid[0], t_grid[-1]), y0, method=method, t_eval=t_grid,
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise CumulantBreakdownError(float(sol.t[-1]) if sol.t.size else t_grid[0], np.nan)
        states = [CorrelatorState.unpack(y, n) for y in sol.y.T]
    for t, st in zip(t_grid, states):
        m = st.max_abs()
        if m > blowup:
            raise CumulantBreakdownError(float(t), m)
    g = np.array([emission_rate_cumulant(st, couplings) for st in states])
    return CumulantTrajectory(t_grid, states, g)


def cumulant_steady_emission(couplings, omega, delta=0.0, phases=None, t_max=200.0, window=5.0, rel_tol=1e-8,
                             rtol=1e-7, atol=1e-9, state0=None):
    """Evolve until ``gamma_tot`` changes by less than ``rel_tol`` over ``window``.

    Returns ``(gamma_tot, state, converged, t_reached)``. Hitting ``t_max``
    is not an error: the final value is returned with ``converged=False``.
    """
    n = couplings.n_atoms
    state = CorrelatorState.ground(n) if state0 is None else state0
    model_args = (couplings, omega, delta)
    t = 0.0
    g = emission_rate_cumulant(state, couplings)
    while t < t_max - 1e-12:
        grid = np.linspace(t, min(t + window, t_max), 11)
        traj = evolve_cumulant(state, *model_args, t_grid=grid, phases=phases, rtol=rtol, atol=atol)
        state = traj.states[-1]
        t = grid[-1]
        g = float(traj.gamma_tot[-1])
        spread = traj.gamma_tot.max() - traj.gamma_tot.min()
        if spread <= rel_tol * max(abs(g), 1e-30):
            return g, state, True, t
    return g, state, False, t
