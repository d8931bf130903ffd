"""Study-level sweeps built on the backends.

Every sweep is a list of independent grid points. Points are evaluated by
:func:`run_point` (optionally in a process pool) and gathered back in grid
order, so the CSV written by :func:`write_csv` only depends on the
:class:`SweepSpec`.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np

from . import cumulant, dicke, exact, geometry, meanfield, two_atom
from .dipole import CouplingMatrices, coupling_matrices

log = logging.getLogger(__name__)

BACKENDS = ("exact", "dicke", "meanfield", "cumulant", "two_atom")
GEOMETRIES = ("chain", "square", "ring", "fixed_length", "dicke", "custom")
CSV_HEADER = ("backend", "N", "a", "omega", "theta", "t", "gamma_tot", "sx", "sy", "sz", "converged")


class SweepError(ValueError):
    pass


@dataclass
class SweepSpec:
    """A grid of runs for one backend.

    ``a_list`` holds lattice spacings, or chain lengths when
    ``geometry == "fixed_length"``. ``t0_list = None`` requests the steady
    state. ``n_list`` counts atoms, except for ``square`` where it is the side.
    """

    backend: str
    geometry: str = "chain"
    n_list: list = field(default_factory=lambda: [2])
    a_list: list = field(default_factory=lambda: [0.2])
    theta_list: list = field(default_factory=lambda: [float(np.pi / 2)])
    omega_list: list = field(default_factory=lambda: [1.0])
    delta: float | str = 0.0
    t0_list: list | None = None
    positions_file: str | None = None
    t_max: float = 200.0
    rtol: float = 1e-8
    atol: float = 1e-10
    null_tol: float = exact.NULL_TOL
    output: str | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise SweepError(f"unknown backend {self.backend!r}; expected one of {', '.join(BACKENDS)}")
        if self.geometry not in GEOMETRIES:
            raise SweepError(f"unknown geometry {self.geometry!r}")
        for name in ("n_list", "a_list", "theta_list", "omega_list"):
            if len(getattr(self, name)) == 0:
                raise SweepError(f"{name} must be non-empty")
        if self.t0_list is not None and (len(self.t0_list) == 0 or min(self.t0_list) < 0):
            raise SweepError("t0_list must be non-empty with t0 >= 0")
        if min(self.omega_list) < 0:
            raise SweepError("drive strengths must be non-negative")
        if self.backend == "exact":
            worst = max(self.atom_count(n) for n in self.n_list)
            if worst > exact.MAX_ATOMS:
                raise SweepError(f"exact backend supports N <= {exact.MAX_ATOMS} (requested {worst})")
        if self.backend == "two_atom" and any(self.atom_count(n) != 2 for n in self.n_list):
            raise SweepError("two_atom backend requires N = 2")
        if self.backend == "dicke" and self.geometry != "dicke":
            raise SweepError("dicke backend requires geometry = dicke")
        if isinstance(self.delta, str) and self.delta != "resonant":
            raise SweepError("delta must be a number or 'resonant'")
        if self.geometry == "custom" and not self.positions_file:
            raise SweepError("custom geometry needs a positions file")

    def atom_count(self, n) -> int:
        return int(n) ** 2 if self.geometry == "square" else int(n)

    def points(self) -> list[tuple]:
        """Grid points ``(n, a, theta, omega)`` in deterministic order."""
        return list(product(self.n_list, self.a_list, self.theta_list, self.omega_list))


@dataclass(frozen=True)
class EmissionRecord:
    backend: str
    N: int
    a: float
    omega: float
    theta: float
    t: float
    gamma_tot: float
    sx: float
    sy: float
    sz: float
    converged: bool

    def check(self, tol=1e-6):
        if self.gamma_tot < -tol:
            raise ValueError(f"negative emission rate {self.gamma_tot}")
        if max(abs(self.sx), abs(self.sy), abs(self.sz)) > self.N / 2 + tol:
            raise ValueError("collective spin exceeds N/2")
        return self

    def row(self) -> list[str]:
        return [self.backend, str(self.N), _fmt(self.a), _fmt(self.omega), _fmt(self.theta), _fmt(self.t),
                _fmt(self.gamma_tot), _fmt(self.sx), _fmt(self.sy), _fmt(self.sz),
                "true" if self.converged else "false"]


def _fmt(x) -> str:
    # shortest round-trip representation
    return repr(float(x))


def build_array(spec: SweepSpec, n, a, theta):
    g = spec.geometry
    if g == "chain":
        return geometry.chain(int(n), a, theta=theta)
    if g == "square":
        return geometry.square(int(n), a, theta=theta)
    if g == "ring":
        return geometry.ring(int(n), a).with_drive_angle(theta)
    if g == "fixed_length":
        return geometry.fixed_length_chain(int(n), a, theta=theta)
    if g == "custom":
        return geometry.custom(spec.positions_file, theta=theta)
    raise SweepError(f"geometry {g!r} has no positions")


def _couplings(spec, n, a, theta):
    if spec.geometry == "dicke":
        return CouplingMatrices.dicke(int(n)), None
    arr = build_array(spec, n, a, theta)
    return coupling_matrices(arr), arr


def _exact_record(spec, N, a, omega, theta, t, rho, c, conv):
    sx, sy, sz = exact.collective_spin(rho, N)
    return EmissionRecord("exact", N, a, omega, theta, t, exact.emission_rate(rho, c.Gamma), sx, sy, sz, conv)


def run_point(spec: SweepSpec, point) -> list[EmissionRecord]:
    """Evaluate one grid point; solver failures give ``converged = False`` rows."""
    n, a, theta, omega = point
    N = spec.atom_count(n)
    times = [np.inf] if spec.t0_list is None else sorted(float(t) for t in spec.t0_list)
    nan = float("nan")

    def failed():
        return [EmissionRecord(spec.backend, N, a, omega, theta, t, nan, nan, nan, nan, False) for t in times]

    try:
        if spec.backend == "dicke":
            model = dicke.DickeModel(N, omega, 0.0 if spec.delta == "resonant" else spec.delta)
            if spec.t0_list is None:
                states = [model.steady_state(null_tol=spec.null_tol)]
            else:
                states = model.evolve([0.0] + times, rtol=spec.rtol, atol=spec.atol)[1:]
            out = []
            for t, st in zip(times, states):
                sx, sy, sz = model.spin(st)
                out.append(EmissionRecord("dicke", N, a, omega, theta, t, model.emission_rate(st), sx, sy, sz, True))
            return out

        c, arr = _couplings(spec, n, a, theta)
        phases = arr
        delta = float(c.J[0, 1]) if spec.delta == "resonant" and N > 1 else (
            0.0 if spec.delta == "resonant" else float(spec.delta))

        if spec.backend == "exact":
            H = exact.build_hamiltonian(c, omega, delta, phases)
            L = exact.build_liouvillian(H, c.Gamma)
            if spec.t0_list is None:
                rho0 = exact.ground_state(N).rho if spec.geometry == "dicke" else None
                st = exact.steady_state(L, spec.null_tol, rho0=rho0)
                return [_exact_record(spec, N, a, omega, theta, np.inf, st.rho, c, True)]
            states = exact.evolve(exact.ground_state(N), L, [0.0] + times, spec.rtol, spec.atol)[1:]
            return [_exact_record(spec, N, a, omega, theta, t, s.rho, c, True) for t, s in zip(times, states)]

        if spec.backend == "two_atom":
            dspec = two_atom.DressedSpec.from_geometry(a, omega, theta, delta=delta)
            if spec.t0_list is None:
                rho = two_atom.dressed_steady_state(dspec)
                pops = np.real(np.diag(rho))
                g = two_atom.two_atom_emission(pops / pops.sum(), dspec.gamma_b, dspec.gamma_d)
                U = np.diag(np.exp(1j * dspec.half_phase * np.array([0, 1, 1, 2]))) @ two_atom.dressed_basis()
                rho_site = U @ rho @ U.conj().T
                sx, sy, sz = exact.collective_spin(rho_site, 2)
                return [EmissionRecord("two_atom", 2, a, omega, theta, np.inf, g, sx, sy, sz, True)]
            traj = two_atom.dressed_dynamics(dspec, [0.0] + times)
            rhos = traj.site_density_matrices(phase_origin_first_atom=True)[1:]
            return [EmissionRecord("two_atom", 2, a, omega, theta, t, float(g), *exact.collective_spin(r, 2), True)
                    for t, g, r in zip(times, traj.gamma_tot[1:], rhos)]

        if spec.backend == "meanfield":
            if spec.t0_list is None:
                try:
                    s, t_end = meanfield.meanfield_steady_state(c, omega, delta, phases, t_max=spec.t_max)
                    conv = True
                except meanfield.NonConvergenceError as err:
                    s, conv = err.state, False
                states = [s]
                flags = [conv]
            else:
                traj = meanfield.evolve_meanfield(meanfield.ground_state(N), c, omega, delta,
                                                  [0.0] + times, phases, spec.rtol, spec.atol)
                states = list(traj.states[1:])
                flags = [True] * len(times)
            out = []
            for t, s, conv in zip(times, states, flags):
                S = 0.5 * s.sum(axis=0)
                g = _meanfield_emission(s, c)
                out.append(EmissionRecord("meanfield", N, a, omega, theta, t, g, *S, conv))
            return out

        if spec.backend == "cumulant":
            if spec.t0_list is None:
                g, st, conv, _ = cumulant.cumulant_steady_emission(c, omega, delta, phases, t_max=spec.t_max)
                pairs = [(np.inf, st, g, conv)]
            else:
                traj = cumulant.evolve_cumulant(cumulant.CorrelatorState.ground(N), c, omega, delta,
                                                [0.0] + times, phases)
                pairs = [(t, st, g, True) for t, st, g in zip(times, traj.states[1:], traj.gamma_tot[1:])]
            return [EmissionRecord("cumulant", N, a, omega, theta, t, g, *(0.5 * st.s.sum(axis=0)), conv)
                    for t, st, g, conv in pairs]
    except (exact.SteadyStateError, exact.IntegrationError, cumulant.CumulantBreakdownError, RuntimeError) as err:
        log.warning("grid point %s failed: %s", point, err)
        return failed()
    raise SweepError(f"backend {spec.backend!r} not handled")


def _meanfield_emission(s, c):
    """Factorised ``sum_ij Gamma_ij <s+_i s-_j>``."""
    sp = 0.5 * (s[:, 0] + 1j * s[:, 1])
    G = c.Gamma - np.diag(np.diag(c.Gamma))
    return float(np.sum(np.diag(c.Gamma) * (s[:, 2] + 1) / 2) + np.real(np.conj(sp) @ G @ sp))


def _run_point_star(args):
    return run_point(*args)


def run_sweep(spec: SweepSpec, threads: int = 1, skip: set | None = None) -> list[EmissionRecord]:
    """Evaluate every grid point not in ``skip`` (a set of point tuples)."""
    pts = [p for p in spec.points() if not skip or p not in skip]
    if threads <= 1 or len(pts) <= 1:
        chunks = [run_point(spec, p) for p in pts]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            # map preserves submission order regardless of completion order
            chunks = list(pool.map(_run_point_star, [(spec, p) for p in pts]))
    return [r for chunk in chunks for r in chunk]


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def write_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))


def read_csv(path) -> list[EmissionRecord]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        out = []
        for row in rd:
            b, N, *vals, conv = row
            out.append(EmissionRecord(b, int(N), *map(float, vals), conv == "true"))
    return out


def write_manifest(path, spec: SweepSpec, extra: dict | None = None) -> None:
    from . import __version__

    data = {"spec": asdict(spec), "version": __version__, "csv_header": list(CSV_HEADER)}
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


# ---------------------------------------------------------------------------
# analysis helpers

def refine_argmax(x, y) -> float:
    """Grid argmax refined by the vertex of a parabola through its neighbours."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least three grid points")
    i = int(np.nanargmax(y))
    if i == 0 or i == len(x) - 1:
        return float(x[i])
    x0, x1, x2 = x[i - 1:i + 2]
    y0, y1, y2 = y[i - 1:i + 2]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    B = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / den
    if A >= 0:
        return float(x1)
    return float(np.clip(-B / (2 * A), x0, x2))


def fit_powerlaw(n, values):
    """OLS fit of ``log value = slope log n + intercept``; returns ``(slope, intercept, stderr)``."""
    n = np.asarray(n, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(n) != len(v) or len(n) < 3:
        raise ValueError("need at least three (N, value) points")
    if np.any(v <= 0) or np.any(n <= 0):
        raise ValueError("power-law fit needs positive values")
    x, y = np.log(n), np.log(v)
    X = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = len(x) - 2
    s2 = resid @ resid / dof if dof > 0 else 0.0
    stderr = float(np.sqrt(s2 / np.sum((x - x.mean()) ** 2)))
    return float(coef[0]), float(coef[1]), stderr


@dataclass
class PhaseDiagram:
    a: np.ndarray
    omega: np.ndarray
    sz: np.ndarray          # <S_z>/N, shape (len(a), len(omega))
    sy: np.ndarray          # <S_y>/N
    converged: np.ndarray
    threshold: np.ndarray   # argmax over omega of <S_y>, per a
    analytic: np.ndarray    # effective-spin threshold per a


def phase_diagram(backend: str, geometry_name: str, n: int, a_list, omega_list, theta=np.pi / 2,
                  threads: int = 1, t_max: float = 200.0) -> PhaseDiagram:
    if backend not in ("exact", "meanfield"):
        raise SweepError("phase diagrams use the exact or meanfield backend")
    spec = SweepSpec(backend, geometry_name, [n], list(a_list), [theta], list(omega_list), t_max=t_max)
    recs = run_sweep(spec, threads)
    N = spec.atom_count(n)
    shape = (len(a_list), len(omega_list))
    sz = np.array([r.sz / N for r in recs]).reshape(shape)
    sy = np.array([r.sy / N for r in recs]).reshape(shape)
    conv = np.array([r.converged for r in recs]).reshape(shape)
    thr = np.array([refine_argmax(omega_list, row) for row in sy])
    analytic = []
    for a in a_list:
        c = coupling_matrices(build_array(spec, n, a, theta))
        try:
            analytic.append(meanfield.critical_drive(c.J_eff, c.Gamma_eff))
        except ValueError:
            analytic.append(np.nan)
    return PhaseDiagram(np.asarray(a_list), np.asarray(omega_list), sz, sy, conv, thr, np.array(analytic))


def dicke_threshold(n_atoms: int, omega_grid=None, refine: int = 2) -> float:
    """Drive maximising the exact steady ``<S_y>`` on the Dicke ladder."""
    if omega_grid is None:
        omega_grid = np.linspace(0.2, 1.6, 29) * n_atoms / 2
    grid = np.asarray(omega_grid, dtype=float)
    for _ in range(refine + 1):
        sy = [dicke.DickeModel(n_atoms, w).spin(dicke.DickeModel(n_atoms, w).steady_state())[1] for w in grid]
        best = refine_argmax(grid, sy)
        step = grid[1] - grid[0]
        grid = np.linspace(best - 2 * step, best + 2 * step, 9)
    return best


def meanfield_threshold(array, omega_grid, t_max=1000.0, refine: int = 1):
    """Drive maximising the mean-field steady ``<S_y>``; returns ``(omega_c, all_converged)``."""
    c = coupling_matrices(array)
    grid = np.asarray(omega_grid, dtype=float)
    ok = True
    for _ in range(refine + 1):
        sy = []
        for w in grid:
            try:
                s, _ = meanfield.meanfield_steady_state(c, w, 0.0, array, t_max=t_max)
            except meanfield.NonConvergenceError as err:
                s, ok = err.state, False
            sy.append(0.5 * s[:, 1].sum())
        best = refine_argmax(grid, sy)
        step = grid[1] - grid[0]
        grid = np.linspace(best - step, best + step, 5)
    return best, ok


def threshold_scaling(dicke_n=(4, 10, 20, 40), square_sides=(2, 6, 8, 10), a_list=(0.2, 0.4),
                      omega_grid=None) -> dict:
    """Critical drive versus atom number for the Dicke ladder and free-space squares."""
    out = {"dicke": {int(N): dicke_threshold(N) for N in dicke_n}, "meanfield": {}}
    grid = np.linspace(0.5, 5.0, 19) if omega_grid is None else omega_grid
    for a in a_list:
        out["meanfield"][float(a)] = {int(s) ** 2: meanfield_threshold(geometry.square(int(s), a), grid)
                                      for s in square_sides}
    return out


def emission_scaling(backend: str, n_list, a: float = 0.2, omega_list=(20.0,), theta=np.pi / 2,
                     geometry_name="chain", scaled_drive: bool = False, t_max: float = 200.0) -> dict:
    """Steady ``gamma_tot(N)`` per drive plus a power-law fit.

    With ``scaled_drive`` the single entry of ``omega_list`` is a prefactor
    ``x`` and each ``N`` is driven at ``x N / 2``.
    """
    if backend not in ("dicke", "cumulant", "exact"):
        raise SweepError("emission scaling uses the dicke, cumulant or exact backend")
    geom = "dicke" if backend == "dicke" else geometry_name
    series = {}
    for w in omega_list:
        rows = []
        for N in n_list:
            omega = w * N / 2 if scaled_drive else w
            spec = SweepSpec(backend, geom, [N], [a], [theta], [omega], t_max=t_max)
            rows += run_point(spec, spec.points()[0])
        good = [r for r in rows if r.converged and np.isfinite(r.gamma_tot)]
        fit = fit_powerlaw([r.N for r in good], [r.gamma_tot for r in good]) if len(good) >= 3 else None
        series[float(w)] = {"records": rows, "fit": fit}
    return series


def gap_vs_spacing(a_list, omega: float = 0.0, n: int = 2, delta: float = 0.0, theta=np.pi / 2) -> list[dict]:
    """Smallest non-zero Liouvillian decay rate per spacing, with ``tau_ss = 1/gap``."""
    rows = []
    for a in a_list:
        if n == 1:
            c = CouplingMatrices(np.zeros((1, 1)), np.ones((1, 1)))
            arr = None
        else:
            arr = geometry.chain(n, a, theta=theta)
            c = coupling_matrices(arr)
        L = exact.build_liouvillian(exact.build_hamiltonian(c, omega, delta, arr), c.Gamma)
        gap = exact.liouvillian_gap(L)
        rows.append({"a": float(a), "gap": gap, "tau_ss": 1.0 / gap})
    return rows


def finite_time_emission(n: int, a_list, t0_list, theta_list, omega: float = 40.0, delta=0.0,
                         backend: str = "exact", geometry_name: str = "chain") -> list[EmissionRecord]:
    """``gamma_tot`` at measurement times ``t0`` starting from the ground state.

    The laser is on atomic resonance by default; ``delta="resonant"`` sets
    ``Delta = J_01``, the bright-state resonance for two atoms.
    """
    spec = SweepSpec(backend, geometry_name, [n], list(a_list), list(theta_list), [omega], delta=delta,
                     t0_list=list(t0_list))
    return run_sweep(spec)


def default_threads() -> int:
    env = os.environ.get("SUPERLAB_THREADS")
    if env:
        return max(1, int(env))
    return 1
