"""Command-line entry point ``superlab``.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, exact, experiments, two_atom
from .config import PRESETS, ConfigError, defaults_text, parse_config, serialize
from .experiments import SweepSpec

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("superlab")

# flag name -> config key
_FLAG_KEYS = {
    "family": "geometry.family", "n": "geometry.n", "a": "geometry.a", "theta": "geometry.theta",
    "positions": "geometry.positions", "omega": "drive.omega", "delta": "drive.delta",
    "scaled": "drive.scaled", "backend": "solver.backend", "rtol": "solver.rtol", "atol": "solver.atol",
    "null_tol": "solver.null_tol", "t_max": "solver.t_max", "t0": "sweep.t0", "threads": "sweep.threads",
    "output": "output.directory", "prefix": "output.prefix",
}


def _add_common(p, config_required=False):
    if config_required:
        p.add_argument("config", help="INI run configuration")
    else:
        p.add_argument("--config", help="INI run configuration (optional)")
    g = p.add_argument_group("overrides (win over the config file)")
    g.add_argument("--family")
    g.add_argument("--n", help="comma list or start:stop:num")
    g.add_argument("--a")
    g.add_argument("--theta")
    g.add_argument("--positions")
    g.add_argument("--omega")
    g.add_argument("--delta")
    g.add_argument("--scaled", choices=["true", "false"])
    g.add_argument("--backend")
    g.add_argument("--rtol")
    g.add_argument("--atol")
    g.add_argument("--null-tol", dest="null_tol")
    g.add_argument("--t-max", dest="t_max")
    g.add_argument("--t0", help="measurement times or 'steady'")
    g.add_argument("--threads")
    g.add_argument("--output", help="output directory")
    g.add_argument("--prefix")
    g.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="superlab", description="Driven dipole-coupled emitter arrays.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="evaluate the grid described by a config file")
    _add_common(p, config_required=True)
    p.add_argument("--resume", action="store_true", help="skip grid points already in the output CSV")

    for name, text in (("phase-diagram", "steady <S_z>/N over (a, omega) plus thresholds"),
                       ("threshold", "critical drive versus atom number"),
                       ("scaling", "steady emission versus atom number with power-law fit"),
                       ("spectrum", "Liouvillian gap versus spacing"),
                       ("finite-time", "emission at finite measurement times")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        if name in ("finite-time", "scaling", "phase-diagram"):
            p.add_argument("--resume", action="store_true")

    p = sub.add_parser("two-atom", help="closed-form two-atom populations and emission")
    p.add_argument("--a", type=float, default=0.2)
    p.add_argument("--omega", type=float, default=40.0)
    p.add_argument("--theta", type=float, default=float(np.pi / 2))
    p.add_argument("--delta", default="resonant", help="detuning, or 'resonant' for Delta = J_12")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--steady", action="store_true", help="steady state (default)")
    mode.add_argument("--t0", type=float, help="measurement time instead of the steady state")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")

    sub.add_parser("defaults", help="print every default and subcommand preset")
    p = sub.add_parser("validate", help="parse and validate a config without running it")
    p.add_argument("config")
    p.add_argument("--print", action="store_true", help="print the canonical form")
    return ap


def _overrides(args) -> dict:
    out = {}
    for flag, key in _FLAG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None:
            out[key] = val
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_config(args, preset_name=None):
    path = getattr(args, "config", None)
    text = Path(path).read_text() if path else ""
    return parse_config(text, _overrides(args), PRESETS.get(preset_name))


def resolve_threads(cfg) -> int:
    env = os.environ.get("SUPERLAB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SUPERLAB_THREADS={env!r} is not an integer") from None
        if n < 1:
            raise ConfigError("SUPERLAB_THREADS must be >= 1")
        return n
    return cfg.threads


def _paths(cfg):
    d = Path(cfg.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d / f"{cfg.prefix}.csv", d / f"{cfg.prefix}.manifest.json"


def _point_key(spec: SweepSpec, point):
    n, a, theta, omega = point
    return (spec.atom_count(n), float(a), float(omega), float(theta))


def _sweep(cfg, resume: bool, extra: dict | None = None, spec: SweepSpec | None = None):
    """Run a grid sweep, write CSV + manifest and return the records."""
    spec = cfg.sweep_spec() if spec is None else spec
    csv_path, manifest_path = _paths(cfg)
    threads = resolve_threads(cfg)
    done = {}
    if resume and csv_path.exists():
        for r in experiments.read_csv(csv_path):
            done.setdefault((r.N, r.a, r.omega, r.theta), []).append(r)
    n_times = 1 if spec.t0_list is None else len(set(spec.t0_list))
    skip = {p for p in spec.points() if len(done.get(_point_key(spec, p), [])) == n_times}
    fresh = {}
    for r in experiments.run_sweep(spec, threads, skip):
        fresh.setdefault((r.N, r.a, r.omega, r.theta), []).append(r)
    records = []
    for p in spec.points():
        k = _point_key(spec, p)
        records += done[k] if p in skip else fresh.get(k, [])
    experiments.write_csv(csv_path, records)
    meta = {"config": serialize(cfg), "threads": threads, "computed_points": len(spec.points()) - len(skip),
            "skipped_points": len(skip), "seed": cfg.seed}
    if extra:
        meta.update(extra)
    experiments.write_manifest(manifest_path, spec, meta)
    print(f"wrote {csv_path} ({len(records)} rows, {len(skip)} points reused)")
    return records


def cmd_run(args):
    cfg = load_config(args)
    if cfg.scaled:
        raise ConfigError("scaled drive is only meaningful for the 'scaling' subcommand")
    _sweep(cfg, args.resume)


def cmd_phase_diagram(args):
    cfg = load_config(args, "phase-diagram")
    if cfg.backend not in ("exact", "meanfield"):
        raise ConfigError("phase-diagram needs backend exact or meanfield")
    if len(cfg.n) != 1 or len(cfg.theta) != 1:
        raise ConfigError("phase-diagram takes a single n and theta")
    records = _sweep(cfg, args.resume)
    N = cfg.sweep_spec().atom_count(cfg.n[0])
    sy = np.array([r.sy / N for r in records]).reshape(len(cfg.a), len(cfg.omega))
    spec = cfg.sweep_spec()
    path = Path(cfg.directory) / f"{cfg.prefix}_threshold.csv"
    with open(path, "w") as fh:
        fh.write("a,omega_c,omega_c_effective\n")
        for a, row in zip(cfg.a, sy):
            c = experiments.coupling_matrices(experiments.build_array(spec, cfg.n[0], a, cfg.theta[0]))
            try:
                eff = experiments.meanfield.critical_drive(c.J_eff, c.Gamma_eff)
            except ValueError:
                eff = float("nan")
            fh.write(f"{a!r},{experiments.refine_argmax(cfg.omega, row)!r},{eff!r}\n")
    print(f"wrote {path}")


def cmd_threshold(args):
    cfg = load_config(args, "threshold")
    path, manifest = _paths(cfg)
    rows = []
    if cfg.backend == "dicke":
        for N in cfg.n:
            rows.append(("dicke", N, float("nan"), experiments.dicke_threshold(N), True))
    elif cfg.backend == "meanfield":
        spec = cfg.sweep_spec()
        for n in cfg.n:
            for a in cfg.a:
                arr = experiments.build_array(spec, n, a, cfg.theta[0])
                w, ok = experiments.meanfield_threshold(arr, cfg.omega, t_max=max(cfg.t_max, 1000.0))
                rows.append(("meanfield", arr.n_atoms, a, w, ok))
    else:
        raise ConfigError("threshold needs backend dicke or meanfield")
    with open(path, "w") as fh:
        fh.write("backend,N,a,omega_c,converged\n")
        for b, N, a, w, ok in rows:
            fh.write(f"{b},{N},{float(a)!r},{float(w)!r},{'true' if ok else 'false'}\n")
    experiments.write_manifest(manifest, cfg.sweep_spec(), {"config": serialize(cfg)})
    for b, N, a, w, ok in rows:
        print(f"{b:9s} N={N:<4d} a={a:<6g} omega_c={w:.6g}{'' if ok else '  (not converged)'}")


def cmd_scaling(args):
    cfg = load_config(args, "scaling")
    spec = cfg.sweep_spec()
    fits = {}
    records = []
    for w in cfg.omega:
        sub = []
        for n in cfg.n:
            N = spec.atom_count(n)
            omega = w * N / 2 if cfg.scaled else w
            one = SweepSpec(cfg.backend, cfg.family, [n], list(cfg.a[:1]), list(cfg.theta[:1]), [omega],
                            cfg.delta, cfg.t0, cfg.positions, cfg.t_max, cfg.rtol, cfg.atol, cfg.null_tol)
            sub += experiments.run_point(one, one.points()[0])
        good = [r for r in sub if r.converged and np.isfinite(r.gamma_tot) and r.gamma_tot > 0]
        if len(good) >= 3:
            slope, icpt, err = experiments.fit_powerlaw([r.N for r in good], [r.gamma_tot for r in good])
            fits[repr(float(w))] = {"slope": slope, "intercept": icpt, "stderr": err}
            print(f"omega={w:g}{' x N/2' if cfg.scaled else ''}: slope {slope:.4f} +- {err:.2g}")
        records += sub
    csv_path, manifest = _paths(cfg)
    experiments.write_csv(csv_path, records)
    experiments.write_manifest(manifest, spec, {"config": serialize(cfg), "fits": fits})
    print(f"wrote {csv_path}")


def cmd_spectrum(args):
    cfg = load_config(args, "spectrum")
    if cfg.backend != "exact" or cfg.family not in ("chain",):
        raise ConfigError("spectrum uses backend exact on a chain")
    csv_path, manifest = _paths(cfg)
    with open(csv_path, "w") as fh:
        fh.write("N,a,omega,gap,tau_ss\n")
        for n in cfg.n:
            delta = 0.0 if cfg.delta == "resonant" else cfg.delta
            for w in cfg.omega:
                for row in experiments.gap_vs_spacing(cfg.a, w, n, delta, cfg.theta[0]):
                    fh.write(f"{n},{row['a']!r},{float(w)!r},{row['gap']!r},{row['tau_ss']!r}\n")
                    print(f"N={n} a={row['a']:<6g} omega={w:<6g} gap={row['gap']:.6g} tau_ss={row['tau_ss']:.6g}")
    experiments.write_manifest(manifest, cfg.sweep_spec(), {"config": serialize(cfg)})


def cmd_finite_time(args):
    cfg = load_config(args, "finite-time")
    if cfg.t0 is None:
        raise ConfigError("finite-time needs measurement times (sweep.t0)")
    _sweep(cfg, args.resume)


def cmd_two_atom(args):
    delta = None if str(args.delta).lower() == "resonant" else float(args.delta)
    spec = two_atom.DressedSpec.from_geometry(args.a, args.omega, args.theta, delta=delta)
    if args.t0 is None:
        rho = two_atom.dressed_steady_state(spec)
        pops = np.real(np.diag(rho))
    else:
        traj = two_atom.dressed_dynamics(spec, [0.0, args.t0])
        pops = traj.populations[-1]
    pops = pops / pops.sum()
    g = two_atom.two_atom_emission(pops, spec.gamma_b, spec.gamma_d)
    if args.json:
        print(json.dumps({"p_G": pops[0], "p_B": pops[1], "p_D": pops[2], "p_E": pops[3], "gamma_tot": g}))
    else:
        print("p_G p_B p_D p_E gamma_tot")
        print(" ".join(f"{x:.6f}" for x in (*pops, g)))


def cmd_defaults(args):
    print(defaults_text())


def cmd_validate(args):
    cfg = parse_config(Path(args.config).read_text())
    if args.print:
        print(serialize(cfg), end="")
    else:
        print(f"{args.config}: ok ({cfg.backend}, {cfg.family}, {len(cfg.sweep_spec().points())} grid points)")


COMMANDS = {
    "run": cmd_run, "phase-diagram": cmd_phase_diagram, "threshold": cmd_threshold, "scaling": cmd_scaling,
    "spectrum": cmd_spectrum, "finite-time": cmd_finite_time, "two-atom": cmd_two_atom,
    "defaults": cmd_defaults, "validate": cmd_validate,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ConfigError, experiments.SweepError) as err:
        _report("config", err)
        return EXIT_CONFIG
    except (exact.SteadyStateError, exact.IntegrationError, exact.SizeError, RuntimeError, np.linalg.LinAlgError) as err:
        _report("solver", err)
        return EXIT_SOLVER
    except OSError as err:
        _report("io", err)
        return EXIT_IO
    return EXIT_OK


def _report(kind, err):
    print(json.dumps({"error": kind, "type": type(err).__name__, "message": str(err)}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
