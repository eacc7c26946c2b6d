"""Command-line front end: ``simulate``, ``verify`` and ``compare``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import artifacts
from .integrate import IntegrationError, integrate
from .mechanics import KL_KINDS, SystemSpec
from .runconfig import ConfigError, RunConfig, load_config
from .simplex import DomainError
from .verify import SUITES, run_suites, seed_from_env

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2, 3


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _output_paths(cfg: RunConfig, config_path: Path, out_dir: str | None):
    stem = config_path.stem
    base = Path(out_dir) if out_dir else None
    paths = {}
    for key, ext in (("csv_path", "csv"), ("json_path", "json"), ("svg_path", "svg")):
        given = getattr(cfg.outputs, key)
        if given:
            paths[key] = Path(given) if base is None else base / Path(given).name
        elif base is not None:
            paths[key] = base / f"{stem}.{ext}"
    if base is not None:
        base.mkdir(parents=True, exist_ok=True)
    return paths


def cmd_simulate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        traj = integrate(cfg.system, cfg.initial_state(), cfg.t_span, cfg.integrator, t_eval=cfg.t_eval)
    except (IntegrationError, DomainError) as exc:
        _err(f"integration failed: {exc}")
        return EXIT_NUMERICAL
    paths = _output_paths(cfg, Path(args.config), args.out_dir)
    summ = artifacts.summary(cfg.system, traj)
    if "csv_path" in paths:
        artifacts.write_trajectory_csv(paths["csv_path"], cfg.system, traj)
    if "json_path" in paths:
        artifacts.write_json(paths["json_path"], summ)
    if "svg_path" in paths:
        artifacts.write_svg(paths["svg_path"], cfg.system, traj, title=cfg.system.kind.replace("_", " "))
    print(f"{cfg.system.kind}: {summ['termination']} at t = {summ['t_final']:.6g} "
          f"({summ['samples']} samples, {summ['steps']} steps)")
    print(f"  max mass drift {summ['max_mass_drift']:.3e}, max centering drift {summ['max_centering_drift']:.3e}")
    if summ["relative_energy_drift"] is not None:
        print(f"  relative energy drift {summ['relative_energy_drift']:.3e}")
    for key, p in paths.items():
        print(f"  wrote {p}")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = [args.suite] if args.suite else None
    if args.suite and args.suite not in SUITES:
        _err(f"unknown suite {args.suite!r}; available: {', '.join(SUITES)}")
        return EXIT_CONFIG
    seed = seed_from_env()
    checks = run_suites(names, seed)
    ok = all(c.passed for c in checks)
    if args.json:
        print(json.dumps({"seed": seed, "passed": ok, "checks": [c.as_dict() for c in checks]}, indent=2))
    else:
        for c in checks:
            print(f"[{'PASS' if c.passed else 'FAIL'}] {c.suite:<13} {c.name}: {c.measured:.3e} (tol {c.tolerance:.1e})")
        print(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed (seed {seed})")
    return EXIT_OK if ok else EXIT_VERIFY


def _compare_kinds(kind):
    if kind.startswith("damped"):
        return ("damped_kl_lagrangian", "damped_kl_hamiltonian")
    return ("kl_lagrangian", "kl_hamiltonian", "kl_replicator")


def cmd_compare(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if cfg.system.kind not in KL_KINDS:
        _err(f"system.kind: compare needs a KL-family system, got {cfg.system.kind}")
        return EXIT_CONFIG
    t0 = cfg.t_span[0]
    v0 = cfg.v0 if cfg.v0 is not None else cfg.system.velocity(t0, cfg.initial_state())
    mismatched = False
    qs = {}
    try:
        for kind in _compare_kinds(cfg.system.kind):
            sys_k = SystemSpec(kind, cfg.system.params, cfg.system.potential)
            y0 = sys_k.state_from_velocity(cfg.q0, v0, t0)
            key = {"momentum": "eta0", "companion": "chi0"}.get(sys_k.aux_kind)
            if key in cfg.extra_initial:
                given = cfg.extra_initial[key]
                if np.abs(given - sys_k.split(y0)[1]).max() > 1e-9:
                    mismatched = True
                    print(f"warning: initial.{key} is not the image of v0; deviation reported but not asserted",
                          file=sys.stderr)
                y0 = sys_k.join(cfg.q0, given)
            traj = integrate(sys_k, y0, cfg.t_span, cfg.integrator, t_eval=cfg.t_eval)
            if traj.reason != "completed":
                _err(f"{kind} stopped early ({traj.reason}) at t = {traj.times[-1]:.6g}")
                return EXIT_NUMERICAL
            qs[kind] = np.array([sys_k.split(y)[0] for y in traj.states])
    except (IntegrationError, DomainError) as exc:
        _err(f"integration failed: {exc}")
        return EXIT_NUMERICAL
    kinds = list(qs)
    ref = qs[kinds[0]]
    devs = {f"{kinds[0]}_vs_{k}": np.abs(qs[k] - ref).max(axis=1) for k in kinds[1:]}
    worst = max(float(d.max()) for d in devs.values())
    paths = _output_paths(cfg, Path(args.config), args.out_dir)
    if "csv_path" in paths:
        with open(paths["csv_path"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *devs])
            for i, t in enumerate(cfg.t_eval):
                w.writerow([format(x, artifacts.FLOAT_FMT) for x in (t, *(d[i] for d in devs.values()))])
    if "json_path" in paths:
        artifacts.write_json(paths["json_path"], {
            "kinds": kinds, "max_deviation": worst, "bound": cfg.compare_bound,
            "initial_conditions_consistent": not mismatched,
            "pairwise_max": {k: float(d.max()) for k, d in devs.items()},
        })
    for k, d in devs.items():
        print(f"{k}: max deviation {d.max():.3e}")
    if mismatched:
        print(f"max deviation {worst:.3e} (not asserted: inconsistent initial conditions)")
        return EXIT_OK
    ok = worst <= cfg.compare_bound
    print(f"{'PASS' if ok else 'FAIL'}: max deviation {worst:.3e} vs bound {cfg.compare_bound:.1e}")
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="statbundle", description="Mechanics on the statistical bundle.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="integrate a configured system and write artifacts")
    p.add_argument("config")
    p.add_argument("--out-dir", help="directory for outputs (default names from the config file)")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("verify", help="run invariant suites")
    p.add_argument("suite", nargs="?", help=f"one of: {', '.join(SUITES)}")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("compare", help="run the equivalent formulations of a KL system and compare q(t)")
    p.add_argument("config")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
