"""Command-line front end: ``snlab <command> [--config FILE] [flags]``.

Every command reads an optional JSON config, lets flags override it, validates
the merged parameters, then runs. Exit codes: 0 success, 1 runtime failure or
failed postcondition, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import compare as cp
from . import diagnostics as dg
from . import evolve as ev
from . import lumps as lp
from . import nbody as nb
from . import radial
from . import symmetry as sy
from .errors import ConfigurationError, PlacementError, SNLabError
from .grid import Grid3, read_snapshot, write_snapshot

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
MIN_COMPARE_RADII = 6.0

DEFAULTS = {
    "ground-state": {"rmax": 40.0, "n": 20000, "tol": 1e-6, "out": "profile.csv"},
    "verify-symmetries": {"points": 100, "seed": 7, "generator": None, "break_term": None,
                          "out": "symmetry.csv", "tol": 1e-9},
    "evolve": {"lumps": None, "grid_n": 64, "L": 1000.0, "dt": 1e-3, "steps": 1000,
               "diag_every": 100, "out_dir": "evolve_out", "poisson": ev.poisson.FREE_SPACE},
    "nbody": {"lumps": None, "preset": None, "radius": 10.0, "periods": 10.0, "dt": None,
              "steps": None, "kappa": nb.KAPPA_ORDERED, "every": 1, "out": "nbody.csv"},
    "compare": {"lumps": None, "radii": 6.0, "grid_n": 64, "L": None, "dt": None,
                "steps": None, "diag_every": 10, "kappa": nb.KAPPA_ORDERED,
                "out": "compare.csv"},
    "diag": {"snapshot": None, "phi": None},
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with parameters; flags override it")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="snlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground-state", help="solve for the unit-norm ground state")
    _add_common(p)
    p.add_argument("--rmax", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", help="profile CSV path (sidecar .meta written next to it)")

    p = sub.add_parser("verify-symmetries", help="residuals of the ten generators")
    _add_common(p)
    p.add_argument("--points", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--generator", help="X1..X10 (default: all)")
    p.add_argument("--break-term", dest="break_term", choices=sorted(sy.BREAK_TERMS))
    p.add_argument("--out")

    p = sub.add_parser("evolve", help="evolve a lump system on a 3D grid")
    _add_common(p)
    p.add_argument("--lumps", help="lump system JSON (default: one unit lump at rest)")
    p.add_argument("--grid-n", dest="grid_n", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--diag-every", dest="diag_every", type=int)
    p.add_argument("--out-dir", dest="out_dir")

    p = sub.add_parser("nbody", help="integrate the point-particle system")
    _add_common(p)
    p.add_argument("--lumps", help="lump system JSON")
    p.add_argument("--preset", choices=["circular"])
    p.add_argument("--radius", type=float)
    p.add_argument("--periods", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--every", type=int)
    p.add_argument("--out")

    p = sub.add_parser("compare", help="field evolution against point particles")
    _add_common(p)
    p.add_argument("--lumps", help="two-lump system JSON (default: symmetric head-on pair)")
    p.add_argument("--radii", type=float, help="separation in 99%%-probability radii")
    p.add_argument("--grid-n", dest="grid_n", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--diag-every", dest="diag_every", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--out")

    p = sub.add_parser("diag", help="norm, energy, centroid and momentum of a snapshot")
    _add_common(p)
    p.add_argument("--snapshot")
    p.add_argument("--phi", help="matching real snapshot of phi (default: solve Poisson)")
    return ap


def merged_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"config: cannot read {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError("config: top level must be an object")
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(data) - set(cfg)
        if unknown:
            raise ConfigurationError(f"config: unknown keys {sorted(unknown)}")
        cfg.update(data)
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _need(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise ConfigurationError(f"{name}: {msg}")


def _positive_int(cfg, name):
    v = cfg[name]
    _need(isinstance(v, int) and not isinstance(v, bool) and v >= 1, name,
          f"must be a positive integer, got {v!r}")


def _positive(cfg, name):
    v = cfg[name]
    _need(isinstance(v, (int, float)) and math.isfinite(v) and v > 0, name,
          f"must be positive, got {v!r}")


def _writable(path) -> Path:
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    _need(parent.is_dir(), "out", f"directory {parent} does not exist")
    return path


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _meta(path: Path, items: dict) -> Path:
    meta = path.with_suffix(".meta")
    meta.write_text("".join(f"{k}={_fmt(v) if isinstance(v, float) else v}\n"
                            for k, v in items.items()))
    return meta


def _lump_system(value) -> lp.LumpSystem:
    if isinstance(value, dict):
        return lp.LumpSystem.from_dict(value)
    try:
        return lp.LumpSystem.read(value)
    except (OSError, ValueError) as exc:  # JSONDecodeError is a ValueError
        raise ConfigurationError(f"lumps: cannot read {value}: {exc}") from None


# --- commands -------------------------------------------------------------


def cmd_ground_state(cfg: dict) -> int:
    _positive(cfg, "rmax")
    _positive_int(cfg, "n")
    _positive(cfg, "tol")
    grid = radial.RadialGrid(float(cfg["rmax"]), int(cfg["n"]))
    out = _writable(cfg["out"])
    p = radial.find_ground_state(float(cfg["tol"]), grid)
    r1, r2 = dg.virial_check(p)
    radial.write_profile(p, out)
    print(f"E0={_fmt(p.E0)}")
    print(f"virial_kinetic={_fmt(r1)}")
    print(f"virial_potential={_fmt(r2)}")
    print(f"profile={out}")
    return EXIT_OK


def cmd_verify(cfg: dict) -> int:
    _positive_int(cfg, "points")
    _need(isinstance(cfg["seed"], int), "seed", "must be an integer")
    kinds = sy.KINDS[:10]
    if cfg["generator"] is not None:
        _need(cfg["generator"] in kinds, "generator", f"must be one of X1..X10, got {cfg['generator']!r}")
        kinds = (cfg["generator"],)
    drop = ()
    if cfg["break_term"] is not None:
        bt = cfg["break_term"]
        _need(bt in sy.BREAK_TERMS, "break_term", f"must be one of {sorted(sy.BREAK_TERMS)}")
        target = bt.split(":")[0]
        _need(cfg["generator"] in (None, target), "break_term", f"applies to {target} only")
        kinds = (target,)
        drop = (bt,)
    out = _writable(cfg["out"])
    rows = sy.verify(kinds, cfg["points"], cfg["seed"], drop)
    with open(out, "w", newline="\n") as fh:
        fh.write("generator,point_index,resH1,resH2,resH3\n")
        for r in rows:
            fh.write(f"{r.generator},{r.point_index}," + ",".join(_fmt(x) for x in r.residual) + "\n")
    _meta(out, {"seed": cfg["seed"], "points": cfg["points"],
                "break_term": cfg["break_term"] or "none"})
    worst = max(r.relative for r in rows)
    print(f"max_relative_residual={_fmt(worst)}")
    if drop:
        ok = worst >= 1e-3
        print(f"negative_control={'detected' if ok else 'MISSED'}")
    else:
        ok = worst <= cfg["tol"]
        print(f"verified={'yes' if ok else 'NO'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_evolve(cfg: dict) -> int:
    _positive_int(cfg, "grid_n")
    _positive(cfg, "L")
    _positive(cfg, "dt")
    _positive_int(cfg, "steps")
    _positive_int(cfg, "diag_every")
    g = Grid3(cfg["grid_n"], float(cfg["L"]))
    sys_ = _lump_system(cfg["lumps"]) if cfg["lumps"] is not None else \
        lp.LumpSystem((lp.LumpSpec(1.0),))
    ecfg = ev.EvolveConfig(float(cfg["dt"]), cfg["steps"], cfg["diag_every"], cfg["poisson"])
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    p = radial.find_ground_state()
    f = lp.superpose(sys_, p, 0.0, g)
    res = ev.evolve(f.psi, g, ecfg)
    res.write_csv(out / "diagnostics.csv")
    write_snapshot(out / "psi_final.snf", res.psi, g, res.t)
    write_snapshot(out / "phi_final.snf", res.phi, g, res.t)
    norm = res.column("norm")
    energy = res.column("energy")
    drift = float(np.max(np.abs(norm - norm[0])))
    edrift = float(np.max(np.abs(energy - energy[0])) / abs(energy[0]))
    _meta(out / "diagnostics.csv", {"n": g.n, "L": g.L, "dt": ecfg.dt, "steps": ecfg.steps,
                                    "E0": p.E0, "edge_max": res.edge_max})
    print(f"norm_drift={_fmt(drift)}")
    print(f"energy_drift_rel={_fmt(edrift)}")
    print(f"edge_max={_fmt(res.edge_max)}")
    return EXIT_OK if drift <= 1e-10 else EXIT_FAIL


def cmd_nbody(cfg: dict) -> int:
    _positive(cfg, "kappa")
    _positive_int(cfg, "every")
    preset = cfg["preset"]
    if preset is not None:
        _need(preset == "circular", "preset", f"unknown preset {preset!r}")
        _positive(cfg, "radius")
        _positive(cfg, "periods")
        _need(cfg["periods"] >= 3, "periods", "the period estimate needs at least 3 orbits")
        state = nb.circular_binary(float(cfg["radius"]), kappa=cfg["kappa"])
        T = nb.kepler_period(cfg["radius"], 1.0, cfg["kappa"])
        dt = cfg["dt"] if cfg["dt"] is not None else T / 2000
        steps = cfg["steps"] if cfg["steps"] is not None else int(round(cfg["periods"] * T / dt))
    else:
        _need(cfg["lumps"] is not None, "lumps", "needed unless a preset is given")
        state = nb.NBodyState.from_system(_lump_system(cfg["lumps"]))
        dt, steps = cfg["dt"], cfg["steps"]
        _need(dt is not None and dt > 0, "dt", f"must be positive, got {dt!r}")
        _need(isinstance(steps, int) and steps >= 1, "steps", f"must be a positive integer, got {steps!r}")
    ncfg = nb.NBodyConfig(float(dt), int(steps), float(cfg["kappa"]), cfg["every"])
    out = _writable(cfg["out"])
    traj = nb.integrate(state, ncfg)
    traj.write_csv(out)
    _meta(out, {"dt": ncfg.dt, "steps": ncfg.steps, "kappa": ncfg.kappa})
    drift = float(np.max(np.abs(traj.energy - traj.energy[0])) / abs(traj.energy[0]))
    print(f"energy_drift_rel={_fmt(drift)}")
    ok = True
    if preset == "circular":
        err = abs(nb.measure_period(traj) / T - 1.0)
        print(f"period_rel_error={_fmt(err)}")
        ok = err <= 1e-4 and drift <= 1e-8
    return EXIT_OK if ok else EXIT_FAIL


def cmd_compare(cfg: dict) -> int:
    _positive_int(cfg, "grid_n")
    _positive_int(cfg, "diag_every")
    _positive(cfg, "kappa")
    _positive(cfg, "radii")
    _need(cfg["radii"] >= MIN_COMPARE_RADII, "radii",
          f"must be at least {MIN_COMPARE_RADII}, got {cfg['radii']!r}")
    for name in ("L", "dt"):
        if cfg[name] is not None:
            _positive(cfg, name)
    if cfg["steps"] is not None:
        _positive_int(cfg, "steps")
    sys_ = _lump_system(cfg["lumps"]) if cfg["lumps"] is not None else None
    if sys_ is not None:
        _need(len(sys_) == 2, "lumps", "comparison needs exactly two lumps")
    if cfg["L"] is not None:
        Grid3(cfg["grid_n"], float(cfg["L"]))
    out = _writable(cfg["out"])
    p = radial.find_ground_state()
    g, pair, dt, steps = cp.default_pair_setup(p, cfg["grid_n"], float(cfg["radii"]))
    if sys_ is not None:
        d = float(np.linalg.norm(sys_.positions[1] - sys_.positions[0]))
        need = MIN_COMPARE_RADII * max(lp.core_radius(p, s.m) for s in sys_.lumps)
        _need(d >= need, "lumps", f"separation {d:.6g} is below {MIN_COMPARE_RADII} core radii "
              f"({need:.6g})")
    else:
        sys_ = pair
    if cfg["L"] is not None:
        g = Grid3(cfg["grid_n"], float(cfg["L"]))
    if cfg["dt"] is not None:
        dt = float(cfg["dt"])
    if cfg["steps"] is not None:
        steps = cfg["steps"]
    rep = cp.compare(p, sys_, g, dt, steps, cfg["diag_every"], float(cfg["kappa"]))
    rep.write_csv(out)
    km = rep.kappa_measured()
    err = rep.trajectory_error()
    _meta(out, {"n": g.n, "L": g.L, "dt": dt, "steps": steps, "kappa": rep.kappa,
                "boundary_flag": rep.boundary_flag})
    print(f"kappa_measured={_fmt(km)}")
    print(f"kappa_ratio={_fmt(km / rep.kappa)}")
    print(f"trajectory_rel_error={_fmt(err)}")
    print(f"boundary_contamination={'yes' if rep.boundary_flag else 'no'}")
    return EXIT_OK


def cmd_diag(cfg: dict) -> int:
    _need(cfg["snapshot"] is not None, "snapshot", "a snapshot file is required")
    psi, g, t = read_snapshot(cfg["snapshot"])
    if cfg["phi"] is not None:
        phi, g2, _ = read_snapshot(cfg["phi"])
        _need(g2 == g, "phi", "grid differs from the snapshot")
    else:
        phi = ev.potential(psi, g)
    e = dg.energy(psi, phi, g)
    print(f"t={_fmt(t)}")
    print(f"norm={_fmt(e.norm)}")
    print(f"kinetic={_fmt(e.kinetic)}")
    print(f"potential={_fmt(e.potential)}")
    print(f"energy={_fmt(e.total)}")
    if e.norm > 0:
        c = ev.centroid(psi, g)
        m = ev.momentum(psi, g)
        for k, ax in enumerate("xyz"):
            print(f"c{ax}={_fmt(c[k])}")
        for k, ax in enumerate("xyz"):
            print(f"p{ax}={_fmt(m[k])}")
    return EXIT_OK


COMMANDS = {"ground-state": cmd_ground_state, "verify-symmetries": cmd_verify,
            "evolve": cmd_evolve, "nbody": cmd_nbody, "compare": cmd_compare, "diag": cmd_diag}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = merged_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigurationError, PlacementError) as exc:
        print(f"snlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SNLabError as exc:
        print(f"snlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"snlab: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    warnings.simplefilter("default")
    sys.exit(main())
