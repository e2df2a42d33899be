"""Command-line front end: ``mapfe run|sweep|oracle|mesh``.

The exit status is 0 exactly when every enabled tolerance check passed.
``MAPFE_THREADS`` limits the BLAS/OpenMP thread pools; it must be read
before numpy is imported, hence the import order below.
"""
from __future__ import annotations

import os

if os.environ.get("MAPFE_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = os.environ["MAPFE_THREADS"]

import argparse  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import math  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402
import yaml  # noqa: E402

from . import oracles  # noqa: E402
from .bezier import read_mesh, structured_hex_mesh, write_mesh  # noqa: E402
from .config import ConfigError, load_config, problem_from_dict, settings_from_dict  # noqa: E402
from .errors import MapfeError  # noqa: E402
from .scenarios import (  # noqa: E402
    SCENARIOS,
    VISCO_BUILDERS,
    Scenario,
    build_problem,
    run_scenario,
    visco_checks,
    viscoelastic_study,
)
from .solver import Model, load_checkpoint, run_schedule, save_checkpoint  # noqa: E402

log = logging.getLogger("mapfe")


def _parse_value(text):
    """``--set`` values are parsed as YAML scalars/lists (``5``, ``[1, 2]``, ``ramp``)."""
    return yaml.safe_load(text)


def _settings(args, base=None):
    s = settings_from_dict(base)
    if args.tol_rel is not None:
        s.tol_rel = args.tol_rel
    if args.tol_abs is not None:
        s.tol_abs = args.tol_abs
    if args.max_iter is not None:
        s.max_iter = args.max_iter
    return s


def _scenario_from_args(args, cfg=None):
    cfg = cfg or {}
    overrides = dict(cfg.get("overrides", {}))
    for item in args.set or []:
        key, _, val = item.partition("=")
        if not _:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key] = _parse_value(val)
    name = args.target if args.target in SCENARIOS else cfg.get("scenario")
    level = args.level if args.level is not None else int(cfg.get("level", 1))
    if args.dt is not None:
        base = Scenario(name).params
        if "dt" in base:
            overrides["dt"] = args.dt
        elif "n_steps" in base:  # pseudo-time runs over [0, 1]
            overrides["n_steps"] = int(math.ceil(1.0 / args.dt - 1e-9))
        else:
            raise ConfigError(f"--dt does not apply to {name}")
    return Scenario(name, overrides, level)


def _print_checks(checks):
    for key, ok in checks.items():
        print(f"  [{'PASS' if ok else 'FAIL'}] {key}")


def cmd_run(args):
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    target = args.target
    cfg = load_config(args.config) if args.config else None
    if target not in SCENARIOS:
        path = Path(target)
        if not path.exists():
            raise ConfigError(f"{target!r} is neither a scenario ({', '.join(SCENARIOS)}) nor a problem file")
        cfg = load_config(path)
        if "scenario" not in cfg:
            return _run_problem_file(args, cfg, path.parent, outdir)
    scn = _scenario_from_args(args, cfg)
    settings = _settings(args, (cfg or {}).get("solver"))
    if args.restart or args.checkpoint:
        return _run_with_checkpoint(args, scn, settings, outdir)
    rep = run_scenario(scn, outdir, settings, vtk=args.vtk, vtk_mode=args.vtk_mode)
    print(f"{scn.name} (level {scn.level})")
    _print_checks(rep.checks)
    if rep.oracle:
        worst = max(rep.oracle, key=lambda o: o.rel_error)
        print(f"  oracle cases {len(rep.oracle)}, max relative error {worst.rel_error:.3e} at {worst.inputs}")
    for f in rep.files:
        print(f"  wrote {f}")
    return 0 if rep.passed else 1


def _finish(args, res, outdir, stem):
    files = [str(outdir / f"{stem}.csv")]
    if args.checkpoint:
        save_checkpoint(args.checkpoint, res.state)
        files.append(args.checkpoint)
    if args.vtk:
        from .vtk import write_vtk

        path = outdir / f"{stem}_final.vtk"
        write_vtk(path, res.model, res.state, mode=args.vtk_mode)
        files.append(str(path))
    for f in files:
        print(f"  wrote {f}")


def _run_with_checkpoint(args, scn, settings, outdir):
    problem = build_problem(scn, settings)
    model = Model(problem)
    state = load_checkpoint(args.restart) if args.restart else None
    res = run_schedule(problem, csv_path=outdir / f"{scn.name}.csv", state=state, model=model)
    print(f"{scn.name} (level {scn.level}) reached t={res.state.t:g}")
    _finish(args, res, outdir, scn.name)
    return 0


def _run_problem_file(args, cfg, base_dir, outdir):
    problem = problem_from_dict(cfg, base_dir)
    problem.settings = _settings(args, cfg.get("solver"))
    out = cfg.get("output", {})
    stem = out.get("name", "problem")
    if "csv" in out:
        stem = Path(out["csv"]).stem
    if out.get("checkpoint") and not args.checkpoint:
        args.checkpoint = str(outdir / out["checkpoint"])
    args.vtk = args.vtk or bool(out.get("vtk", False))
    model = Model(problem)
    state = load_checkpoint(args.restart) if args.restart else None
    res = run_schedule(problem, csv_path=outdir / f"{stem}.csv", state=state, model=model)
    print(f"problem file: {len(res.times) - 1} steps to t={res.state.t:g}, mean iterations {np.mean(res.iterations_per_step()):.2f}")
    _finish(args, res, outdir, stem)
    return 0


def cmd_sweep(args):
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = load_config(args.config) if args.config else {}
    params = dict(cfg.get("overrides", {}))
    for item in args.set or []:
        key, _, val = item.partition("=")
        params[key] = _parse_value(val)
    if args.dt is not None:
        params["dt"] = args.dt
    settings = _settings(args, cfg.get("solver"))
    csv_path = outdir / f"{args.scenario}_visco.csv"
    out = viscoelastic_study(
        args.scenario,
        args.mu_v,
        args.tau,
        params=params,
        settings=settings,
        csv_path=csv_path,
        hold_taus=args.hold_taus,
        jobs=args.jobs,
    )
    checks, lag = visco_checks(out, args.scenario, params, hold_taus=args.hold_taus)
    print(f"{args.scenario} viscoelastic sweep")
    for (mu_v, tau), t95 in lag.items():
        print(f"  mu_v={mu_v:g} tau={tau:g}: t95={t95:.6g}")
    for key, msg in out["errors"].items():
        print(f"  error mu_v={key[0]:g} tau={key[1]:g}: {msg}")
    _print_checks(checks)
    print(f"  wrote {csv_path}")
    return 0 if all(checks.values()) else 1


def cmd_oracle(args):
    rows = []
    if args.kind == "cubic":
        ks = args.k if args.k else list(np.linspace(-5.0, 5.0, 20))
        for k in ks:
            rows.append({"k": float(k), "lambda": oracles.cubic_stretch_oracle(k)})
    elif args.kind == "gent":
        for Im in args.Im:
            for lam in args.lam:
                rows.append({"Im": Im, "lambda": lam, "phibar": oracles.gent_potential_oracle(lam, Im)})
    elif args.kind == "gent-inverse":
        for Im in args.Im:
            for phibar in args.phibar:
                rows.append({"Im": Im, "phibar": phibar, "lambda": oracles.gent_stretch_from_potential(phibar, Im)})
    else:  # gent-limit
        for Im in args.Im:
            lam, phi = oracles.gent_ascending_limit(Im)
            rows.append({"Im": Im, "lambda_sup": lam, "phibar_sup": phi})
    if args.json:
        print(json.dumps(rows, indent=1))
    else:
        keys = list(rows[0]) if rows else []
        print(",".join(keys))
        for r in rows:
            print(",".join(repr(float(r[k])) for k in keys))
    return 0


def cmd_mesh(args):
    if args.source == "box":
        mesh = structured_hex_mesh(tuple(args.box), tuple(args.div))
    elif args.source in SCENARIOS:
        mesh = build_problem(Scenario(args.source, {}, args.level)).mesh
    else:
        mesh = read_mesh(args.source)
    mesh.check()
    print(
        f"nodes {mesh.n_nodes}, elements {mesh.n_elems}, pressure nodes {mesh.n_pnodes}, "
        f"regions {sorted(set(mesh.region_tags.tolist()))}"
    )
    print(f"node sets: {', '.join(sorted(mesh.node_sets)) or '-'}; face sets: {', '.join(sorted(mesh.face_sets)) or '-'}")
    if args.output:
        write_mesh(mesh, args.output)
        print(f"wrote {args.output}")
    return 0


def _add_solver_flags(p):
    p.add_argument("--dt", type=float, help="time/load step (scenario 'dt', or 1/n_steps for pseudo-time runs)")
    p.add_argument("--tol-rel", type=float, help="relative Newton tolerance")
    p.add_argument("--tol-abs", type=float, help="absolute Newton tolerance")
    p.add_argument("--max-iter", type=int, help="Newton iteration cap")
    p.add_argument("--config", help="YAML/JSON file with 'overrides' and 'solver' sections")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one scenario parameter")
    p.add_argument("-o", "--outdir", default="mapfe_out", help="output directory")


def build_parser():
    ap = argparse.ArgumentParser(prog="mapfe", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log step cuts and progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a benchmark scenario or a problem file")
    p.add_argument("target", help=f"scenario ({', '.join(SCENARIOS)}) or problem file")
    p.add_argument("--level", type=int, help="mesh level 1..5")
    p.add_argument("--vtk", action=argparse.BooleanOptionalAction, default=False, help="write the final state as VTK")
    p.add_argument("--vtk-mode", choices=["lagrange", "subhex"], default="lagrange")
    p.add_argument("--checkpoint", help="write the final state to this npz file")
    p.add_argument("--restart", help="start from this checkpoint")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="viscoelastic (mu_v, tau) study against the hyperelastic reference")
    p.add_argument("scenario", choices=sorted(VISCO_BUILDERS))
    p.add_argument("--mu-v", type=float, nargs="+", help="viscous moduli (default: scenario list)")
    p.add_argument("--tau", type=float, nargs="+", help="relaxation times (default: scenario list)")
    p.add_argument("--hold-taus", type=float, default=10.0, help="hold length in units of tau (pattern_hard)")
    p.add_argument("-j", "--jobs", type=int, default=1, help="run combinations in this many processes")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="evaluate the analytical reference solutions")
    p.add_argument("kind", choices=["cubic", "gent", "gent-inverse", "gent-limit"])
    p.add_argument("--k", type=float, nargs="+", help="cubic: k values (default 20 in [-5, 5])")
    p.add_argument("--lam", type=float, nargs="+", default=[1.2], help="gent: stretches")
    p.add_argument("--phibar", type=float, nargs="+", default=[0.5], help="gent-inverse: normalised potentials")
    p.add_argument("--Im", type=float, nargs="+", default=[5.0, 10.0, 50.0])
    p.add_argument("--json", action="store_true", help="print JSON instead of CSV")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("mesh", help="generate, inspect or convert a mesh")
    p.add_argument("source", help="'box', a scenario name, or a mesh file")
    p.add_argument("--box", type=float, nargs=3, default=[1.0, 1.0, 1.0])
    p.add_argument("--div", type=int, nargs=3, default=[1, 1, 1])
    p.add_argument("--level", type=int, default=1)
    p.add_argument("-o", "--output", help="write the mesh in text format")
    p.set_defaults(func=cmd_mesh)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (MapfeError, ConfigError, ValueError, OSError) as exc:
        print(f"mapfe: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
