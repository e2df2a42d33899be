"""Problem definition files (YAML or JSON) and their translation to :class:`Problem`.

A problem file has the sections ``mesh``, ``materials``, ``time``,
``dirichlet``, ``tractions``, ``charges``, ``applied_field``, ``probes``,
``solver`` and ``output``; see README.md for a complete example.  A
scenario file instead names a built-in benchmark (``scenario``) with
``level``, ``overrides`` and ``solver`` sections.
"""
from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml

from .bezier import read_mesh, structured_hex_mesh
from .constitutive import MaterialSpec
from .solver import (
    AppliedField,
    DirichletBC,
    Problem,
    Probe,
    Program,
    SolverSettings,
    SurfaceChargeBC,
    TractionBC,
)


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    """Read a YAML or JSON mapping (chosen by suffix; YAML otherwise)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    data = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _only(d, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")


def settings_from_dict(d) -> SolverSettings:
    d = dict(d or {})
    _only(d, [f.name for f in fields(SolverSettings)], "solver")
    return SolverSettings(**d)


def program_from_dict(d):
    if d is None:
        return None
    d = dict(d)
    _only(d, [f.name for f in fields(Program)], "program")
    for k in ("times", "values"):
        if k in d:
            d[k] = tuple(float(v) for v in d[k])
    return Program(**d)


def mesh_from_dict(d, base_dir="."):
    d = dict(d)
    if "file" in d:
        return read_mesh(Path(base_dir) / d["file"])
    gen = d.pop("generator", "box")
    if gen != "box":
        raise ConfigError(f"mesh: unknown generator {gen!r} (use 'box' or 'file')")
    _only(d, ["box", "divisions", "origin"], "mesh")
    return structured_hex_mesh(
        tuple(d.get("box", (1.0, 1.0, 1.0))), tuple(d.get("divisions", (1, 1, 1))), tuple(d.get("origin", (0.0, 0.0, 0.0)))
    )


def _times(d):
    if "times" in d:
        return np.asarray(d["times"], dtype=float)
    t0 = float(d.get("t_start", 0.0))
    return np.linspace(t0, float(d["t_end"]), int(d["n_steps"]) + 1)


def problem_from_dict(cfg: dict, base_dir=".") -> Problem:
    _only(
        cfg,
        ["mesh", "materials", "time", "dirichlet", "tractions", "charges", "applied_field", "probes", "solver", "output"],
        "problem",
    )
    for key in ("mesh", "materials", "time"):
        if key not in cfg:
            raise ConfigError(f"problem: missing section {key!r}")
    mesh = mesh_from_dict(cfg["mesh"], base_dir)
    materials = {int(tag): MaterialSpec.from_dict(m) for tag, m in cfg["materials"].items()}
    dirichlet = []
    for bc in cfg.get("dirichlet", []):
        bc = dict(bc)
        dirichlet.append(
            DirichletBC(
                bc.pop("set"),
                bc.pop("field", "u"),
                int(bc.pop("component", 0)),
                float(bc.pop("value", 0.0)),
                program_from_dict(bc.pop("program", None)),
            )
        )
        _only(bc, [], "dirichlet entry")
    tractions = [
        TractionBC(t["set"], tuple(t["vector"]), program_from_dict(t.get("program"))) for t in cfg.get("tractions", [])
    ]
    charges = [
        SurfaceChargeBC(c["set"], float(c["value"]), program_from_dict(c.get("program"))) for c in cfg.get("charges", [])
    ]
    af = cfg.get("applied_field")
    applied = None
    if af is not None:
        applied = AppliedField(tuple(af["direction"]), program_from_dict(af.get("program", {"kind": "constant"})))
    probes = []
    for p in cfg.get("probes", []):
        p = dict(p)
        _only(p, [f.name for f in fields(Probe)], "probe")
        if "point" in p:
            p["point"] = tuple(p["point"])
        probes.append(Probe(**p))
    return Problem(
        mesh,
        materials,
        _times(cfg["time"]),
        dirichlet=dirichlet,
        tractions=tractions,
        charges=charges,
        applied_field=applied,
        probes=probes,
        settings=settings_from_dict(cfg.get("solver")),
    )


def is_scenario_config(cfg: dict) -> bool:
    return "scenario" in cfg
