"""Tip displacement of the hard-magnetic cantilever on successively refined meshes.

    python3 scripts/beam_convergence.py [max_level] [outdir]
"""
import sys
import time
from pathlib import Path

import numpy as np

from mapfe.scenarios import beam_hard_problem, load_manifest, newton_checks
from mapfe.solver import run_schedule


def main(max_level=3, outdir="results"):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    prm = load_manifest()["beam_hard"]
    tips = []
    print("level  dofs     u_x        u_y      |J-1|max  mean_it  ratio  wall[s]")
    for level in range(1, int(max_level) + 1):
        t0 = time.perf_counter()
        res = run_schedule(beam_hard_problem(prm, level), csv_path=outdir / f"beam_hard_M{level}.csv")
        checks, mean_it = newton_checks(res)
        tip = np.array([res.probes["u_x"][-1], res.probes["u_y"][-1]])
        tips.append(tip)
        dev = max(abs(res.probes["J_min"][-1] - 1), abs(res.probes["J_max"][-1] - 1))
        print(f"M{level}  {res.model.dofs.ndof:7d} {tip[0]:10.5f} {tip[1]:10.5f} {dev:9.2e} {mean_it:7.2f}  "
              f"{checks['newton_quadratic']!s:5}  {time.perf_counter() - t0:7.1f}")
    for a in range(len(tips) - 1):
        d = np.linalg.norm(tips[a] - tips[a + 1])
        print(f"|M{a + 1}-M{a + 2}| = {d:.5f} ({d / np.linalg.norm(tips[a + 1]):.3%})")


if __name__ == "__main__":
    main(*sys.argv[1:])
