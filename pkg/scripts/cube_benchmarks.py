"""Hard and soft cube runs against their closed-form stretches.

Writes cube_hard_oracle.csv and cube_soft_gent_oracle.csv to the output
directory and prints the worst relative error of each.

    python3 scripts/cube_benchmarks.py [outdir]
"""
import sys
import time
from pathlib import Path

from mapfe.scenarios import Scenario, run_cube_hard, run_cube_soft_gent


def main(outdir="results"):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, runner in [("cube_hard", run_cube_hard), ("cube_soft_gent", run_cube_soft_gent)]:
        t0 = time.perf_counter()
        rep = runner(Scenario(name), outdir)
        worst = max(rep.oracle, key=lambda o: o.rel_error)
        print(f"{name}: {len(rep.oracle)} cases, max rel error {worst.rel_error:.2e} at {worst.inputs}, "
              f"{time.perf_counter() - t0:.1f} s -> {rep.files[0]}")


if __name__ == "__main__":
    main(*sys.argv[1:])
