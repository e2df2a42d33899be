"""Ramp-hold viscoelastic study of the hard-magnetic pattern.

Prints the time to 95 % of the hyperelastic steady value for every
(mu_v, tau) pair and the relaxation/ordering checks.

    python3 scripts/visco_pattern.py [jobs] [outdir]
"""
import sys
import time
from pathlib import Path

from mapfe.scenarios import visco_checks, viscoelastic_study


def main(jobs=1, outdir="results"):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    out = viscoelastic_study("pattern_hard", csv_path=outdir / "pattern_hard_visco.csv", jobs=int(jobs))
    checks, lag = visco_checks(out, "pattern_hard")
    steady = out["he"][1][-1]
    print(f"hyperelastic steady u_z = {steady:.6g}")
    print("mu_v       tau    t95      final/steady")
    for (mu_v, tau), (t, v) in out["ve"].items():
        print(f"{mu_v:8.0f} {tau:6.2f} {lag[(mu_v, tau)]:8.3f}  {v[-1] / steady:.5f}")
    for key, ok in checks.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {key}")
    print(f"{time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main(*sys.argv[1:])
