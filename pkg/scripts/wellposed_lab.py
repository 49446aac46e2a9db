"""Level-set minimization by scalarization on the two lab problems.

    python3 scripts/wellposed_lab.py
"""
import argparse
import math
from pathlib import Path

import numpy as np

from relosc.config import write_json
from relosc.wellposed import (LevelOptions, alpha_beta, continuity_probe, level_minimize,
                              quadratic_lab, symmetric_lab, wellposedness_probe)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=32)
    ap.add_argument("--out", default="runs/wellposed")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    q = quadratic_lab()
    ab = alpha_beta(q)
    print(f"quadratic: alpha = {ab.alpha:g}, beta = {ab.beta:g}")
    for r in (0.25, 1.0, 4.0):
        lm = level_minimize(q, r, LevelOptions(), ab)
        print(f"  r = {r:5g}: x_hat = {np.array2string(lm.x_hat, precision=9)}, "
              f"lambda_hat = {lm.lambda_hat:.9f} (exact {1 / (2 * math.sqrt(r)):.9f})")
    grid = np.linspace(0.25, 4.0, 16)
    cont = continuity_probe(q, grid, LevelOptions(), ab)
    (out / "quadratic_continuity.csv").write_text(cont.to_csv())
    probe = wellposedness_probe(q, 1.0, args.trials, ab=ab)
    (out / "quadratic_probe.csv").write_text(probe.to_csv())
    print(f"  continuity: max |dx/dr| {cont.max_jump_x:.4f}, discontinuity {cont.discontinuity}")
    print(f"  probe at r=1: max distances {['%.1e' % d for d in probe.max_distance]}, "
          f"well posed {probe.well_posed}")

    s = symmetric_lab()
    abs_ = alpha_beta(s)
    sprobe = wellposedness_probe(s, 1.0, args.trials, ab=abs_)
    (out / "symmetric_probe.csv").write_text(sprobe.to_csv())
    print(f"symmetric: alpha = {abs_.alpha:g}, beta = {abs_.beta:g}; x_hat from {sprobe.source}")
    print(f"  probe at r=1: max distances {['%.2f' % d for d in sprobe.max_distance]}, "
          f"well posed {sprobe.well_posed}")
    write_json(out / "summary.json", {"quadratic": {"alpha_beta": ab.to_dict(),
                                                     "probe": probe.to_dict()},
                                       "symmetric": {"alpha_beta": abs_.to_dict(),
                                                     "probe": sprobe.to_dict()}})


if __name__ == "__main__":
    main()
