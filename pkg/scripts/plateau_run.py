"""Plateau instance: a certified global minimizer whose range avoids the ball
of radius rho - LT, compared with the zero path.

    python3 scripts/plateau_run.py --rho 0.8
"""
import argparse
from pathlib import Path

from relosc.config import write_json
from relosc.model import preset
from relosc.multiplicity import ScanOptions, theorem32_driver
from relosc.optimizer import MinimizeOptions


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--rho", type=float, default=0.8)
    ap.add_argument("--L", type=float, default=0.5)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--starts", type=int, default=20)
    ap.add_argument("--out", default="runs/plateau")
    args = ap.parse_args()

    inst = preset("theorem-3.2", rho=args.rho, L=args.L, p=args.p)
    res = theorem32_driver(inst, ScanOptions(minimize=MinimizeOptions(), starts=args.starts))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "result.json", res.to_dict())
    print(f"status {res.status}")
    if res.minimum is not None:
        (out / "minimizer.csv").write_text(res.minimum.path.to_csv())
        print(f"lambda {res.lam:.6g}: min|u| = {res.min_norm:.6f} > {res.threshold:.3f}")
        print(f"I(minimizer) = {res.minimum.value:.10f} < I(0) = {res.zero_energy:.10f}")


if __name__ == "__main__":
    main()
