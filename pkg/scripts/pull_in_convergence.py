"""Pull-in voltage under grid refinement and as the aspect ratio shrinks.

Part one compares continuation folds at several n (raw and Richardson
extrapolated) with the shooting oracle for -u'' = -lam / (1 + u)^2.
Part two tracks the free-boundary pull-in voltage for decreasing eps.
"""
import argparse
import csv
from pathlib import Path

from memsfb import Params, fold_lambda, pull_in_voltage


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", default="15,31,63,127")
    ap.add_argument("--eps", default="0.4,0.2,0.1,0.05")
    ap.add_argument("--eps-n", type=int, default=15)
    ap.add_argument("--out-dir", default="results/pull_in")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    ref = fold_lambda()
    sg = Params(rhs="small_gap", beta=0.0, tau=1.0)
    print(f"shooting fold = {ref:.13f}")
    with open(out / "grid_refinement.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "raw", "extrapolated", "raw_rel_error", "extrapolated_rel_error"])
        for n in map(int, args.grids.split(",")):
            raw = pull_in_voltage(sg, n=n, extrapolate=False)
            ext = pull_in_voltage(sg, n=n)
            w.writerow([n, repr(raw), repr(ext), repr(abs(raw - ref) / ref), repr(abs(ext - ref) / ref)])
            print(f"n={n:4d} raw={raw:.10f} ({abs(raw - ref) / ref:.1e})  extrapolated={ext:.12f} ({abs(ext - ref) / ref:.1e})")

    base = pull_in_voltage(sg, n=args.eps_n, extrapolate=False)
    with open(out / "aspect_ratio.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "lambda_stat", "difference_to_small_gap"])
        for e in map(float, args.eps.split(",")):
            lam = pull_in_voltage(sg.with_(rhs="free_boundary", epsilon=e), n=args.eps_n, extrapolate=False)
            w.writerow([e, repr(lam), repr(lam - base)])
            print(f"eps={e:5.3f} lambda_stat={lam:.8f} difference={lam - base:+.3e}")


if __name__ == "__main__":
    main()
