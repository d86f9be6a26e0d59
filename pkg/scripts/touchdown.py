"""Dynamics from rest: touchdown above pull-in, convergence to equilibrium below.

Each run writes its energy ledger and a few snapshot profiles.
"""
import argparse
import csv
from pathlib import Path

from memsfb import Params, evolve, fold_lambda, pull_in_voltage


def runs():
    fold = fold_lambda()
    fb = Params(rhs="free_boundary", beta=1.0, tau=1.0, epsilon=0.5)
    fb_fold = pull_in_voltage(fb, n=31, extrapolate=False)
    return {
        "small_gap_above": (Params(rhs="small_gap", beta=0.0, tau=1.0, lam=2 * fold), 5.0),
        "small_gap_below": (Params(rhs="small_gap", beta=0.0, tau=1.0, lam=0.9 * fold), 20.0),
        "free_boundary_membrane": (Params(rhs="free_boundary", beta=0.0, tau=1.0, epsilon=0.5, lam=10.0), 5.0),
        "free_boundary_beam_below": (fb.with_(lam=0.5 * fb_fold), 10.0),
        "free_boundary_beam_damped": (fb.with_(lam=0.9 * fb_fold, gamma=0.5), 10.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=31)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--out-dir", default="results/touchdown")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, (p, T) in runs().items():
        tr = evolve(p, T, args.dt, n=args.n, snapshot_every=max(1, int(0.25 / args.dt)))
        tr.ledger.to_csv(out / f"{name}_ledger.csv")
        with open(out / f"{name}_snapshots.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "u"])
            for t, u in tr.samples:
                w.writerows([repr(float(t)), repr(float(x)), repr(float(v))] for x, v in zip(u.grid.x, u.values))
        r = tr.touchdown
        what = f"touchdown at t={r.Tm_estimate:.6f}, x={r.touchdown_x}" if r.touched else f"global, min u={r.final_min:.6f}"
        print(f"{name:26s} lambda={p.lam:.5f}  {what}  balance residual={tr.ledger.max_residual:.2e}")


if __name__ == "__main__":
    main()
