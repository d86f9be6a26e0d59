"""Stationary branches for the second-order, clamped and free-boundary models.

Writes one CSV per model (s, lambda, min_u, energies, principal eigenvalue,
stability, fold flag) and prints the fold and endpoint of each branch.
"""
import argparse
from pathlib import Path

from memsfb import Params, continue_branch

MODELS = {
    "membrane_small_gap": Params(rhs="small_gap", beta=0.0, tau=1.0),
    "beam_small_gap": Params(rhs="small_gap", beta=1.0, tau=0.0),
    "free_boundary": Params(rhs="free_boundary", beta=1.0, tau=1.0, epsilon=0.5),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=63)
    ap.add_argument("--step", type=float, default=0.05)
    ap.add_argument("--out-dir", default="results/bifurcation")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, p in MODELS.items():
        n = args.n if p.rhs == "small_gap" else min(args.n, 31)
        d = continue_branch(p, step=args.step, n=n)
        d.to_csv(out / f"{name}.csv")
        print(f"{name:20s} n={n:4d} points={len(d.points):4d} lambda_stat={d.lambda_stat:.8f} "
              f"stop={d.stop_reason} endpoint lambda={d.endpoint['lambda']:.3e} min_u={d.endpoint['min_u']:.5f}")


if __name__ == "__main__":
    main()
