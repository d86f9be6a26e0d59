"""Vanishing aspect ratio and damping-dominated limits of the dynamics."""
import argparse
from pathlib import Path

from memsfb import Params, limit_study_epsilon, limit_study_gamma


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--n", type=int, default=31)
    ap.add_argument("--workers", type=int, default=0)
    ap.add_argument("--out-dir", default="results/limits")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = Params(rhs="free_boundary", beta=1.0, tau=1.0, epsilon=0.5, lam=args.lam)

    eps = limit_study_epsilon(p, [0.4, 0.2, 0.1, 0.05], args.T, args.dt, n=args.n, workers=args.workers)
    eps.to_csv(out / "epsilon.csv")
    for name in eps.columns:
        print(f"eps study   {name:12s} {['%.3e' % v for v in eps.columns[name]]} order {eps.order(name):.2f}")

    gam = limit_study_gamma(p, [0.4, 0.2, 0.1, 0.05], args.T, args.dt, n=args.n, workers=args.workers)
    gam.to_csv(out / "gamma.csv")
    for name in gam.columns:
        print(f"gamma study {name:12s} {['%.3e' % v for v in gam.columns[name]]} order {gam.order(name):.2f}")


if __name__ == "__main__":
    main()
