"""Run a pull-in sweep from a key = value config (default: sweep.cfg next to this file)."""
import argparse
import os
from pathlib import Path

from memsfb.sweep import config_from_mapping, read_config, sweep_pull_in


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", nargs="?", default=str(Path(__file__).with_name("sweep.cfg")))
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()
    values = read_config(args.config)
    if args.workers:
        values["workers"] = str(args.workers)
    os.makedirs(os.path.dirname(os.path.abspath(values.get("out", "sweep.csv"))), exist_ok=True)
    tab = sweep_pull_in(config_from_mapping(values))
    for r in tab.rows:
        print(f"eps={r['epsilon']:<5} gamma={r['gamma']:<4} beta={r['beta']:<3} tau={r['tau']:<3} "
              f"lambda_stat={r['lambda_stat']:.5f} lambda_dyn={r['lambda_dyn']:.5f} {r['status']}")


if __name__ == "__main__":
    main()
