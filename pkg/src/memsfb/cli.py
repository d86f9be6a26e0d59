"""Command-line entry point: ``python -m memsfb <subcommand> [flags]``.

Exit status: 0 on success, 2 on usage errors, 1 on numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from .core import DeflectionField, Grid1D, Params
from .elliptic import compute_g, electrostatic_energy, energy_bounds, potential, write_potential_csv
from .errors import MEMSError
from .evolution import evolve, limit_study_epsilon, limit_study_gamma
from .operators import principal_eigenpair
from .oracles import shooting_oracle
from .stationary import continue_branch, pull_in_voltage, solve_stationary
from .sweep import config_from_mapping, read_config, sweep_pull_in

PARAM_FLAGS = {
    "epsilon": float, "lam": float, "beta": float, "tau": float, "gamma": float, "a": float,
    "bc": str, "rhs": str, "chi": float, "delta": float, "mu": float, "m": float,
}
# config-file spellings accepted for Params fields
KEY_ALIASES = {"eps": "epsilon", "lambda": "lam", "model": "rhs"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(sp: argparse.ArgumentParser):
    sp.add_argument("--config", help="flat key = value file; flags override it")
    sp.add_argument("--model", dest="rhs", help="free_boundary (fb), small_gap (sg), capacitive, fringing, force_law")
    sp.add_argument("--eps", "--epsilon", dest="epsilon", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    for name in ("beta", "tau", "gamma", "a", "chi", "delta", "mu", "m"):
        sp.add_argument(f"--{name}", type=float)
    sp.add_argument("--bc", choices=["clamped", "pinned"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--neta", type=int)
    sp.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="memsfb", description="Electrostatic MEMS free-boundary solver")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("potential", help="solve the potential for a given deflection")
    _common(p)
    p.add_argument("--profile", default="-0.3*(1-x**2)**2", help="deflection as a numpy expression in x")

    p = sub.add_parser("stationary", help="one stationary solve")
    _common(p)

    p = sub.add_parser("continue", help="pseudo-arclength continuation in lambda")
    _common(p)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--max-points", type=int, default=400)
    p.add_argument("--pull-in", action="store_true", help="also refine the fold by bisection")

    p = sub.add_parser("evolve", help="time integration from rest")
    _common(p)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--snapshots", help="CSV for snapshot profiles")

    p = sub.add_parser("eigen", help="principal eigenpair of the beam operator")
    _common(p)

    p = sub.add_parser("limit-eps", help="vanishing aspect ratio study")
    _common(p)
    p.add_argument("--eps-list", default="0.2,0.1,0.05")
    p.add_argument("--T0", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--workers", type=int, default=0)

    p = sub.add_parser("limit-gamma", help="damping dominated limit study")
    _common(p)
    p.add_argument("--gamma-list", default="0.2,0.1,0.05")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--workers", type=int, default=0)

    p = sub.add_parser("sweep", help="static and dynamic pull-in voltages over a parameter grid")
    p.add_argument("--config")
    p.add_argument("--model")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    for name in ("epsilons", "gammas", "betas", "taus"):
        p.add_argument(f"--{name}")
    for name in ("n", "max_points"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int)
    for name in ("dt", "T_long", "resolution", "lam_min", "lam_max"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)

    p = sub.add_parser("oracle", help="shooting oracle for -tau u'' = -lam/(1+u)^2")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--n", type=int, default=127)
    p.add_argument("--out")
    return ap


def _params(ns, defaults: dict | None = None) -> tuple[Params, dict]:
    """Params from (defaults <- config file <- flags); returns leftovers too."""
    merged: dict = dict(defaults or {})
    if getattr(ns, "config", None):
        for k, v in read_config(ns.config).items():
            merged[KEY_ALIASES.get(k, k)] = v
    for k, v in vars(ns).items():
        if v is not None and k not in ("cmd", "config"):
            merged[k] = v
    kw = {}
    for k, cast in PARAM_FLAGS.items():
        if k in merged:
            try:
                kw[k] = cast(merged[k])
            except ValueError as exc:
                raise UsageError(f"--{k}: {exc}") from exc
    try:
        p = Params(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rest = {k: v for k, v in merged.items() if k not in PARAM_FLAGS}
    return p, rest


def _int(rest, key, default):
    v = rest.get(key)
    return default if v is None else int(v)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def _write_profile(path, u):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u"])
        for x, v in zip(u.grid.x, u.values):
            w.writerow([repr(float(x)), repr(float(v))])


def cmd_potential(ns):
    p, rest = _params(ns)
    grid = Grid1D(_int(rest, "n", 63))
    try:
        vals = eval(ns.profile, {"__builtins__": {}}, {"x": grid.x, "np": np, "pi": math.pi,
                                                     "cos": np.cos, "sin": np.sin, "exp": np.exp})
    except Exception as exc:  # noqa: BLE001 - any bad expression is a usage error
        raise UsageError(f"--profile: {exc}") from exc
    try:
        u = DeflectionField.from_function(grid, lambda x: vals)
    except ValueError as exc:
        raise UsageError(f"--profile: {exc}") from exc
    neta = rest.get("neta")
    neta = int(neta) if neta is not None else None
    phi = potential(u, p.epsilon, neta)
    g = compute_g(u, p.epsilon, neta, phi)
    Ee = electrostatic_energy(u, p.epsilon, neta, phi)
    lo, hi = energy_bounds(u, p.epsilon)
    print(f"E_e = {Ee:.10g}  bounds [{lo:.10g}, {hi:.10g}]  g(0) = {g.values[len(g.values) // 2]:.10g}")
    if rest.get("out"):
        base = str(rest["out"])
        write_potential_csv(base + ".phi.csv", base + ".psi.csv", phi, u)
        print(f"wrote {base}.phi.csv and {base}.psi.csv")


def cmd_stationary(ns):
    p, rest = _params(ns)
    bp = solve_stationary(p, n=_int(rest, "n", 127), neta=rest.get("neta") and int(rest["neta"]))
    print(f"lambda = {bp.lam:.10g}  min_u = {bp.min_u:.10g}  Em = {bp.Em:.10g}  Ee = {bp.Ee:.10g}  "
          f"principal_ev = {bp.principal_ev:.10g}  stable = {bp.stable}")
    if rest.get("out"):
        _write_profile(rest["out"], bp.u)


def cmd_continue(ns):
    p, rest = _params(ns)
    n = _int(rest, "n", 127)
    neta = rest.get("neta") and int(rest["neta"])
    d = continue_branch(p, step=ns.step, max_points=ns.max_points, n=n, neta=neta)
    print(f"points = {len(d.points)}  folds = {d.folds}  lambda_stat = {d.lambda_stat}  stop = {d.stop_reason}")
    print(f"endpoint: lambda = {d.endpoint['lambda']:.6g}  min_u = {d.endpoint['min_u']:.6g}")
    if ns.pull_in:
        print(f"pull_in_voltage = {pull_in_voltage(p, n=n, step=ns.step, max_points=ns.max_points, neta=neta):.12g}")
    if rest.get("out"):
        d.to_csv(rest["out"])


def cmd_evolve(ns):
    p, rest = _params(ns)
    tr = evolve(p, ns.T, ns.dt, n=_int(rest, "n", 31), neta=rest.get("neta") and int(rest["neta"]),
                snapshot_every=ns.snapshot_every)
    r = tr.touchdown
    if r.touched:
        print(f"touchdown at t = {r.Tm_estimate:.8g} at x = {r.touchdown_x}")
    else:
        print(f"completed to t = {ns.T:g}: min u = {r.final_min:.8g}")
    print(f"energy balance residual (max) = {tr.ledger.max_residual:.3e}")
    if rest.get("out"):
        tr.ledger.to_csv(rest["out"])
    if ns.snapshots:
        with open(ns.snapshots, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "u"])
            for t, u in tr.samples:
                for x, v in zip(u.grid.x, u.values):
                    w.writerow([repr(float(t)), repr(float(x)), repr(float(v))])


def cmd_eigen(ns):
    p, rest = _params(ns)
    e = principal_eigenpair(p.beta, p.tau, p.bc, Grid1D(_int(rest, "n", 127)))
    print(f"mu1 = {e.mu1:.12g}  iterations = {e.iterations}")
    if rest.get("out"):
        _write_profile(rest["out"], e.zeta1)


def cmd_limit_eps(ns):
    p, rest = _params(ns)
    r = limit_study_epsilon(p, _floats(ns.eps_list), ns.T0, ns.dt, n=_int(rest, "n", 31), workers=ns.workers)
    for i, e in enumerate(r.values):
        print(f"eps = {e:g}  h1 = {r.columns['h1_distance'][i]:.6e}  g = {r.columns['g_distance'][i]:.6e}")
    if rest.get("out"):
        r.to_csv(rest["out"])


def cmd_limit_gamma(ns):
    p, rest = _params(ns)
    r = limit_study_gamma(p, _floats(ns.gamma_list), ns.T, ns.dt, n=_int(rest, "n", 31), workers=ns.workers)
    for i, g in enumerate(r.values):
        print(f"gamma = {g:g}  h2 = {r.columns['h2_distance'][i]:.6e}  phi = {r.columns['phi_distance'][i]:.6e}")
    if rest.get("out"):
        r.to_csv(rest["out"])


def cmd_sweep(ns):
    values = read_config(ns.config) if ns.config else {}
    for k, v in vars(ns).items():
        if v is not None and k not in ("cmd", "config"):
            values[k] = str(v) if not isinstance(v, str) else v
    try:
        cfg = config_from_mapping(values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    tab = sweep_pull_in(cfg)
    for row in tab.rows:
        print(", ".join(f"{k}={row[k]}" for k in row))
    print(f"wrote {cfg.out}")


def cmd_oracle(ns):
    if ns.tau <= 0 or ns.lam < 0:
        raise UsageError("oracle needs --tau > 0 and --lambda >= 0")
    r = shooting_oracle(ns.lam, ns.tau, n=ns.n)
    print(f"fold_lambda = {r.fold_lambda:.12g}")
    print(f"solutions at lambda = {ns.lam:g}: centers u(0) = {[round(m, 12) for m in r.centers]}")
    if ns.out:
        with open(ns.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + [f"u{i}" for i in range(len(r.solutions))])
            for i, x in enumerate(Grid1D(ns.n).x):
                w.writerow([repr(float(x))] + [repr(float(s.values[i])) for s in r.solutions])


COMMANDS = {
    "potential": cmd_potential, "stationary": cmd_stationary, "continue": cmd_continue, "evolve": cmd_evolve,
    "eigen": cmd_eigen, "limit-eps": cmd_limit_eps, "limit-gamma": cmd_limit_gamma, "sweep": cmd_sweep,
    "oracle": cmd_oracle,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        COMMANDS[ns.cmd](ns)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except MEMSError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():  # pragma: no cover
    sys.exit(run_cli())
