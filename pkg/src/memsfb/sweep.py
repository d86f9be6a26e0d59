"""Parameter sweeps for the static and dynamic pull-in voltages.

Rows are independent jobs. Results are written in parameter order to
``<out>.partial`` as soon as every earlier row is done, and the file is
renamed to ``<out>`` at the end, so an interrupted sweep resumes from the
rows already on disk and reruns are byte-identical for any worker count.
"""
from __future__ import annotations

import csv
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

from .core import RHS_ALIASES, Params
from .errors import MEMSError
from .evolution import evolve
from .stationary import pull_in_voltage

COLUMNS = ["epsilon", "gamma", "beta", "tau", "lambda_stat", "lambda_dyn", "status"]


@dataclass
class RunConfig:
    model: str = "small_gap"
    epsilons: list[float] = field(default_factory=lambda: [0.5])
    gammas: list[float] = field(default_factory=lambda: [0.0])
    betas: list[float] = field(default_factory=lambda: [0.0])
    taus: list[float] = field(default_factory=lambda: [1.0])
    bc: str = "clamped"
    a: float = 0.0
    n: int = 31
    neta: int | None = None
    dt: float = 2e-3
    T_long: float = 50.0
    resolution: float = 1e-2
    lam_min: float | None = None  # absolute bracket for lambda_dyn; default 0.5 lambda_stat
    lam_max: float | None = None  # default 1.2 lambda_stat
    steady_tol: float = 1e-8
    step: float = 0.05
    max_points: int = 400
    extrapolate: bool = False
    out: str = "sweep.csv"
    workers: int = 1

    def __post_init__(self):
        self.model = RHS_ALIASES.get(self.model, self.model)
        for name in ("epsilons", "gammas", "betas", "taus"):
            if not list(getattr(self, name)):
                raise ValueError(f"{name} must be non-empty")
        if self.lam_min is not None and self.lam_max is not None and not self.lam_min < self.lam_max:
            raise ValueError(f"empty lambda range [{self.lam_min}, {self.lam_max}]")
        if self.resolution <= 0 or self.dt <= 0 or self.T_long <= 0:
            raise ValueError("resolution, dt and T_long must be positive")
        out_dir = os.path.dirname(os.path.abspath(self.out))
        if not os.access(out_dir, os.W_OK):
            raise ValueError(f"output directory {out_dir} is not writable")

    def tuples(self):
        return list(itertools.product(self.epsilons, self.gammas, self.betas, self.taus))


@dataclass
class SweepTable:
    rows: list[dict]
    resolution: float

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            _write(fh, self.rows, header=True)


def _fmt(v):
    return repr(float(v)) if isinstance(v, (int, float)) and not isinstance(v, bool) else str(v)


def _write(fh, rows, header=False):
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in COLUMNS])


def _touches(p: Params, cfg: RunConfig) -> bool:
    tr = evolve(p, cfg.T_long, cfg.dt, n=cfg.n, neta=cfg.neta, steady_tol=cfg.steady_tol, ledger=False)
    return tr.touchdown.touched


def _row(job) -> dict:
    cfg, (eps, gamma, beta, tau) = job
    row = dict(epsilon=eps, gamma=gamma, beta=beta, tau=tau, lambda_stat="nan", lambda_dyn="nan", status="ok")
    try:
        p = Params(epsilon=eps, gamma=gamma, beta=beta, tau=tau, bc=cfg.bc, a=cfg.a, rhs=cfg.model)
        lam_s = pull_in_voltage(p, n=cfg.n, step=cfg.step, max_points=cfg.max_points, neta=cfg.neta,
                                extrapolate=cfg.extrapolate)
        row["lambda_stat"] = lam_s
        lo = cfg.lam_min if cfg.lam_min is not None else 0.5 * lam_s
        hi = cfg.lam_max if cfg.lam_max is not None else 1.2 * lam_s
        if _touches(p.with_(lam=lo), cfg):
            row["status"] = "touchdown_at_lower_bracket"
            row["lambda_dyn"] = lo
            return row
        if not _touches(p.with_(lam=hi), cfg):
            row["status"] = "global_at_upper_bracket"
            row["lambda_dyn"] = hi
            return row
        while hi - lo > cfg.resolution:
            mid = 0.5 * (lo + hi)
            if _touches(p.with_(lam=mid), cfg):
                hi = mid
            else:
                lo = mid
        row["lambda_dyn"] = 0.5 * (lo + hi)
    except (MEMSError, ValueError) as exc:
        row["status"] = f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def _read_partial(path: str, n_expected: int) -> list[dict]:
    if not os.path.exists(path):
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return rows[:n_expected]


def sweep_pull_in(cfg: RunConfig) -> SweepTable:
    """lambda_stat by continuation and lambda_dyn by bisection on touchdown before T_long."""
    tuples = cfg.tuples()
    partial = cfg.out + ".partial"
    done = _read_partial(partial, len(tuples))
    # resume only if the stored rows match the leading parameter tuples
    for r, t in zip(done, tuples):
        if tuple(float(r[c]) for c in ("epsilon", "gamma", "beta", "tau")) != tuple(map(float, t)):
            done = []
            break
    rows: list[dict] = [{c: (r[c] if c == "status" else float(r[c])) for c in COLUMNS} for r in done]
    todo = [(cfg, t) for t in tuples[len(done):]]

    with open(partial, "w", newline="", encoding="utf-8") as fh:
        _write(fh, rows, header=True)
        fh.flush()
        if cfg.workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
                # map yields in submission order, so rows are written in parameter order
                for row in ex.map(_row, todo):
                    rows.append(row)
                    _write(fh, [row])
                    fh.flush()
        else:
            for job in todo:
                row = _row(job)
                rows.append(row)
                _write(fh, [row])
                fh.flush()
        os.fsync(fh.fileno())
    os.replace(partial, cfg.out)
    return SweepTable(rows, cfg.resolution)


# ---------------------------------------------------------------------------
# flat key = value configuration


def _coerce(f, raw: str):
    kind = str(f.type)
    if kind.startswith("list"):
        return [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]
    if kind.startswith("bool"):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if "int" in kind and "None" in kind:
        return None if raw.strip().lower() in ("", "none") else int(raw)
    if "float" in kind and "None" in kind:
        return None if raw.strip().lower() in ("", "none") else float(raw)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw.strip()


def read_config(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def config_from_mapping(values: dict[str, str]) -> RunConfig:
    known = {f.name: f for f in fields(RunConfig)}
    kwargs = {}
    for k, v in values.items():
        if k in known:
            kwargs[k] = _coerce(known[k], v) if isinstance(v, str) else v
    return RunConfig(**kwargs)


def config_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)
