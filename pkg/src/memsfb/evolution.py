"""Damped evolution gamma^2 u_tt + u_t + A u = -F(u), touchdown and energy.

Time stepping is IMEX in velocity form with w = u_t:

    gamma^2 (w' - w) / dt + w' + A u' = -F(u),   u' = u + dt w',

so that [(gamma^2 + dt) I + dt^2 A] w' = gamma^2 w - dt (A u + F(u)).
For gamma = 0 this is exactly (I + dt A) u' = u - dt F(u).
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import DeflectionField, Grid1D, Params, Profile, d2, h1_seminorm_sq, trapz
from .elliptic import compute_g, default_neta, electrostatic_energy, potential
from .errors import SingularGeometryError, TouchdownError
from .operators import bending_matrix, laplacian_matrix, principal_eigenpair
from .stationary import DELTA_TD, forcing, mechanical_energy

__all__ = [
    "EvolutionState", "TouchdownReport", "EnergyLedger", "Trajectory", "ConvergenceReport", "Stepper",
    "step", "evolve", "energy_total", "singularity_functional", "limit_study_epsilon", "limit_study_gamma",
]


@dataclass(frozen=True, eq=False)
class EvolutionState:
    t: float
    u: DeflectionField
    v: Profile | None = None  # gamma * u_t, only for gamma > 0

    @classmethod
    def at_rest(cls, grid: Grid1D, gamma: float = 0.0, u0: DeflectionField | None = None) -> "EvolutionState":
        u = u0 if u0 is not None else DeflectionField.zeros(grid)
        v = Profile(grid, np.zeros(grid.n + 2)) if gamma > 0 else None
        return cls(0.0, u, v)


@dataclass
class TouchdownReport:
    touched: bool = False
    Tm_estimate: float | None = None
    touchdown_nodes: list[int] = field(default_factory=list)
    touchdown_x: list[float] = field(default_factory=list)
    min_history: list[tuple[float, float]] = field(default_factory=list)
    final_min: float | None = None
    steady: bool = False


@dataclass
class EnergyLedger:
    times: list[float] = field(default_factory=list)
    min_u: list[float] = field(default_factory=list)
    total: list[float] = field(default_factory=list)
    kinetic: list[float] = field(default_factory=list)
    dissipation: list[float] = field(default_factory=list)
    residual: list[float] = field(default_factory=list)

    def record(self, t, umin, E, kin, diss):
        self.times.append(t)
        self.min_u.append(umin)
        self.total.append(E)
        self.kinetic.append(kin)
        self.dissipation.append(diss)
        self.residual.append(abs(E + kin + diss - self.total[0]) if self.total else 0.0)
        if len(self.total) == 1:
            self.residual[0] = 0.0

    @property
    def max_residual(self) -> float:
        return max(self.residual) if self.residual else 0.0

    def max_increase(self) -> float:
        """Largest one-step growth of the total energy."""
        E = np.asarray(self.total)
        return float(np.max(np.diff(E))) if len(E) > 1 else 0.0

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "min_u", "E_total", "kinetic", "dissipation", "balance_residual"])
            for row in zip(self.times, self.min_u, self.total, self.kinetic, self.dissipation, self.residual):
                w.writerow([repr(float(x)) for x in row])


class Trajectory(NamedTuple):
    samples: list  # (t, DeflectionField)
    touchdown: TouchdownReport
    ledger: EnergyLedger


# ---------------------------------------------------------------------------
# stepping


def _l2sq(v: np.ndarray, h: float) -> float:
    return trapz(v * v, h)


def energy_total(u: DeflectionField, p: Params, neta: int | None = None) -> float:
    """E_m(u) - lam E_e(u)."""
    if p.rhs == "free_boundary":
        Ee = electrostatic_energy(u, p.epsilon, neta)
    else:
        Ee = trapz(1.0 / (1.0 + u.values), u.grid.h)
    return mechanical_energy(u, p) - p.lam * Ee


class Stepper:
    """Holds the factorized implicit matrix for one (grid, dt, Params)."""

    def __init__(self, grid: Grid1D, dt: float, p: Params, neta: int | None = None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.grid, self.dt, self.p = grid, dt, p
        self.neta = (neta or default_neta(grid.n)) if p.rhs == "free_boundary" else None
        L = laplacian_matrix(grid)
        self._B = p.beta * bending_matrix(grid, p.bc) if p.beta > 0 else sp.csr_matrix((grid.n, grid.n))
        self._L = L
        self._lu = None if p.a > 0 else self._factor(p.tau)
        self.last_N: np.ndarray | None = None
        self.last_phi = None

    def stiffness(self, u: np.ndarray) -> sp.csr_matrix:
        tension = self.p.tau
        if self.p.a > 0:
            tension += self.p.a * h1_seminorm_sq(np.concatenate([[0.0], u, [0.0]]), self.grid.h)
        return self._B - tension * self._L, tension

    def _factor(self, tension: float):
        K = self._B - tension * self._L
        g2, dt = self.p.gamma**2, self.dt
        M = (g2 + dt) * sp.identity(self.grid.n) + dt * dt * K
        return spla.splu(sp.csc_matrix(M))

    def forcing(self, u: DeflectionField) -> np.ndarray:
        """F(u) with the potential kept for the energy of the same state."""
        p = self.p
        if p.rhs == "free_boundary":
            self.last_phi = potential(u, p.epsilon, self.neta)
            g = compute_g(u, p.epsilon, self.neta, self.last_phi)
            self.last_N = g.interior.copy()
            return p.lam * self.last_N
        f = forcing(u, p)
        self.last_N = f.dlam
        return f.value

    def electrostatic(self, u: DeflectionField) -> float:
        p = self.p
        if p.rhs == "free_boundary":
            return electrostatic_energy(u, p.epsilon, self.neta, self.last_phi)
        return trapz(1.0 / (1.0 + u.values), u.grid.h)

    def advance(self, state: EvolutionState, dt: float | None = None, F: np.ndarray | None = None,
                delta_td: float = DELTA_TD) -> tuple[EvolutionState, np.ndarray]:
        """One IMEX step; returns the new state and w' = (u' - u) / dt."""
        dt = self.dt if dt is None else dt
        p = self.p
        u = state.u.interior
        if F is None:
            F = self.forcing(state.u)
        K, tension = self.stiffness(u)
        w = state.v.interior / p.gamma if (p.gamma > 0 and state.v is not None) else np.zeros_like(u)
        rhs = p.gamma**2 * w - dt * (K @ u + F)
        if dt == self.dt and self._lu is not None:
            w_new = self._lu.solve(rhs)
        else:
            M = (p.gamma**2 + dt) * sp.identity(self.grid.n) + dt * dt * K
            w_new = spla.spsolve(sp.csc_matrix(M), rhs)
        u_new = u + dt * w_new
        if not np.all(np.isfinite(u_new)) or u_new.min() <= -1.0 + delta_td:
            raise TouchdownError(f"step to t = {state.t + dt:.6g} crosses min u <= -1 + {delta_td}")
        vals = np.zeros(self.grid.n + 2)
        vals[1:-1] = u_new
        v = None
        if p.gamma > 0:
            vv = np.zeros(self.grid.n + 2)
            vv[1:-1] = p.gamma * w_new
            v = Profile(self.grid, vv)
        return EvolutionState(state.t + dt, DeflectionField(self.grid, vals), v), w_new


def step(state: EvolutionState, dt: float, p: Params, neta: int | None = None) -> EvolutionState:
    """Single IMEX step (builds a fresh Stepper; use ``evolve`` for loops)."""
    return Stepper(state.u.grid, dt, p, neta).advance(state)[0]


# ---------------------------------------------------------------------------
# trajectories


def evolve(p: Params, T: float, dt: float, n: int = 63, neta: int | None = None,
           u0: DeflectionField | None = None, snapshot_every: int = 0, delta_td: float = DELTA_TD,
           steady_tol: float | None = None, ledger: bool = True) -> Trajectory:
    """Integrate from rest (or ``u0``) until t = T or touchdown.

    ``steady_tol`` ends the run early once max |u_t| drops below it
    (reported as ``touchdown.steady``). ``snapshot_every`` > 0 keeps every
    k-th state in ``samples``; the first and last states are always kept.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    grid = u0.grid if u0 is not None else Grid1D(n)
    st = Stepper(grid, dt, p, neta)
    state = EvolutionState.at_rest(grid, p.gamma, u0)
    report = TouchdownReport()
    book = EnergyLedger()
    samples = [(0.0, state.u)]
    diss = 0.0
    nsteps = int(math.ceil(T / dt - 1e-9))
    h = grid.h

    F = st.forcing(state.u)
    if ledger:
        book.record(0.0, state.u.min, mechanical_energy(state.u, p) - p.lam * st.electrostatic(state.u), 0.0, 0.0)
    report.min_history.append((0.0, state.u.min))
    for k in range(1, nsteps + 1):
        dtk = min(dt, T - state.t) if k == nsteps else dt
        try:
            new, w = st.advance(state, dtk, F, delta_td)
        except TouchdownError:
            _bisect_touchdown(st, state, F, dtk, delta_td, report)
            break
        state = new
        diss += dtk * _l2sq(np.concatenate([[0.0], w, [0.0]]), h)
        try:
            F = st.forcing(state.u)
        except SingularGeometryError:
            report.touched = True
            report.Tm_estimate = state.t
            _mark_nodes(state.u, report)
            break
        if ledger:
            kin = 0.5 * p.gamma**2 * _l2sq(np.concatenate([[0.0], w, [0.0]]), h)
            book.record(state.t, state.u.min, mechanical_energy(state.u, p) - p.lam * st.electrostatic(state.u),
                        kin, diss)
        report.min_history.append((state.t, state.u.min))
        if snapshot_every and k % snapshot_every == 0:
            samples.append((state.t, state.u))
        if steady_tol is not None and np.max(np.abs(w)) < steady_tol:
            report.steady = True
            break
    if samples[-1][1] is not state.u:
        samples.append((state.t, state.u))
    report.final_min = state.u.min
    return Trajectory(samples, report, book)


def _mark_nodes(u: DeflectionField, report: TouchdownReport):
    vals = u.values
    nodes = np.flatnonzero(vals <= vals.min() + 1e-9 * max(1.0, abs(vals.min())))
    report.touchdown_nodes = [int(i) for i in nodes]
    report.touchdown_x = [float(u.grid.x[i]) for i in nodes]


def _bisect_touchdown(st: Stepper, state: EvolutionState, F, dt, delta_td, report: TouchdownReport):
    """Shrink the last step until it just reaches -1 + delta_td."""
    lo, hi = 0.0, dt
    crossing = None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        try:
            st.advance(state, mid, F, delta_td)
            lo = mid
        except TouchdownError:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, state.t):
            break
    # the state just past the threshold identifies the touchdown nodes
    crossing, _ = st.advance(state, hi, F, delta_td=-np.inf)
    report.touched = True
    report.Tm_estimate = state.t + hi
    report.min_history.append((state.t + hi, crossing.u.min))
    _mark_nodes(crossing.u, report)


# ---------------------------------------------------------------------------
# singularity functional


@lru_cache(maxsize=16)
def _phi1(n: int) -> np.ndarray:
    return principal_eigenpair(0.0, 1.0, "clamped", Grid1D(n)).zeta1.values


def singularity_functional(u: Profile, alpha: float = 0.0) -> float:
    """E_alpha(u) = int phi1 (u + alpha u^2 / 2) with phi1 the L1-normalized
    principal eigenfunction of -d_x^2."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    v = u.values
    return trapz(_phi1(u.grid.n) * (v + 0.5 * alpha * v * v), u.grid.h)


# ---------------------------------------------------------------------------
# limit studies


@dataclass
class ConvergenceReport:
    parameter: str
    values: list[float]
    columns: dict[str, list[float]]
    baseline: dict = field(default_factory=dict)

    def strictly_decreasing(self, name: str) -> bool:
        c = self.columns[name]
        return all(b < a for a, b in zip(c, c[1:]))

    def order(self, name: str) -> float:
        """Least-squares slope of log(error) against log(parameter)."""
        x, y = np.log(self.values), np.log(self.columns[name])
        return float(np.polyfit(x, y, 1)[0])

    def to_csv(self, path):
        names = list(self.columns)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([self.parameter] + names)
            for i, val in enumerate(self.values):
                w.writerow([repr(val)] + [repr(self.columns[k][i]) for k in names])


def _run_member(args):
    p, T, dt, n, neta, want_phi = args
    grid = Grid1D(n)
    st = Stepper(grid, dt, p, neta)
    state = EvolutionState.at_rest(grid, p.gamma)
    nsteps = int(round(T / dt))
    us, Ns, phis = [], [], []
    for k in range(nsteps + 1):
        F = st.forcing(state.u)
        us.append(state.u.values.copy())
        Ns.append(st.last_N.copy())
        if want_phi:
            phis.append(None if st.last_phi is None else st.last_phi.values.copy())
        if k < nsteps:
            state, _ = st.advance(state, None, F)
    return np.array(us), np.array(Ns), phis


def _map(fn, jobs, workers: int):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def _h1_dist(a: np.ndarray, b: np.ndarray, h: float) -> float:
    d = a - b
    return math.sqrt(trapz(d * d, h) + h1_seminorm_sq(d, h))


def _h2_dist(a: np.ndarray, b: np.ndarray, h: float) -> float:
    d = a - b
    dxx = d2(d, h)
    return math.sqrt(trapz(d * d, h) + h1_seminorm_sq(d, h) + trapz(dxx * dxx, h))


def _phi_dist(P: np.ndarray | None, Q: np.ndarray | None, hx: float, heta: float) -> float:
    if P is None or Q is None:
        return 0.0
    D = (P - Q) ** 2
    return math.sqrt(trapz(np.array([trapz(row, heta) for row in D]), hx))


def limit_study_epsilon(p: Params, eps_list, T0: float, dt: float, n: int = 31, neta: int | None = None,
                        workers: int = 0) -> ConvergenceReport:
    """sup_t H1 distance to the small-gap trajectory and sup_t |g_eps - (1+u)^-2|_2."""
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing positives")
    h = Grid1D(n).h
    jobs = [(p.with_(rhs="small_gap"), T0, dt, n, None, False)]
    jobs += [(p.with_(rhs="free_boundary", epsilon=e), T0, dt, n, neta, False) for e in eps_list]
    runs = _map(_run_member, jobs, workers)
    u0 = runs[0][0]
    herr, gerr = [], []
    for us, Ns, _ in runs[1:]:
        herr.append(max(_h1_dist(a, b, h) for a, b in zip(us, u0)))
        sg = (1.0 + us[:, 1:-1]) ** -2
        d = np.zeros((len(us), n + 2))
        d[:, 1:-1] = Ns - sg
        gerr.append(max(math.sqrt(trapz(r * r, h)) for r in d))
    return ConvergenceReport("epsilon", eps_list, {"h1_distance": herr, "g_distance": gerr})


def limit_study_gamma(p: Params, gamma_list, T: float, dt: float, n: int = 31, neta: int | None = None,
                      workers: int = 0) -> ConvergenceReport:
    """sup_t H2 distance to the gamma = 0 trajectory and sup_t L2 distance of Phi."""
    gamma_list = [float(g) for g in gamma_list]
    if not gamma_list or any(g <= 0 for g in gamma_list) or any(b >= a for a, b in zip(gamma_list, gamma_list[1:])):
        raise ValueError("gamma_list must be strictly decreasing positives")
    if p.beta <= 0:
        raise ValueError("the damping-dominated limit needs beta > 0")
    grid = Grid1D(n)
    h = grid.h
    ne = (neta or default_neta(n))
    heta = 1.0 / (ne + 1)
    jobs = [(p.with_(gamma=0.0), T, dt, n, neta, True)] + [(p.with_(gamma=g), T, dt, n, neta, True) for g in gamma_list]
    runs = _map(_run_member, jobs, workers)
    u0, _, phi0 = runs[0]
    hd, pd = [], []
    for us, _, phis in runs[1:]:
        hd.append(max(_h2_dist(a, b, h) for a, b in zip(us, u0)))
        pd.append(max(_phi_dist(P, Q, h, heta) for P, Q in zip(phis, phi0)))
    return ConvergenceReport("gamma", gamma_list, {"h2_distance": hd, "phi_distance": pd})
