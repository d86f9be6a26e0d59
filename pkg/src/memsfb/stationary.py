"""Stationary deflections, pseudo-arclength continuation and pull-in detection.

The discrete problem on the interior nodes is

    R(u, lam) = A u + F(u, lam) = 0,

with A the beam operator (plus self-stretching when a > 0) and F the
electrostatic forcing of the chosen right-hand-side kind. Newton and the
arclength corrector measure convergence on A0^{-1} R, where A0 is the linear
beam operator: the raw residual carries roundoff of size |A| eps ~ h^-4 eps.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .core import DeflectionField, Grid1D, Params, Profile, d1, h1_seminorm_sq, interpolate, trapz
from .elliptic import TOUCHDOWN_GUARD, compute_g, default_neta, electrostatic_energy, g_and_jacobian
from .errors import ContinuationError, ConvergenceError, SingularGeometryError
from .operators import BeamOperator, bending_matrix, inverse_iteration, laplacian_matrix, richardson

NEWTON_TOL = 1e-10
DELTA_TD = 1e-3


# ---------------------------------------------------------------------------
# forcing terms


class Forcing(NamedTuple):
    value: np.ndarray  # F(u, lam) on interior nodes
    dlam: np.ndarray  # dF/dlam
    jac: np.ndarray | None  # dF/du (dense n x n)


def _check(u: Profile, guard: float = TOUCHDOWN_GUARD):
    if not float(u.values.min()) > -1.0 + guard:
        raise SingularGeometryError(f"min u = {u.values.min():.6g} too close to touchdown")


def forcing(u: DeflectionField, p: Params, jac: bool = False, neta: int | None = None,
            lam: float | None = None) -> Forcing:
    """Electrostatic forcing lam N(u) (+ the force-law term) at interior nodes.

    ``lam`` overrides ``p.lam`` (the arclength corrector may probe lam < 0).
    """
    lam = p.lam if lam is None else lam
    _check(u)
    v = u.interior
    w = 1.0 + v
    n = len(v)
    J = None
    if p.rhs == "free_boundary":
        if jac:
            g, dN, _ = g_and_jacobian(u, p.epsilon, neta)
        else:
            g, dN = compute_g(u, p.epsilon, neta), None
        N = g.interior.copy()
    elif p.rhs in ("small_gap", "force_law"):
        N = w**-2
        dN = np.diag(-2 * w**-3) if jac else None
    elif p.rhs == "capacitive":
        h = u.grid.h
        D = 1.0 + p.chi * trapz(1.0 / (1.0 + u.values), h)
        N = w**-2 / D
        if jac:
            dD = -p.chi * h * w**-2
            dN = np.diag(-2 * w**-3 / D) - np.outer(N / D, dD)
    elif p.rhs == "fringing":
        h = u.grid.h
        ux = d1(u.values, h)[1:-1]
        fac = 1.0 + p.delta * ux**2
        N = fac * w**-2
        if jac:
            dN = np.diag(-2 * fac * w**-3)
            c = 2 * p.delta * ux * w**-2 / (2 * h)
            idx = np.arange(n)
            dN[idx[:-1], idx[:-1] + 1] += c[:-1]
            dN[idx[1:], idx[1:] - 1] -= c[1:]
    else:  # pragma: no cover - Params validates rhs
        raise ValueError(p.rhs)
    F = lam * N
    if jac:
        J = lam * dN
    if p.rhs == "force_law" and p.mu > 0:
        F = F + p.mu * w**-p.m
        if jac:
            J = J + np.diag(-p.m * p.mu * w ** (-p.m - 1))
    return Forcing(F, N, J)


# ---------------------------------------------------------------------------
# linear part


def stiffness(grid: Grid1D, p: Params, u: np.ndarray | None = None):
    """Matrix of the mechanical operator at ``u`` and its Jacobian there.

    Returns (K, dK): K u is the mechanical force and dK its derivative;
    they differ only through the self-stretching rank-one term.
    """
    h = grid.h
    L = laplacian_matrix(grid).toarray()
    B = bending_matrix(grid, p.bc).toarray() if p.beta > 0 else 0.0
    s = 0.0
    if p.a > 0 and u is not None:
        full = np.concatenate([[0.0], u, [0.0]])
        s = h1_seminorm_sq(full, h)
    K = p.beta * B - (p.tau + p.a * s) * L
    if p.a > 0 and u is not None:
        Lu = L @ u
        dK = K + p.a * np.outer(-Lu, -2 * h * Lu)
    else:
        dK = K
    return K, dK


def linear_operator(grid: Grid1D, p: Params) -> BeamOperator:
    if p.beta == 0 and p.tau == 0:
        raise ValueError("(beta, tau) must not both vanish")
    return BeamOperator(grid, p.beta, p.tau, p.bc)


def stationary_residual(u: DeflectionField, p: Params, neta: int | None = None) -> Profile:
    """A u + lam N(u) on interior nodes, zero at the ends."""
    K, _ = stiffness(u.grid, p, u.interior)
    out = np.zeros(u.grid.n + 2)
    out[1:-1] = K @ u.interior + forcing(u, p, neta=neta).value
    return Profile(u.grid, out)


def scaled_residual_norm(u: DeflectionField, p: Params, neta: int | None = None) -> float:
    """max |A0^{-1} R(u)|, the quantity Newton drives below NEWTON_TOL."""
    op = linear_operator(u.grid, p)
    return float(np.max(np.abs(op.solve(stationary_residual(u, p, neta).interior))))


# ---------------------------------------------------------------------------
# energies


def mechanical_energy(u: Profile, p: Params) -> float:
    """(beta/2)|u_xx|^2 + (tau/2)|u_x|^2 + (a/4)|u_x|^4 in the discrete form
    that is consistent with the operator matrix (summation by parts)."""
    h = u.grid.h
    v = u.interior
    s = h1_seminorm_sq(u.values, h)
    em = 0.5 * p.tau * s + 0.25 * p.a * s * s
    if p.beta > 0:
        em += 0.5 * p.beta * h * float(v @ (bending_matrix(u.grid, p.bc) @ v))
    return em


def electrostatic_energy_of(u: DeflectionField, p: Params, neta: int | None = None) -> float:
    """E_e for the selected model; every vanishing-aspect kind uses int 1/(1+u)."""
    if p.rhs == "free_boundary":
        return electrostatic_energy(u, p.epsilon, neta)
    return trapz(1.0 / (1.0 + u.values), u.grid.h)


# ---------------------------------------------------------------------------
# Newton


@dataclass(frozen=True, eq=False)
class BranchPoint:
    s: float
    lam: float
    u: DeflectionField
    min_u: float
    Em: float
    Ee: float
    principal_ev: float = math.nan
    stable: bool | None = None
    residual: float = math.nan
    fold: bool = False

    @property
    def lambda_(self) -> float:
        return self.lam


def _newton_system(v: np.ndarray, grid: Grid1D, p: Params, neta, lam: float | None = None):
    u = DeflectionField.from_interior(grid, v)
    F = forcing(u, p, jac=True, neta=neta, lam=lam)
    K, dK = stiffness(grid, p, v)
    return K @ v + F.value, dK + F.jac, F.dlam


def _admissible(v: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(v))) and float(v.min()) > -1.0 + TOUCHDOWN_GUARD


def newton(v0: np.ndarray, grid: Grid1D, p: Params, neta=None, tol: float = NEWTON_TOL, maxiter: int = 40):
    """Damped Newton on R(., lam) = 0 from interior values ``v0``."""
    op = linear_operator(grid, p)
    v = np.array(v0, dtype=float)
    R, J, _ = _newton_system(v, grid, p, neta)
    r = np.max(np.abs(op.solve(R)))
    for _ in range(maxiter):
        if r < tol:
            return v, r
        dv = np.linalg.solve(J, -R)
        t = 1.0
        while True:
            trial = v + t * dv
            if _admissible(trial):
                Rt, Jt, _ = _newton_system(trial, grid, p, neta)
                rt = np.max(np.abs(op.solve(Rt)))
                if rt < r or t < 1e-3:
                    break
            t *= 0.5
            if t < 1e-4:
                raise ConvergenceError("Newton line search failed (lam likely beyond the solvable range)")
        v, R, J, r = trial, Rt, Jt, rt
    if r < tol:
        return v, r
    raise ConvergenceError(f"Newton did not converge: scaled residual {r:.3e}")


def _neta_for(grid: Grid1D, p: Params, neta):
    return (neta or default_neta(grid.n)) if p.rhs == "free_boundary" else None


def make_point(v: np.ndarray, grid: Grid1D, p: Params, s: float = 0.0, neta=None,
               stability: bool = True, residual: float = math.nan) -> BranchPoint:
    u = DeflectionField.from_interior(grid, v)
    bp = BranchPoint(s, p.lam, u, u.min, mechanical_energy(u, p), electrostatic_energy_of(u, p, neta),
                     residual=residual)
    if stability:
        ev = linearized_stability(bp, p, neta)
        bp = replace(bp, principal_ev=ev, stable=ev > 0)
    return bp


def solve_stationary(p: Params, guess: DeflectionField | None = None, n: int = 127, neta: int | None = None,
                     stability: bool = True) -> BranchPoint:
    """Damped Newton solve of the stationary equation at ``p.lam``."""
    if p.lam < 0:
        raise ValueError("lam must be non-negative")
    grid = guess.grid if guess is not None else Grid1D(n)
    neta = _neta_for(grid, p, neta)
    v0 = guess.interior if guess is not None else np.zeros(grid.n)
    v, r = newton(v0, grid, p, neta)
    return make_point(v, grid, p, neta=neta, stability=stability, residual=r)


class Revalidation(NamedTuple):
    raw: float  # scaled residual of the interpolated solution on the refined grid
    polished: float  # scaled residual after Newton on the refined grid
    correction: float  # max |polished - interpolated|


def revalidate(bp: BranchPoint, p: Params, neta: int | None = None) -> Revalidation:
    """Check ``bp`` on the grid with 2n + 1 interior nodes."""
    p = p.with_(lam=bp.lam)
    fine = bp.u.grid.refined()
    fneta = _neta_for(fine, p, 2 * neta + 1 if neta else None)
    guess = DeflectionField(fine, interpolate(bp.u, fine), check=False)
    raw = scaled_residual_norm(guess, p, fneta)
    v, r = newton(guess.interior, fine, p, fneta)
    return Revalidation(raw, float(r), float(np.max(np.abs(v - guess.interior))))


def linearized_stability(bp: BranchPoint, p: Params, neta: int | None = None) -> float:
    """Leftmost eigenvalue of the Newton Jacobian A + lam dN at ``bp``.

    The shift mu1(A) - |lam dN|_2 is a lower bound for the spectrum, so
    inverse iteration from there picks the principal eigenvalue.
    """
    grid = bp.u.grid
    p = p.with_(lam=bp.lam)
    neta = _neta_for(grid, p, neta)
    F = forcing(bp.u, p, jac=True, neta=neta)
    _, dK = stiffness(grid, p, bp.u.interior)
    J = dK + F.jac
    op = linear_operator(grid, p)
    mu1, _, _ = inverse_iteration(op.matrix, 0.0, rtol=1e-10)
    pert = float(np.linalg.norm(J - op.dense(), 2))
    shift = mu1 - pert - 1e-3 * (1.0 + abs(mu1))
    ev, _, _ = inverse_iteration(J, shift, rtol=1e-12, maxiter=20000)
    return ev


# ---------------------------------------------------------------------------
# continuation


@dataclass
class BranchDiagram:
    points: list[BranchPoint] = field(default_factory=list)
    folds: list[int] = field(default_factory=list)
    lambda_stat: float | None = None
    stop_reason: str = ""
    endpoint: dict = field(default_factory=dict)

    @property
    def lams(self) -> np.ndarray:
        return np.array([bp.lam for bp in self.points])

    @property
    def mins(self) -> np.ndarray:
        return np.array([bp.min_u for bp in self.points])

    def crossings(self, lam: float) -> int:
        """How many branch segments pass through ``lam``."""
        L = self.lams - lam
        return int(np.sum(L[:-1] * L[1:] < 0))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "lambda", "min_u", "Em", "Ee", "principal_ev", "stable", "fold_flag"])
            for bp in self.points:
                nums = (bp.s, bp.lam, bp.min_u, bp.Em, bp.Ee, bp.principal_ev)
                w.writerow([repr(float(x)) for x in nums] + [int(bool(bp.stable)), int(bp.fold)])


def _wnorm(du: np.ndarray, dl: float, h: float, theta: float) -> float:
    return math.sqrt(h * float(du @ du) + (theta * dl) ** 2)


def continue_branch(p: Params, step: float = 0.05, max_points: int = 400, n: int = 127, neta: int | None = None,
                    stability: bool = True, delta_td: float = DELTA_TD, lam_floor: float = 0.0,
                    min_step: float | None = None, stop_after_folds: int | None = None) -> BranchDiagram:
    """Pseudo-arclength continuation in lam from (0, 0).

    Secant predictor, bordered Newton corrector, step halving on failure.
    Stops at ``max_points``, when min u < -1 + delta_td, when lam drops
    below ``lam_floor`` after a fold, or after ``stop_after_folds`` folds.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    grid = Grid1D(n)
    neta = _neta_for(grid, p, neta)
    h = grid.h
    op = linear_operator(grid, p)
    mu1 = inverse_iteration(op.matrix, 0.0, rtol=1e-10)[0]
    theta = 1.0 / mu1  # lam is measured in units of mu1
    min_step = min_step if min_step is not None else step * 2.0**-14

    p0 = p.with_(lam=0.0)
    v = np.zeros(grid.n)
    diag = BranchDiagram()
    diag.points.append(make_point(v, grid, p0, 0.0, neta, stability, 0.0))

    # initial tangent: d u / d lam = -J^{-1} N at lam = 0
    _, J, N = _newton_system(v, grid, p0, neta)
    tu = np.linalg.solve(J, -N)
    tl = 1.0
    nrm = _wnorm(tu, tl, h, theta)
    tu, tl = tu / nrm, tl / nrm

    lam, s, ds = 0.0, 0.0, step
    eu, el = tu, tl  # exact tangent at the current point
    prev_dl = tl
    while len(diag.points) < max_points:
        while True:
            if ds < min_step:
                raise ContinuationError(f"corrector failed below minimum step at lam = {lam:.6g}")
            vp, lp = v + ds * tu, lam + ds * tl
            try:
                vn, ln, iters, M = _corrector(vp, lp, tu, tl, grid, p, neta, h, theta, op)
            except (ConvergenceError, SingularGeometryError, np.linalg.LinAlgError):
                ds *= 0.5
                continue
            du, dl = vn - v, ln - lam
            arc = _wnorm(du, dl, h, theta)
            # a secant far from the local tangent means the corrector jumped
            if (h * float(du @ eu) + theta**2 * dl * el) / arc < 0.8:
                ds *= 0.5
                continue
            break
        s += arc
        v, lam = vn, float(ln)
        tu, tl = du / arc, dl / arc
        rhs = np.zeros(grid.n + 1)
        rhs[-1] = 1.0
        t = np.linalg.solve(M, rhs)
        nrm = _wnorm(t[:-1], t[-1], h, theta)
        eu, el = t[:-1] / nrm, t[-1] / nrm
        bp = make_point(v, grid, p.with_(lam=max(lam, 0.0)), s, neta, stability, 0.0)
        if prev_dl > 0 and dl < 0:
            # the previous point has the largest lam: mark it as the fold
            k = len(diag.points) - 1
            diag.points[k] = replace(diag.points[k], fold=True)
            diag.folds.append(k)
            if diag.lambda_stat is None:
                diag.lambda_stat = diag.points[k].lam
        prev_dl = dl if dl != 0 else prev_dl
        diag.points.append(bp)
        if iters <= 3 and ds < step:
            ds = min(step, 1.5 * ds)
        if bp.min_u < -1.0 + delta_td:
            diag.stop_reason = "touchdown"
            break
        if diag.folds and lam <= lam_floor:
            diag.stop_reason = "lambda_floor"
            break
        if stop_after_folds is not None and len(diag.folds) >= stop_after_folds:
            diag.stop_reason = "folds"
            break
    else:
        diag.stop_reason = "max_points"
    last = diag.points[-1]
    diag.endpoint = {"lambda": last.lam, "min_u": last.min_u, "s": last.s, "reason": diag.stop_reason}
    return diag


def _corrector(v, lam, tu, tl, grid, p, neta, h, theta, op, maxiter: int = 12):
    vp, lp = v.copy(), lam
    for it in range(1, maxiter + 1):
        if not _admissible(v):
            raise SingularGeometryError("corrector left the admissible set")
        R, J, N = _newton_system(v, grid, p, neta, lam)
        c = h * float(tu @ (v - vp)) + theta**2 * tl * (lam - lp)
        r = float(np.max(np.abs(op.solve(R))))
        M = np.empty((grid.n + 1, grid.n + 1))
        M[:-1, :-1] = J
        M[:-1, -1] = N
        M[-1, :-1] = h * tu
        M[-1, -1] = theta**2 * tl
        if r < NEWTON_TOL and abs(c) < 1e-12:
            return v, lam, it, M
        delta = np.linalg.solve(M, -np.concatenate([R, [c]]))
        v = v + delta[:-1]
        lam = lam + delta[-1]
    raise ConvergenceError("arclength corrector did not converge")


# ---------------------------------------------------------------------------
# pull-in


def _solvable(lam: float, v0: np.ndarray, grid: Grid1D, p: Params, neta):
    try:
        v, _ = newton(v0, grid, p.with_(lam=lam), neta, maxiter=60)
        return v
    except (ConvergenceError, SingularGeometryError, np.linalg.LinAlgError):
        return None


def refine_fold(lam_lo: float, v_lo: np.ndarray, grid: Grid1D, p: Params, neta=None, rtol: float = 1e-8,
                lam_hi: float | None = None) -> tuple[float, np.ndarray]:
    """Bisection on solvability: lam_lo solvable, lam_hi not."""
    neta = _neta_for(grid, p, neta)
    if lam_hi is None:
        lam_hi = lam_lo * 1.01
        while _solvable(lam_hi, v_lo, grid, p, neta) is not None:
            lam_lo, lam_hi = lam_hi, lam_hi * 1.01
    while (lam_hi - lam_lo) > rtol * lam_lo:
        mid = 0.5 * (lam_lo + lam_hi)
        v = _solvable(mid, v_lo, grid, p, neta)
        if v is None:
            lam_hi = mid
        else:
            lam_lo, v_lo = mid, v
    return lam_lo, v_lo


def pull_in_voltage(p: Params, n: int = 127, step: float = 0.05, max_points: int = 400, neta: int | None = None,
                    extrapolate: bool = True, rtol: float = 1e-8) -> float:
    """lam at the first fold, bisected to ``rtol``; with ``extrapolate`` the
    grid-n and grid-(2n+1) values are combined by Richardson extrapolation."""
    diag = continue_branch(p, step, max_points, n, neta, stability=False, stop_after_folds=1)
    if not diag.folds:
        raise ContinuationError("no fold found within max_points")
    k = diag.folds[0]
    bp = diag.points[k]
    grid = bp.u.grid
    lam_hi = diag.points[k + 1].lam if diag.points[k + 1].lam > bp.lam else None
    lam_c, v_c = refine_fold(bp.lam, bp.u.interior, grid, p, neta, rtol, lam_hi)
    if not extrapolate:
        return lam_c
    fine = grid.refined()
    u_c = DeflectionField.from_interior(grid, v_c)
    v_f = interpolate(u_c, fine)[1:-1]
    lam_start = lam_c * (1 - 1e-3)
    v_f = _solvable(lam_start, v_f, fine, p, _neta_for(fine, p, 2 * neta + 1 if neta else None))
    if v_f is None:
        raise ContinuationError("could not transfer the fold solution to the refined grid")
    lam_f, _ = refine_fold(lam_start, v_f, fine, p, 2 * neta + 1 if neta else None, rtol)
    return richardson(lam_c, lam_f)
