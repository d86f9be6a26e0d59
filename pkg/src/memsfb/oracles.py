"""Independent oracles: shooting for -tau u'' = -lam / (1 + u)^2 and the clamped-beam root.

Solutions are even, so we shoot from x = 0 with u(0) = m, u'(0) = 0. With
xi = x sqrt(lam / tau) the problem becomes v'' = 1 / (1 + v)^2, v(0) = m,
and u(1) = 0 exactly when v reaches 0 at xi = L(m). Hence every m in (-1, 0)
is a solution for lam = tau L(m)^2 and the fold is tau max_m L(m)^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .core import DeflectionField, Grid1D

_M_FLOOR = 1e-6  # smallest 1 + m tried; upper roots below lam ~ 1e-6 tau are missed


def _rhs(c):
    def f(_, y):
        return [y[1], c / (1.0 + y[0]) ** 2]

    return f


def _blowup(_, y):
    return 1.0 + y[0] - 1e-12


_blowup.terminal = True


def shoot(m: float, lam: float, tau: float = 1.0, rtol: float = 1e-12, dense: bool = False):
    """Integrate from x = 0 to x = 1; returns the solve_ivp result."""
    return solve_ivp(_rhs(lam / tau), (0.0, 1.0), [m, 0.0], method="DOP853",
                     rtol=rtol, atol=rtol * 1e-2, events=_blowup, dense_output=dense)


def boundary_miss(m: float, lam: float, tau: float = 1.0, rtol: float = 1e-12) -> float:
    """u(1; m); +inf when the orbit leaves the admissible range."""
    sol = shoot(m, lam, tau, rtol)
    if sol.status != 0 or sol.t[-1] < 1.0:
        return math.inf
    return float(sol.y[0, -1])


def _hit_zero(_, y):
    return y[0]


_hit_zero.terminal = True
_hit_zero.direction = 1


def reach(m: float, rtol: float = 1e-12) -> float:
    """L(m): the scaled abscissa where v'' = 1/(1+v)^2, v(0) = m first hits 0."""
    if m >= 0.0:
        return 0.0
    sol = solve_ivp(_rhs(1.0), (0.0, 50.0), [m, 0.0], method="DOP853",
                    rtol=rtol, atol=rtol * 1e-2, events=_hit_zero)
    return float(sol.t_events[0][0])


def reach_closed_form(m: float) -> float:
    """L(m) from the first integral v'^2 / 2 = 1/(1+m) - 1/(1+v)."""
    a = 1.0 + m
    return math.sqrt(a / 2) * (math.sqrt(1 - a) + a * math.log((1 + math.sqrt(1 - a)) / math.sqrt(a)))


def _fold(rtol: float, tau: float, closed_form: bool = False):
    L = reach_closed_form if closed_form else (lambda m: reach(m, rtol))
    res = minimize_scalar(lambda a: -L(a - 1.0), bounds=(1e-4, 1.0 - 1e-6), method="bounded",
                          options={"xatol": 1e-12})
    return tau * L(res.x - 1.0) ** 2, res.x - 1.0


def fold_lambda(tau: float = 1.0, rtol: float = 1e-12, closed_form: bool = False) -> float:
    return _fold(rtol, tau, closed_form)[0]


@dataclass
class ShootingResult:
    lam: float
    tau: float
    centers: list = field(default_factory=list)
    solutions: list = field(default_factory=list)
    fold_lambda: float | None = None


def shooting_oracle(lam: float, tau: float = 1.0, n: int = 127, with_fold: bool = True,
                    rtol: float = 1e-12, scan: int = 400) -> ShootingResult:
    """All solutions at ``lam`` (as fields on Grid1D(n)) and optionally the fold."""
    if tau <= 0 or lam < 0:
        raise ValueError("shooting oracle needs tau > 0 and lam >= 0")
    grid = Grid1D(n)
    out = ShootingResult(lam, tau)
    if with_fold:
        out.fold_lambda = fold_lambda(tau, rtol)
    if lam == 0.0:
        out.centers = [0.0]
        out.solutions = [DeflectionField.zeros(grid)]
        return out

    # u(1; m) > 0 exactly when the scaled orbit reaches 0 before xi = sqrt(lam / tau),
    # so bracket the roots of L(m) - sqrt(lam / tau); the scan is dense near m = -1
    target = math.sqrt(lam / tau)
    miss = lambda m: reach(m, rtol) - target
    ms = np.geomspace(_M_FLOOR, 1.0, scan + 1)[:-1] - 1.0
    # include the maximiser of L so that a root pair close to the fold is split
    ms = np.union1d(ms, [_fold(rtol, 1.0)[1]])
    # a loose scan only locates sign changes; brackets are confirmed at full accuracy
    coarse = np.array([reach(m, max(rtol, 1e-8)) - target for m in ms])
    roots = []
    for i in np.flatnonzero(coarse[:-1] * coarse[1:] < 0):
        lo, hi = max(i - 1, 0), min(i + 2, len(ms) - 1)
        for a, b in ((i, i + 1), (lo, i + 1), (i, hi), (lo, hi)):
            fa, fb = miss(ms[a]), miss(ms[b])
            if fa * fb < 0:
                roots.append(brentq(miss, ms[a], ms[b], xtol=1e-15, rtol=1e-14))
                break
    # L(m) -> 0 as m -> 0, so the lower-branch root may lie past the last sample
    if miss(ms[-1]) > 0:
        roots.append(brentq(miss, ms[-1], 0.0, xtol=1e-15, rtol=1e-14))
    roots = sorted(set(roots))
    for m in sorted(roots, reverse=True):
        sol = shoot(m, lam, tau, rtol, dense=True)
        vals = sol.sol(np.abs(grid.x))[0]
        vals[0] = vals[-1] = 0.0
        out.centers.append(m)
        out.solutions.append(DeflectionField(grid, vals))
    return out


def clamped_beam_mu1() -> float:
    """k^4 for the smallest root of cos(2k) cosh(2k) = 1 (clamped beam on [-1, 1])."""
    k = brentq(lambda k: math.cos(2 * k) - 1.0 / math.cosh(2 * k), 2.0, 2.6, xtol=1e-15, rtol=1e-15)
    return k**4
