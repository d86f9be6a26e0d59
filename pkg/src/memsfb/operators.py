"""Discrete mechanical operators on the plate grid.

Clamped ends use the ghost reflection u_{-1} = u_1 (zero slope), pinned ends
the antisymmetric reflection u_{-1} = -u_1 (zero curvature). Both keep the
matrix of beta d_x^4 - tau d_x^2 symmetric positive definite.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import Grid1D, Profile, h1_seminorm_sq, trapz
from .errors import ConvergenceError


def laplacian_matrix(grid: Grid1D) -> sp.csr_matrix:
    """Dirichlet second difference on the interior nodes (shared; do not mutate)."""
    return _laplacian(grid.n)


def bending_matrix(grid: Grid1D, bc: str = "clamped") -> sp.csr_matrix:
    """Fourth difference with the ghost closure of ``bc`` folded in (shared; do not mutate)."""
    return _bending(grid.n, bc)


@lru_cache(maxsize=64)
def _laplacian(n: int) -> sp.csr_matrix:
    h = 2.0 / (n + 1)
    e = np.ones(n)
    return sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], format="csr") / h**2


@lru_cache(maxsize=64)
def _bending(n: int, bc: str) -> sp.csr_matrix:
    h = 2.0 / (n + 1)
    e = np.ones(n)
    main = 6 * e
    main[[0, -1]] += 1.0 if bc == "clamped" else -1.0
    return sp.diags([e[:-2], -4 * e[:-1], main, -4 * e[:-1], e[:-2]], [-2, -1, 0, 1, 2], format="csr") / h**4


@dataclass(frozen=True, eq=False)
class BeamOperator:
    grid: Grid1D
    beta: float
    tau: float
    bc: str = "clamped"

    def __post_init__(self):
        if self.beta < 0 or self.tau < 0 or (self.beta == 0 and self.tau == 0):
            raise ValueError("need beta, tau >= 0 and (beta, tau) != (0, 0)")
        if self.bc not in ("clamped", "pinned"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")

    @cached_property
    def matrix(self) -> sp.csc_matrix:
        A = -self.tau * laplacian_matrix(self.grid)
        if self.beta > 0:
            A = A + self.beta * bending_matrix(self.grid, self.bc)
        return sp.csc_matrix(A)

    @cached_property
    def lu(self):
        return spla.splu(self.matrix)

    def apply(self, interior: np.ndarray) -> np.ndarray:
        return self.matrix @ interior

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.lu.solve(np.asarray(rhs, dtype=float))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True, eq=False)
class Eigenpair:
    mu1: float
    zeta1: Profile
    iterations: int


def _with_ghosts(values: np.ndarray, bc: str, beta: float) -> np.ndarray:
    """Node vector extended by one ghost node at each end."""
    ghost = 1.0 if (bc == "clamped" and beta > 0) else -1.0
    v = np.empty(len(values) + 2)
    v[1:-1] = values
    v[0] = ghost * values[1]
    v[-1] = ghost * values[-2]
    return v


def second_difference(values: np.ndarray, h: float, bc: str = "clamped", beta: float = 1.0) -> np.ndarray:
    """Centered u_xx on every node, ghost-closed at x = +-1."""
    g = _with_ghosts(values, bc, beta)
    return (g[2:] - 2 * g[1:-1] + g[:-2]) / h**2


def apply_beam(u: Profile, beta: float, tau: float, a: float = 0.0, bc: str = "clamped") -> Profile:
    """beta u_xxxx - (tau + a ||u_x||^2) u_xx at interior nodes (zero at the ends).

    ``a`` is the self-stretching coefficient; the tension multiplier uses
    the discrete H1 seminorm of u.
    """
    h = u.grid.h
    out = np.zeros(u.grid.n + 2)
    uxx = second_difference(u.values, h, bc, beta)
    tension = tau + a * h1_seminorm_sq(u.values, h)
    res = -tension * uxx[1:-1]
    if beta > 0:
        res = res + beta * (uxx[2:] - 2 * uxx[1:-1] + uxx[:-2]) / h**2
    out[1:-1] = res
    return Profile(u.grid, out)


def apply_curvature(u: Profile, beta: float, tau: float, epsilon: float, bc: str = "clamped") -> Profile:
    """Quasilinear bending/stretching operator with curvature corrections.

    beta (u_xx / s^5)_xx + 5/2 eps^2 beta (u_x u_xx^2 / s^7)_x - tau (u_x / s)_x
    with s = sqrt(1 + eps^2 u_x^2). Inner quotients live on nodes for the
    outer second difference and on half nodes for the outer first
    differences, so eps = 0 reproduces ``apply_beam`` exactly.
    """
    h = u.grid.h
    e2 = epsilon * epsilon
    g = _with_ghosts(u.values, bc, beta)
    ux_node = (g[2:] - g[:-2]) / (2 * h)
    uxx_node = (g[2:] - 2 * g[1:-1] + g[:-2]) / h**2
    ux_half = np.diff(u.values) / h
    uxx_half = 0.5 * (uxx_node[1:] + uxx_node[:-1])

    stretch = ux_half / np.sqrt(1 + e2 * ux_half**2)
    res = -tau * np.diff(stretch) / h
    if beta > 0:
        q1 = uxx_node / (1 + e2 * ux_node**2) ** 2.5
        res = res + beta * (q1[2:] - 2 * q1[1:-1] + q1[:-2]) / h**2
        q2 = ux_half * uxx_half**2 / (1 + e2 * ux_half**2) ** 3.5
        res = res + 2.5 * e2 * beta * np.diff(q2) / h
    out = np.zeros(u.grid.n + 2)
    out[1:-1] = res
    return Profile(u.grid, out)


def inverse_iteration(matrix, shift: float = 0.0, x0=None, rtol: float = 1e-12, maxiter: int = 2000):
    """Eigenpair of ``matrix`` closest to ``shift`` by shifted inverse iteration.

    Returns (eigenvalue, unit eigenvector, iterations). Convergence is declared when two
    successive estimates agree to ``rtol`` relative.
    """
    n = matrix.shape[0]
    if sp.issparse(matrix):
        solve = spla.splu(sp.csc_matrix(matrix - shift * sp.identity(n))).solve
    else:
        lu = sla.lu_factor(np.asarray(matrix, dtype=float) - shift * np.eye(n))
        solve = lambda r: sla.lu_solve(lu, r)
    x = np.ones(n) if x0 is None else np.array(x0, dtype=float)
    x /= np.linalg.norm(x)
    mu_old = np.inf
    for it in range(1, maxiter + 1):
        y = solve(x)
        # Rayleigh quotient of the inverse: immune to the 1/h^4 scaling of x.Ax
        mu = shift + 1.0 / float(x @ y)
        x = y / np.linalg.norm(y)
        if abs(mu - mu_old) <= rtol * max(abs(mu), 1e-300):
            return mu, x, it
        mu_old = mu
    raise ConvergenceError(f"inverse iteration did not converge in {maxiter} steps (last estimate {mu_old})")


def principal_eigenpair(beta: float, tau: float, bc: str = "clamped", grid: Grid1D | int = 127) -> Eigenpair:
    """Smallest eigenvalue and positive eigenfunction of beta d^4 - tau d^2.

    The eigenfunction is sign-normalized and scaled to unit L1 norm.
    """
    grid = Grid1D(grid) if isinstance(grid, int) else grid
    op = BeamOperator(grid, beta, tau, bc)
    mu, vec, it = inverse_iteration(op.matrix, 0.0, np.ones(grid.n))
    vals = np.zeros(grid.n + 2)
    vals[1:-1] = vec if vec.sum() > 0 else -vec
    vals /= trapz(np.abs(vals), grid.h)
    return Eigenpair(mu, Profile(grid, vals), it)


def richardson(coarse: float, fine: float, order: float = 2.0) -> float:
    """Extrapolate two estimates whose grids differ by a factor two in h."""
    r = 2.0**order
    return (r * fine - coarse) / (r - 1.0)
