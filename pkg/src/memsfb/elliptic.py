"""Electrostatic potential on the fixed rectangle and the induced nonlinearity.

The potential psi on the moving domain {-1 < z < u(x)} is pulled back to the
rectangle [-1, 1] x [0, 1] through eta = (1 + z) / (1 + u(x)) and shifted,
Phi(x, eta) = psi(x, (1 + u) eta - 1) - eta, which has zero Dirichlet data.
With w = 1 + u, eta_x = -eta u_x / w and
eta_xx = eta (2 u_x^2 / w^2 - u_xx / w), the Laplace equation
eps^2 psi_xx + psi_zz = 0 becomes

    -[eps^2 Phi_xx + 2 eps^2 eta_x Phi_xeta
      + (eps^2 eta_x^2 + 1 / w^2) Phi_etaeta + eps^2 eta_xx (Phi_eta + 1)] = 0,

i.e. -L_u Phi = f_u with f_u = eps^2 eta_xx.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline

from .core import MIN_NODES, DeflectionField, Grid2D, Profile, d1, trapz
from .errors import SingularGeometryError, SolverBreakdownError

TOUCHDOWN_GUARD = 1e-8
LINEAR_RTOL = 1e-10


def default_neta(n: int) -> int:
    """Number of interior eta nodes giving the same spacing as the x grid."""
    return max(MIN_NODES, (n + 1) // 2 - 1)


@dataclass(frozen=True, eq=False)
class EllipticSystem:
    grid: Grid2D
    epsilon: float
    u: DeflectionField
    matrix: sp.csc_matrix  # -L_u on interior unknowns, eta index fastest
    rhs: np.ndarray  # f_u on interior unknowns
    # nodal coefficients of L_u on the interior, shape (nx, neta)
    c_xx: float
    c_xeta: np.ndarray
    c_etaeta: np.ndarray
    c_eta: np.ndarray


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Phi on all nodes of the rectangle, shape (nx + 2, neta + 2)."""

    grid: Grid2D
    values: np.ndarray

    @property
    def trace_derivative(self) -> np.ndarray:
        """d Phi / d eta at eta = 1 on every x node (three-point one-sided)."""
        k = self.grid.heta
        v = self.values
        return (3 * v[:, -1] - 4 * v[:, -2] + v[:, -3]) / (2 * k)


@dataclass(frozen=True, eq=False)
class MappedPotential:
    """psi sampled on the image of the rectangle grid inside the moving domain."""

    x: np.ndarray
    z: np.ndarray
    eta: np.ndarray
    psi: np.ndarray


def _check_geometry(u: Profile):
    umin = float(np.min(u.values))
    if not umin > -1.0 + TOUCHDOWN_GUARD:
        raise SingularGeometryError(f"min u = {umin:.3e} is within {TOUCHDOWN_GUARD} of touchdown")


def _shape_terms(u: Profile):
    """w, u_x, u_xx at the interior x nodes by centered differences."""
    v = u.values
    h = u.grid.h
    w = 1.0 + v[1:-1]
    ux = (v[2:] - v[:-2]) / (2 * h)
    uxx = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    return w, ux, uxx


def _coefficients(u: Profile, eps: float, eta: np.ndarray):
    w, ux, uxx = _shape_terms(u)
    W, UX, UXX = w[:, None], ux[:, None], uxx[:, None]
    E = eta[None, :]
    eta_x = -E * UX / W
    eta_xx = E * (2 * UX**2 / W**2 - UXX / W)
    e2 = eps * eps
    c_xeta = 2 * e2 * eta_x
    c_etaeta = e2 * eta_x**2 + 1.0 / W**2
    c_eta = e2 * eta_xx
    return c_xeta, c_etaeta, c_eta


_OFFSETS = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1))


@lru_cache(maxsize=32)
def _pattern(nx: int, ne: int):
    """Masks of the nine stencil offsets and the CSC layout of their entries."""
    I, J = np.meshgrid(np.arange(nx), np.arange(ne), indexing="ij")
    masks, rows, cols = [], [], []
    for di, dj in _OFFSETS:
        ii, jj = I + di, J + dj
        mask = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ne)
        masks.append(mask)
        rows.append((I * ne + J)[mask])
        cols.append((ii * ne + jj)[mask])
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    N = nx * ne
    probe = sp.csc_matrix((np.arange(1, len(rows) + 1, dtype=float), (rows, cols)), shape=(N, N))
    perm = probe.data.astype(np.int64) - 1
    return masks, rows, cols, perm, probe.indices.copy(), probe.indptr.copy()


def _stencil_matrix(grid: Grid2D, c_xx: float, c_xeta, c_etaeta, c_eta) -> sp.csc_matrix:
    """Nine-point discretization of -(c_xx d_xx + c_xeta d_xeta + c_etaeta d_etaeta + c_eta d_eta)."""
    nx, ne = grid.nx, grid.neta
    hx, k = grid.hx, grid.heta
    masks, _, _, perm, indices, indptr = _pattern(nx, ne)
    q = c_xeta / (4 * hx * k)
    coefs = (
        -2 * c_xx / hx**2 - 2 * c_etaeta / k**2,
        c_xx / hx**2,
        c_xx / hx**2,
        c_etaeta / k**2 + c_eta / (2 * k),
        c_etaeta / k**2 - c_eta / (2 * k),
        q, q, -q, -q,
    )
    vals = np.concatenate([-np.broadcast_to(c, (nx, ne))[m] for c, m in zip(coefs, masks)])
    N = nx * ne
    return sp.csc_matrix((vals[perm], indices, indptr), shape=(N, N))


def assemble_transformed(u: DeflectionField, epsilon: float, neta: int | None = None) -> EllipticSystem:
    """Discretize -L_u Phi = f_u on the interior of the rectangle."""
    _check_geometry(u)
    n = u.grid.n
    grid = Grid2D(n, default_neta(n) if neta is None else neta)
    eta = grid.eta[1:-1]
    c_xeta, c_etaeta, c_eta = _coefficients(u, epsilon, eta)
    c_xx = epsilon * epsilon
    A = _stencil_matrix(grid, c_xx, c_xeta, c_etaeta, c_eta)
    rhs = c_eta.ravel().copy()
    if not np.all(np.isfinite(A.data)) or not np.all(np.isfinite(rhs)):
        raise SingularGeometryError("non-finite coefficients in the transformed operator")
    return EllipticSystem(grid, epsilon, u, A, rhs, c_xx, c_xeta, c_etaeta, c_eta)


def _factorize(sys: EllipticSystem):
    try:
        return spla.splu(sys.matrix)
    except RuntimeError as exc:  # exactly singular factor
        raise SolverBreakdownError(f"potential factorization failed: {exc}") from exc


def _banded_solve(sys: EllipticSystem) -> np.ndarray:
    """Single solve through LAPACK's banded LU (half bandwidth neta + 1)."""
    b = sys.grid.neta + 1
    A = sys.matrix.tocoo()
    ab = np.zeros((2 * b + 1, A.shape[0]))
    ab[b + A.row - A.col, A.col] = A.data
    try:
        return sla.solve_banded((b, b), ab, sys.rhs, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SolverBreakdownError(f"potential solve failed: {exc}") from exc


def _embed(grid: Grid2D, interior: np.ndarray) -> np.ndarray:
    full = np.zeros((grid.nx + 2, grid.neta + 2))
    full[1:-1, 1:-1] = interior.reshape(grid.nx, grid.neta)
    return full


def solve_potential(sys: EllipticSystem, _lu=None) -> PotentialField:
    """Solve the assembled system; the boundary values of Phi are exactly zero."""
    grid = sys.grid
    if not np.any(sys.rhs):
        return PotentialField(grid, np.zeros((grid.nx + 2, grid.neta + 2)))
    phi = _banded_solve(sys) if _lu is None else _lu.solve(sys.rhs)
    res = np.linalg.norm(sys.matrix @ phi - sys.rhs) / np.linalg.norm(sys.rhs)
    if not (np.all(np.isfinite(phi)) and res < LINEAR_RTOL):
        raise SolverBreakdownError(f"potential solve residual {res:.2e} above {LINEAR_RTOL}")
    return PotentialField(grid, _embed(grid, phi))


def potential(u: DeflectionField, epsilon: float, neta: int | None = None) -> PotentialField:
    return solve_potential(assemble_transformed(u, epsilon, neta))


def reconstruct_psi(phi: PotentialField, u: Profile) -> MappedPotential:
    """Undo the change of variables: psi = Phi + eta at z = (1 + u) eta - 1."""
    X, E = np.meshgrid(phi.grid.x, phi.grid.eta, indexing="ij")
    Z = (1.0 + u.values)[:, None] * E - 1.0
    psi = phi.values + E
    return MappedPotential(X, Z, E, psi)


def _g_from_trace(u: Profile, eps: float, phi_eta: np.ndarray) -> np.ndarray:
    ux = d1(u.values, u.grid.h)
    dz_psi = (1.0 + phi_eta) / (1.0 + u.values)
    return (1.0 + eps * eps * ux**2) * dz_psi**2


def compute_g(u: DeflectionField, epsilon: float, neta: int | None = None, phi: PotentialField | None = None) -> Profile:
    """g_eps(u) = (1 + eps^2 u_x^2) |d_z psi(x, u(x))|^2 on every node."""
    if phi is None:
        phi = potential(u, epsilon, neta)
    return Profile(u.grid, _g_from_trace(u, epsilon, phi.trace_derivative))


def g_and_jacobian(u: DeflectionField, epsilon: float, neta: int | None = None):
    """g_eps(u) and the exact Jacobian of its interior values w.r.t. interior u.

    The Jacobian is the tangent of the discrete map: the coefficient
    sensitivities are differentiated by hand and the potential sensitivity
    comes from one factorization and n back-substitutions.
    """
    sys = assemble_transformed(u, epsilon, neta)
    grid = sys.grid
    lu = _factorize(sys)
    phi = solve_potential(sys, lu)
    n, ne = grid.nx, grid.neta
    hx, k = grid.hx, grid.heta
    eps2 = epsilon * epsilon
    P = phi.values
    # discrete derivatives of Phi at interior nodes
    P_xe = (P[2:, 2:] - P[2:, :-2] - P[:-2, 2:] + P[:-2, :-2])[:, :] / (4 * hx * k)
    P_ee = (P[1:-1, 2:] - 2 * P[1:-1, 1:-1] + P[1:-1, :-2]) / k**2
    P_e = (P[1:-1, 2:] - P[1:-1, :-2]) / (2 * k)

    w, ux, uxx = _shape_terms(u)
    W, UX, UXX = w[:, None], ux[:, None], uxx[:, None]
    E = grid.eta[None, 1:-1]
    # partials of the coefficients w.r.t. (w, u_x, u_xx)
    cxe_w = 2 * eps2 * E * UX / W**2
    cxe_ux = -2 * eps2 * E / W
    cee_w = -2 * eps2 * E**2 * UX**2 / W**3 - 2 / W**3
    cee_ux = 2 * eps2 * E**2 * UX / W**2
    ce_w = eps2 * E * (-4 * UX**2 / W**3 + UXX / W**2)
    ce_ux = 4 * eps2 * E * UX / W**2
    ce_uxx = -eps2 * E / W
    # residual R = -(... + c_eta (Phi_eta + 1)); dR/d(shape variable)
    dR_w = -(cxe_w * P_xe + cee_w * P_ee + ce_w * (P_e + 1))
    dR_ux = -(cxe_ux * P_xe + cee_ux * P_ee + ce_ux * (P_e + 1))
    dR_uxx = -(ce_uxx * (P_e + 1))

    # chain rule to u_j: column i sees u_{i-1}, u_i, u_{i+1}
    rows, cols, vals = [], [], []
    ridx = (np.arange(n)[:, None] * ne + np.arange(ne)[None, :])
    for off, coef in (
        (-1, -dR_ux / (2 * hx) + dR_uxx / hx**2),
        (0, dR_w - 2 * dR_uxx / hx**2),
        (1, dR_ux / (2 * hx) + dR_uxx / hx**2),
    ):
        i = np.arange(n)
        j = i + off
        ok = (j >= 0) & (j < n)
        rows.append(ridx[ok].ravel())
        cols.append(np.repeat(j[ok], ne))
        vals.append(coef[ok].ravel())
    B = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * ne, n)
    )
    dPhi = -lu.solve(B.toarray())  # (n*ne, n)
    dPhi = dPhi.reshape(n, ne, n)
    # trace derivative at eta = 1 (Phi = 0 on the top edge)
    dtrace = (-4 * dPhi[:, -1, :] + dPhi[:, -2, :]) / (2 * k)  # (n, n)

    trace = phi.trace_derivative[1:-1]
    g_full = _g_from_trace(u, epsilon, phi.trace_derivative)
    fac = 1 + eps2 * ux**2
    J = (2 * fac * (1 + trace) / w**2)[:, None] * dtrace
    J[np.diag_indices(n)] += -2 * fac * (1 + trace) ** 2 / w**3
    dg_dux = 2 * eps2 * ux * (1 + trace) ** 2 / w**2
    idx = np.arange(n)
    J[idx[:-1], idx[:-1] + 1] += dg_dux[:-1] / (2 * hx)
    J[idx[1:], idx[1:] - 1] -= dg_dux[1:] / (2 * hx)
    return Profile(u.grid, g_full), J, phi


def _grad_psi_sq(phi: PotentialField, u: Profile, eps: float):
    """Integrand eps^2 psi_x^2 + psi_z^2 and Jacobian 1 + u on all nodes."""
    grid = phi.grid
    P = phi.values
    # centered inside, second-order one-sided at the edges (same stencils as d1)
    P_x = np.gradient(P, grid.hx, axis=0, edge_order=2)
    P_e = np.gradient(P, grid.heta, axis=1, edge_order=2)
    w = (1.0 + u.values)[:, None]
    ux = d1(u.values, u.grid.h)[:, None]
    E = grid.eta[None, :]
    eta_x = -E * ux / w
    psi_x = P_x + (P_e + 1.0) * eta_x
    psi_z = (P_e + 1.0) / w
    return eps * eps * psi_x**2 + psi_z**2, w


def electrostatic_energy(u: DeflectionField, epsilon: float, neta: int | None = None, phi: PotentialField | None = None) -> float:
    """Dirichlet integral of psi over the moving domain (2D trapezoidal rule)."""
    if phi is None:
        phi = potential(u, epsilon, neta)
    dens, w = _grad_psi_sq(phi, u, epsilon)
    f = dens * w
    inner = phi.grid.heta * (f.sum(axis=1) - 0.5 * (f[:, 0] + f[:, -1]))
    return trapz(inner, phi.grid.hx)


def energy_bounds(u: Profile, epsilon: float) -> tuple[float, float]:
    """Lower and upper bounds of the electrostatic energy in terms of u only."""
    _check_geometry(u)
    h = u.grid.h
    ux = d1(u.values, h)
    w = 1.0 + u.values
    return trapz(1.0 / w, h), trapz((1.0 + epsilon**2 * ux**2) / w, h)


def energy_identity_residual(u: DeflectionField, epsilon: float, neta: int | None = None) -> float:
    """|E_e(u) - (2 - int u (1 + eps^2 u_x^2) d_z psi(x, u(x)) dx)|."""
    phi = potential(u, epsilon, neta)
    ee = electrostatic_energy(u, epsilon, phi=phi)
    h = u.grid.h
    ux = d1(u.values, h)
    dz_psi = (1.0 + phi.trace_derivative) / (1.0 + u.values)
    rhs = 2.0 - trapz(u.values * (1.0 + epsilon**2 * ux**2) * dz_psi, h)
    return abs(ee - rhs)


def untransformed_residual(phi: PotentialField, u: Profile, epsilon: float, x_window: float = 0.75) -> float:
    """Max of |eps^2 psi_xx + psi_zz| over interior nodes with |x| <= x_window.

    psi_zz comes from the uniform vertical spacing of each mapped column;
    psi_xx at fixed z interpolates psi in the neighbouring columns with
    cubic splines in z. Used as an independent check of the transform.
    The corners at x = +-1 limit the regularity of psi, so the default
    window stays away from them.
    """
    mp = reconstruct_psi(phi, u)
    h = phi.grid.hx
    splines = [CubicSpline(mp.z[i], mp.psi[i]) for i in range(mp.psi.shape[0])]
    worst = 0.0
    for i in range(1, mp.psi.shape[0] - 1):
        if abs(mp.x[i, 0]) > x_window:
            continue
        dz = mp.z[i, 1] - mp.z[i, 0]
        z = mp.z[i, 1:-1]
        psi_zz = (mp.psi[i, 2:] - 2 * mp.psi[i, 1:-1] + mp.psi[i, :-2]) / dz**2
        psi_xx = (splines[i - 1](z) - 2 * mp.psi[i, 1:-1] + splines[i + 1](z)) / h**2
        worst = max(worst, float(np.abs(epsilon**2 * psi_xx + psi_zz).max()))
    return worst


def write_potential_csv(phi_path, psi_path, phi: PotentialField, u: Profile):
    """Dump Phi on (x, eta) and psi on (x, z); columns x, eta_or_z, value."""
    mp = reconstruct_psi(phi, u)
    for path, second, vals in ((phi_path, mp.eta, phi.values), (psi_path, mp.z, mp.psi)):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "eta_or_z", "value"])
            for xi, si, vi in zip(mp.x.ravel(), second.ravel(), vals.ravel()):
                wr.writerow([repr(float(xi)), repr(float(si)), repr(float(vi))])
