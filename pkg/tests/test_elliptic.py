import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fields import smooth_field
from memsfb.core import DeflectionField, Grid1D, Profile, trapz
from memsfb.elliptic import (
    assemble_transformed,
    compute_g,
    electrostatic_energy,
    energy_bounds,
    energy_identity_residual,
    potential,
    reconstruct_psi,
    solve_potential,
    untransformed_residual,
    write_potential_csv,
)
from memsfb.errors import SingularGeometryError

G31 = Grid1D(31)
coeffs = st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda c: max(map(abs, c)) > 1e-3)


def quartic(n):
    return DeflectionField.from_function(Grid1D(n), lambda x: -0.3 * (1 - x**2) ** 2)


def constant(n, c):
    g = Grid1D(n)
    return DeflectionField(g, np.full(n + 2, c), check=False)


def test_flat_plate_system_is_constant_coefficient():
    sys = assemble_transformed(DeflectionField.zeros(G31), 0.4)
    assert np.all(sys.rhs == 0)
    assert np.all(sys.c_xeta == 0) and np.all(sys.c_eta == 0)
    assert np.allclose(sys.c_etaeta, 1.0) and sys.c_xx == pytest.approx(0.16)


@pytest.mark.parametrize("c", [-0.4, 0.25])
def test_constant_gap_coefficients(c):
    sys = assemble_transformed(constant(31, c), 0.5)
    assert np.all(sys.c_xeta == 0)
    assert np.allclose(sys.c_etaeta, 1 / (1 + c) ** 2)


@pytest.mark.parametrize("c", [0.0, -0.5, 0.3])
def test_potential_vanishes_for_parallel_plates(c):
    phi = potential(constant(31, c), 0.7)
    assert np.max(np.abs(phi.values)) < 1e-12


def test_potential_vanishes_as_aspect_ratio_shrinks():
    u = quartic(63)
    sup = [np.max(np.abs(potential(u, e, neta=31).values)) for e in (0.1, 0.05, 0.01)]
    assert sup[0] > sup[1] > sup[2]
    assert sup[2] < 1e-4


def test_psi_boundary_rows():
    u = quartic(31)
    psi = reconstruct_psi(potential(u, 0.5), u)
    assert np.allclose(psi.psi[:, -1], 1.0) and np.allclose(psi.psi[:, 0], 0.0)
    assert np.allclose(psi.z[:, -1], u.values) and np.allclose(psi.z[:, 0], -1.0)
    flat = reconstruct_psi(potential(DeflectionField.zeros(G31), 0.5), DeflectionField.zeros(G31))
    assert np.allclose(flat.psi, 1.0 + flat.z)


def test_untransformed_residual_second_order():
    res = [untransformed_residual(potential(quartic(n), 0.5, neta=n), quartic(n), 0.5) for n in (31, 63, 127)]
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders > 1.8), orders


def test_guard_refuses_touchdown():
    vals = np.zeros(33)
    vals[16] = -1 + 1e-9
    with pytest.raises(SingularGeometryError):
        assemble_transformed(DeflectionField(G31, vals, check=False), 0.5)


def test_g_flat_and_constant():
    assert np.allclose(compute_g(DeflectionField.zeros(G31), 0.5).values, 1.0, atol=1e-12)
    c = -0.3
    assert np.allclose(compute_g(constant(31, c), 0.5).values, 1 / (1 + c) ** 2, atol=1e-12)


def test_g_approaches_small_gap_limit():
    u = quartic(63)
    errs = []
    for e in (0.1, 0.05, 0.025):
        g = compute_g(u, e, neta=63).values
        errs.append(math.sqrt(trapz((g - (1 + u.values) ** -2) ** 2, u.grid.h)))
    assert errs[0] > errs[1] > errs[2]
    assert min(np.log2(np.array(errs[:-1]) / np.array(errs[1:]))) >= 1.0


def test_g_at_least_one_on_convex_solution():
    from memsfb.core import Params
    from memsfb.stationary import solve_stationary

    bp = solve_stationary(Params(rhs="free_boundary", epsilon=0.5, beta=0.0, tau=1.0, lam=0.2), n=31, stability=False)
    u = DeflectionField(G31, bp.u.values)
    assert np.all(np.diff(u.values, 2) >= 0)
    assert compute_g(u, 0.5).values.min() >= 1.0 - 1e-12


@given(coeffs, st.floats(0.05, 0.9), st.floats(0.05, 1.0))
def test_g_positive(c, scale, eps):
    assert compute_g(smooth_field(G31, c, scale), eps, neta=15).values.min() > 0


def test_energy_examples():
    assert electrostatic_energy(DeflectionField.zeros(G31), 0.5) == pytest.approx(2.0, abs=1e-12)
    assert electrostatic_energy(constant(31, -0.4), 0.5) == pytest.approx(2 / 0.6, abs=1e-10)
    assert energy_bounds(DeflectionField.zeros(G31), 0.5) == pytest.approx((2.0, 2.0))
    lo, hi = energy_bounds(constant(31, 0.2), 0.5)
    assert lo == pytest.approx(2 / 1.2) and hi == pytest.approx(2 / 1.2)


@given(coeffs, st.floats(0.05, 0.9))
def test_energy_sandwich(c, scale):
    u = smooth_field(G31, c, scale)
    lo, hi = energy_bounds(u, 0.3)
    e = electrostatic_energy(u, 0.3, neta=15)
    assert e - lo >= -1e-6 * hi and hi - e >= -1e-6 * hi


@given(coeffs, st.floats(0.05, 0.6), st.lists(st.floats(0, 1), min_size=3, max_size=3), st.floats(0.01, 0.3))
def test_energy_monotone(c, scale, bump, size):
    u1 = smooth_field(G31, c, scale)
    x = G31.x
    d = (1 - x**2) * (1 + bump[0] * x**2 + bump[1] * np.cos(3 * x) ** 2 + bump[2] * (1 + x) / 2)
    u2 = DeflectionField(G31, u1.values + size * d / d.max(), check=False)
    assert electrostatic_energy(u2, 0.3, neta=15) <= electrostatic_energy(u1, 0.3, neta=15) + 1e-6


def test_identity_exact_for_parallel_plates():
    assert energy_identity_residual(DeflectionField.zeros(G31), 0.5) < 1e-12
    assert energy_identity_residual(constant(31, -0.35), 0.5) < 1e-12


def test_identity_converges():
    res = [energy_identity_residual(quartic(n), 0.5, neta=n) for n in (31, 63, 127)]
    assert res[0] > res[1] > res[2]
    assert min(np.log2(np.array(res[:-1]) / np.array(res[1:]))) >= 1.5


def test_csv_dump(tmp_path):
    u = quartic(15)
    phi = potential(u, 0.5, neta=9)
    write_potential_csv(tmp_path / "phi.csv", tmp_path / "psi.csv", phi, u)
    lines = (tmp_path / "psi.csv").read_text().splitlines()
    assert lines[0] == "x,eta_or_z,value"
    assert len(lines) == 1 + 17 * 11


def test_g_jacobian_matches_finite_differences():
    from memsfb.elliptic import g_and_jacobian

    g = Grid1D(15)
    u = smooth_field(g, [1.0, 0.3, -0.2, 0.1], 0.4)
    _, J, _ = g_and_jacobian(u, 0.5, neta=9)
    fd = np.empty_like(J)
    step = 1e-6
    for j in range(15):
        vals = [u.values.copy(), u.values.copy()]
        vals[0][j + 1] += step
        vals[1][j + 1] -= step
        gp, gm = (compute_g(DeflectionField(g, v), 0.5, neta=9).interior for v in vals)
        fd[:, j] = (gp - gm) / (2 * step)
    assert np.max(np.abs(J - fd)) < 1e-6 * np.max(np.abs(J))
