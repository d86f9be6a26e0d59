import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memsfb.core import DeflectionField, Grid1D, Grid2D, Params, Profile, discrete_norms, make_grids


def test_uniform_grid_n3():
    g = Grid1D(3)
    assert np.array_equal(g.x, [-1.0, -0.5, 0.0, 0.5, 1.0])
    assert g.h == 0.5


def test_make_grids_counts():
    g1, g2 = make_grids(127, 64)
    assert g1.n == 127 and len(g1.interior) == 127
    assert g2.neta == 64 and len(g2.eta) == 66
    assert np.array_equal(g2.x, g1.x)
    assert g1.x[0] == -1.0 and g1.x[-1] == 1.0 and g2.eta[0] == 0.0 and g2.eta[-1] == 1.0


@pytest.mark.parametrize("n, neta", [(4, 2), (3, 16), (16, 7)])
def test_make_grids_rejects_underresolved(n, neta):
    with pytest.raises(ValueError):
        make_grids(n, neta)


def test_nodes_strictly_increasing():
    assert np.all(np.diff(Grid1D(50).x) > 0)
    assert np.all(np.diff(Grid2D(9, 9).eta) > 0)


def test_norms_of_zero():
    assert discrete_norms(DeflectionField.zeros(Grid1D(31))) == (0.0, 0.0, 0.0, 0.0)


def test_l2_norm_of_parabola():
    g = Grid1D(255)
    u = Profile(g, 1 - g.x**2)
    assert abs(discrete_norms(u)[0] - math.sqrt(16 / 15)) < 1e-4


def test_min_of_negative_parabola():
    u = DeflectionField.from_function(Grid1D(63), lambda x: -0.5 * (1 - x**2))
    assert discrete_norms(u)[3] == -0.5


def test_norm_convergence_order():
    # exact values for u = cos(pi x / 2): |u|^2 = 1, |u_x|^2 = pi^2/4, |u_xx|^2 = pi^4/16
    exact = np.array([1.0, math.pi / 2, math.pi**2 / 4])
    errs = []
    for n in (15, 31, 63, 127):
        g = Grid1D(n)
        errs.append(np.abs(np.array(discrete_norms(Profile(g, np.cos(np.pi * g.x / 2)))[:3]) - exact))
    errs = np.array(errs)
    assert np.all(errs[:, 0] < 1e-12)  # trapezoid rule is exact on cos^2 here
    orders = np.log2(errs[:-1, 1:] / errs[1:, 1:])
    assert np.all(orders >= 1.9), orders


@given(st.floats(-5, -1.0), st.integers(0, 30))
def test_rejects_inadmissible_minimum(depth, k):
    g = Grid1D(31)
    vals = np.zeros(33)
    vals[1 + k] = depth
    with pytest.raises(ValueError):
        DeflectionField(g, vals)


@given(st.floats(1e-9, 1.0) | st.floats(-1.0, -1e-9))
def test_rejects_nonzero_boundary(b):
    vals = np.zeros(33)
    vals[-1] = b
    with pytest.raises(ValueError):
        DeflectionField(Grid1D(31), vals)


def test_fields_are_immutable():
    u = DeflectionField.zeros(Grid1D(9))
    with pytest.raises(ValueError):
        u.values[3] = 1.0


@pytest.mark.parametrize("kw", [dict(beta=0.0, tau=0.0), dict(lam=-1.0), dict(epsilon=0.0),
                                dict(gamma=float("nan")), dict(bc="free"), dict(rhs="magnetic")])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        Params(**kw)


def test_params_aliases():
    assert Params(rhs="sg").rhs == "small_gap"
    assert Params(rhs="fb").rhs == "free_boundary"
    assert Params(rhs="small_gap", epsilon=0.0).epsilon == 0.0
