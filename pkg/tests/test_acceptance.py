"""Acceptance criteria 1-12.

Run with ``pytest tests/test_acceptance.py`` or ``python tests/test_acceptance.py``;
either way the terminal summary ends with one PASS/FAIL line per criterion.
"""
import math
import sys

import numpy as np
import pytest

from fields import smooth_field
from memsfb.core import DeflectionField, Grid1D, Params
from memsfb.elliptic import compute_g, electrostatic_energy, energy_bounds, energy_identity_residual
from memsfb.evolution import evolve, limit_study_epsilon, limit_study_gamma
from memsfb.operators import principal_eigenpair, richardson
from memsfb.oracles import clamped_beam_mu1, fold_lambda
from memsfb.stationary import continue_branch, pull_in_voltage
from memsfb.sweep import RunConfig, sweep_pull_in

FOLD = fold_lambda()
SG2 = Params(rhs="small_gap", beta=0.0, tau=1.0)
FB = Params(rhs="free_boundary", beta=1.0, tau=1.0, epsilon=0.5)
RNG_SEED = 20240607


def random_fields(grid, count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield smooth_field(grid, rng.uniform(-1, 1, 4), rng.uniform(0.05, 0.9)), rng


@pytest.mark.criterion(1, "capacitor identities g(0) = 1 and E_e(0) = 2")
def test_capacitor_identities():
    u = DeflectionField.zeros(Grid1D(127))
    assert np.max(np.abs(compute_g(u, 0.5, neta=127).values - 1.0)) < 1e-6
    assert abs(electrostatic_energy(u, 0.5, neta=127) - 2.0) < 1e-6


@pytest.mark.criterion(2, "energy sandwich on 100 random fields")
def test_energy_sandwich():
    g = Grid1D(63)
    for u, _ in random_fields(g, 100, RNG_SEED):
        lo, hi = energy_bounds(u, 0.3)
        e = electrostatic_energy(u, 0.3, neta=31)
        assert e - lo >= -1e-6 * hi and hi - e >= -1e-6 * hi


@pytest.mark.criterion(3, "electrostatic energy monotone on 50 ordered pairs")
def test_energy_monotone():
    g = Grid1D(63)
    x = g.x
    for u1, rng in random_fields(g, 50, RNG_SEED + 1):
        c = rng.uniform(0, 1, 3)
        d = (1 - x**2) * (1 + c[0] * x**2 + c[1] * np.cos(3 * x) ** 2 + c[2] * (1 + x) / 2)
        u2 = DeflectionField(g, u1.values + rng.uniform(0.01, 0.3) * d / d.max(), check=False)
        assert electrostatic_energy(u2, 0.3, neta=31) <= electrostatic_energy(u1, 0.3, neta=31) + 1e-6


@pytest.mark.criterion(4, "energy identity residual < 1e-4 at n = 255, order >= 1.5")
def test_energy_identity():
    res = []
    for n in (63, 127, 255):
        u = DeflectionField.from_function(Grid1D(n), lambda x: -0.3 * (1 - x**2) ** 2)
        res.append(energy_identity_residual(u, 0.5, neta=n))
    assert res[-1] < 1e-4
    assert res[0] > res[1] > res[2]
    assert min(np.log2(np.array(res[:-1]) / np.array(res[1:]))) >= 1.5


@pytest.mark.criterion(5, "principal eigenvalues: pi^2/4 (Richardson) and clamped beam root")
def test_eigenvalues():
    mu = richardson(principal_eigenpair(0.0, 1.0, grid=63).mu1, principal_eigenpair(0.0, 1.0, grid=127).mu1)
    assert abs(mu - math.pi**2 / 4) <= 1e-6
    ref = clamped_beam_mu1()
    assert abs(principal_eigenpair(1.0, 0.0, "clamped", grid=127).mu1 - ref) <= 1e-3 * ref


@pytest.mark.criterion(6, "continuation fold equals shooting fold to 1e-6, below pi^2/4")
def test_fold_cross_check():
    lam = pull_in_voltage(SG2, n=127)
    assert abs(lam - FOLD) <= 1e-6 * FOLD
    assert lam <= math.pi**2 / 4


@pytest.mark.criterion(7, "one fold, two solutions below it; clamped branch returns toward lambda = 0")
def test_branch_structure():
    d = continue_branch(SG2, step=0.05, n=63)
    assert len(d.folds) == 1
    for lam in np.linspace(0.01, 0.99, 25) * d.lambda_stat:
        assert d.crossings(lam) == 2
    c = continue_branch(Params(rhs="small_gap", beta=1.0, tau=0.0), step=0.05, n=63)
    assert len(c.folds) == 1
    assert c.stop_reason == "touchdown"
    assert c.mins[-1] < -1 + 1e-3 * 1.01
    assert c.lams[-1] < 0.01 * c.lambda_stat
    assert np.all(np.diff(c.lams[c.folds[0]:]) < 0)


@pytest.mark.criterion(8, "energy non-increasing, balance residual <= 1e-3 and halving with dt")
def test_energy_decay():
    fold = pull_in_voltage(FB, n=31, extrapolate=False)
    p = FB.with_(lam=0.5 * fold, gamma=0.0)
    res = []
    for dt in (2.5e-4, 1.25e-4):
        led = evolve(p, 10.0, dt, n=31).ledger
        assert led.max_increase() <= 1e-8
        res.append(led.max_residual)
    assert res[0] <= 1e-3 and res[1] <= 1e-3
    assert 1.8 <= res[0] / res[1] <= 2.2


@pytest.mark.criterion(9, "finite-time touchdown at x = 0 (small gap) and flagged for the free boundary")
def test_touchdown():
    tr = evolve(SG2.with_(lam=2 * FOLD, gamma=0.0), 5.0, 1e-3, n=63)
    assert tr.touchdown.touched and tr.touchdown.Tm_estimate < 5.0
    assert tr.touchdown.touchdown_x == [0.0]
    fb = evolve(Params(rhs="free_boundary", beta=0.0, tau=1.0, epsilon=0.5, lam=10.0), 5.0, 1e-3, n=31)
    assert fb.touchdown.touched and fb.touchdown.Tm_estimate < 5.0


@pytest.mark.criterion(10, "epsilon and gamma limit studies strictly decreasing")
def test_limit_studies():
    base = FB.with_(lam=1.0)
    eps = limit_study_epsilon(base, [0.2, 0.1, 0.05], 1.0, 1e-3, n=31)
    assert eps.strictly_decreasing("h1_distance") and eps.strictly_decreasing("g_distance")
    gam = limit_study_gamma(base, [0.2, 0.1, 0.05], 1.0, 1e-3, n=31)
    assert gam.strictly_decreasing("h2_distance") and gam.strictly_decreasing("phi_distance")


@pytest.mark.criterion(11, "sweep: lambda_dyn = lambda_stat (small gap), lambda_dyn <= lambda_stat (free boundary)")
def test_sweep_consistency(tmp_path):
    sg = sweep_pull_in(RunConfig(model="small_gap", betas=[0.0], gammas=[0.0], taus=[1.0], n=31, dt=2e-3,
                                 resolution=1e-2, out=str(tmp_path / "sg.csv")))
    row = sg.rows[0]
    assert row["status"] == "ok"
    assert abs(row["lambda_dyn"] - row["lambda_stat"]) <= sg.resolution
    fb = sweep_pull_in(RunConfig(model="free_boundary", epsilons=[0.5], betas=[1.0], gammas=[0.0, 0.5], taus=[1.0],
                                 n=15, dt=5e-3, resolution=5e-2, workers=2, out=str(tmp_path / "fb.csv")))
    for r in fb.rows:
        assert r["status"] == "ok"
        assert r["lambda_dyn"] <= r["lambda_stat"] + fb.resolution
    assert abs(fb.rows[0]["lambda_dyn"] - fb.rows[0]["lambda_stat"]) <= fb.resolution
    assert fb.rows[1]["lambda_dyn"] <= fb.rows[0]["lambda_dyn"] + fb.resolution


@pytest.mark.criterion(12, "sweeps are byte-identical for 1, 2 and 3 workers")
def test_determinism(tmp_path):
    outs = []
    for w in (1, 2, 3):
        cfg = RunConfig(model="small_gap", betas=[0.0, 1.0], taus=[1.0, 2.0], n=15, dt=5e-3, T_long=20.0,
                        resolution=2e-2, workers=w, out=str(tmp_path / f"w{w}.csv"))
        sweep_pull_in(cfg)
        outs.append((tmp_path / f"w{w}.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
