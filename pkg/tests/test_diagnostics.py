import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coldplasma import diagnostics as dg
from coldplasma.errors import DegenerateSeries
from coldplasma.fdtd_core import Box, Slab, StateVector, all_pec, all_sm, cavity_mode, cfl_max_dt, random_state, run
from coldplasma.fdtd_core.stepper import TRACE_COLUMNS
from coldplasma.medium import uniform_medium

BOX = Box((1.0, 1.0, 1.0), (4, 5, 3))


def medium(grid, nu=0.5):
    return uniform_medium(grid, [1.0, 0.7], [nu, 2 * nu], [1.5, -0.5], [0.0, 0.6, 0.8])


def test_zero_state_has_zero_energy():
    assert dg.energy(StateVector.zeros(BOX, 2), medium(BOX)).total == 0.0


def test_uniform_electric_field_energy():
    U = StateVector.zeros(BOX, 2)
    e = np.array([0.3, -1.2, 2.0])
    for comp, part in enumerate(BOX.split_e(U.E)):
        part[...] = e[comp]
    assert dg.energy(U, medium(BOX)).total == pytest.approx(0.5 * e @ e, rel=1e-14)


def _naive_energy(U, m, grid):
    kin, el, mag = 0.0, 0.0, 0.0
    for s in range(len(U.J)):
        for i in range(grid.n_nodes):
            for k in range(3):
                kin += 0.5 * grid.w_n[i] * U.J[s][i, k] ** 2 / (m.eps0 * m.omega_p[s][i] ** 2)
    for i in range(grid.n_e):
        el += 0.5 * m.eps0 * grid.w_e[i] * U.E[i] ** 2
    for i in range(grid.n_b):
        mag += 0.5 * m.c**2 * m.eps0 * grid.w_b[i] * U.B[i] ** 2
    return kin + el + mag


@pytest.mark.parametrize("grid", [BOX, Slab(1.5, 9)])
def test_energy_matches_naive_loop(grid):
    m = uniform_medium(grid, [1.3, 0.4], [1, 1], [0, 0], eps0=2.0, c=0.5)
    U = random_state(grid, np.random.default_rng(0), 2)
    rep = dg.energy(U, m)
    assert rep.total == pytest.approx(_naive_energy(U, m, grid), rel=1e-13)
    assert rep.total == pytest.approx(sum(rep.kinetic) + rep.electric + rep.magnetic, rel=1e-13)
    assert min(rep.kinetic + (rep.electric, rep.magnetic)) >= 0


def test_damped_pec_balance_sign_and_refinement():
    g = Box((1, 1, 1), (6, 6, 6))
    m = medium(g, nu=1.0)
    U0 = cavity_mode(g, 1.0, 2)
    T = 1.0
    dt = 0.8 * cfl_max_dt(g)
    maxres = []
    for k in (1, 2):
        h = dt / k
        tr = run(m, all_pec(g), U0, h, int(round(T / h)))
        bal = dg.dissipation_balance(tr)
        assert bal.max_scheme_increase <= 1e-12 * tr.energy[0]
        maxres.append(bal.max_abs)
    assert maxres[0] / maxres[1] >= 3.0


def test_absorbing_boundary_dissipation_nonnegative():
    g = Box((1, 1, 1), (5, 5, 5))
    m = medium(g)
    U = random_state(g, np.random.default_rng(1), 2, all_sm(g))
    tr = run(m, all_sm(g), U, 0.9 * cfl_max_dt(g), 50)
    assert np.all(tr.columns["dissipation_bdry"][1:] >= 0)
    assert np.all(tr.columns["dissipation_vol"][1:] >= 0)


def test_constraint_residual_keys():
    U = random_state(BOX, np.random.default_rng(2), 2)
    r = dg.constraint_residuals(U, medium(BOX), all_pec(BOX))
    assert set(r) == {"divB_max", "gauss_max", "Bn_on_GammaP_max"}
    assert np.isnan(r["gauss_max"])


def test_fit_exact_power_law():
    t = np.linspace(1, 100, 500)
    f = dg.fit_decay(t, t**-0.5, "poly", (1, 100))
    assert f.rate == pytest.approx(-0.5, abs=1e-6)
    assert f.prefactor == pytest.approx(1.0, rel=1e-6)


def test_fit_exact_exponential():
    t = np.linspace(0, 20, 400)
    f = dg.fit_decay(t, 3 * np.exp(-0.7 * t), "exp", (0, 20))
    assert f.rate == pytest.approx(-0.7, abs=1e-6)


def test_fit_default_window_drops_transient():
    t = np.linspace(0, 50, 501)
    f = dg.fit_decay(t, 1 + t, "poly")
    assert f.window == (5.0, 50.0)
    assert f.n_points == int(np.sum((t >= 5) & (t <= 50)))


@settings(max_examples=50)
@given(st.floats(1e-6, 1e6), st.floats(-3, 0), st.sampled_from(["poly", "exp"]))
def test_fit_scale_invariant(scale, rate, model):
    t = np.linspace(1, 30, 120)
    y = np.exp(rate * (np.log(t) if model == "poly" else t)) * (1 + 0.1 * np.sin(t))
    a = dg.fit_decay(t, y, model, (1, 30))
    b = dg.fit_decay(t, scale * y, model, (1, 30))
    assert abs(a.rate - b.rate) <= 1e-10


def test_fit_degenerate_series():
    with pytest.raises(DegenerateSeries):
        dg.fit_decay(np.array([1.0, 2.0]), np.array([1.0, 0.5]))
    with pytest.raises(DegenerateSeries):
        dg.fit_decay(np.linspace(1, 10, 10), np.r_[np.ones(9), 0.0], "poly", (1, 10))
    with pytest.raises(DegenerateSeries):
        dg.fit_decay(np.linspace(0, 1, 10), np.ones(10), "poly", (5, 10))


def test_trace_csv_columns_and_round_trip(tmp_path):
    g = Slab(1.0, 12)
    m = medium(g)
    tr = run(m, all_pec(g), random_state(g, np.random.default_rng(3), 2, all_pec(g)), 0.02, 10, cadence=3)
    p = tmp_path / "d.csv"
    dg.write_trace_csv(tr, str(p))
    assert p.read_text().splitlines()[0] == ",".join(TRACE_COLUMNS)
    d = dg.read_csv(str(p))
    np.testing.assert_array_equal(d["t"], tr.t[[0, 3, 6, 9, 10]])
    np.testing.assert_array_equal(d["E_total"], tr.energy[[0, 3, 6, 9, 10]])
