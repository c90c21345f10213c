import numpy as np
import pytest

from coldplasma import harmonic as hm
from coldplasma.errors import IncompatibleInitialData, UnsupportedFace
from coldplasma.fdtd_core import (PEC, SM, Box, BoundarySpec, Forcing, Slab, StateVector, VectorProfile,
                                  all_sm, cfl_max_dt, run)
from coldplasma.fdtd_core.state import x_weights
from coldplasma.medium import uniform_medium

OMEGA = 2.0
PROFILE = VectorProfile((0.0, 1.0, 0.0), (0.0, 0.0, 0.5))


def medium(grid):
    return uniform_medium(grid, [1.0, 0.6], [1.0, 1.0], [-1.0, 0.4], [0.3, 0.2, 1.0])


def slab_setup(n=40):
    g = Slab(1.0, n)
    return g, medium(g), all_sm(g, Forcing("harmonic", OMEGA, PROFILE))


def random_profile(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, 3))

    def gfun(p):
        s = np.sin(3 * p[:, 1] + 1) * np.cos(2 * p[:, 2]) + p[:, 0]
        return s[:, None] * (a + 1j * b)[None, :]
    return gfun


def test_zero_data_zero_lifting():
    g, m, bc = slab_setup()
    g3, g4 = hm.lift_boundary_data(lambda p: np.zeros((p.shape[0], 3), complex), g, bc)
    assert not np.any(g3) and not np.any(g4)


def test_constant_profile_on_one_face():
    g = Box((1, 1, 1), (4, 5, 3))
    bc = BoundarySpec({"x-": SM})
    gfun = VectorProfile((0.0, 0.7, -0.2))
    g3, g4 = hm.lift_boundary_data(gfun, g, bc)
    assert hm.lifting_trace_residual(g3, g4, gfun, g, bc) < 1e-12


@pytest.mark.parametrize("seed", [0, 1])
def test_random_profile_on_all_faces(seed):
    g = Box((1, 1, 1), (4, 4, 5))
    bc = all_sm(g)
    gfun = random_profile(seed)
    g3, g4 = hm.lift_boundary_data(gfun, g, bc, c=1.5)
    scale = np.max(np.abs(gfun(g.node_points())))
    assert hm.lifting_trace_residual(g3, g4, gfun, g, bc, c=1.5) < 1e-10 * scale


def test_lifting_refuses_data_on_pec_face():
    g = Box((1, 1, 1), (3, 3, 3))
    bc = BoundarySpec({"x-": SM, "x+": PEC})
    with pytest.raises(UnsupportedFace):
        hm.lift_boundary_data(PROFILE, g, bc, faces=["x-", "x+"])


def test_zero_forcing_zero_solution():
    g, m, bc = slab_setup()
    U = hm.harmonic_solution(OMEGA, lambda p: np.zeros((p.shape[0], 3), complex), m, bc)
    assert not np.any(U.to_vector())


@pytest.mark.parametrize("geom", ["slab", "box"])
def test_harmonic_system_residual(geom):
    if geom == "slab":
        g, m, bc = slab_setup()
        gfun = PROFILE
    else:
        g = Box((1, 1, 1), (5, 5, 5))
        m = medium(g)
        gfun = random_profile(3)
        bc = BoundarySpec({"x-": SM, "y+": SM}, Forcing("harmonic", OMEGA, gfun))
    U = hm.harmonic_solution(OMEGA, gfun, m, bc)
    gn = np.max(np.abs(gfun(g.node_points())))
    assert hm.harmonic_residual(U, OMEGA, gfun, m, bc) < 1e-8 * gn


def test_solution_independent_of_lifting():
    g, m, bc = slab_setup()
    U1 = hm.harmonic_solution(OMEGA, PROFILE, m, bc, theta=0.5)
    U2 = hm.harmonic_solution(OMEGA, PROFILE, m, bc, theta=0.9)
    d = np.linalg.norm(U1.to_vector() - U2.to_vector()) / np.linalg.norm(U1.to_vector())
    assert d < 1e-8


def test_phase_rotation():
    g, m, bc = slab_setup()
    th = 0.8
    U1 = hm.harmonic_solution(OMEGA, PROFILE, m, bc)
    U2 = hm.harmonic_solution(OMEGA, lambda p: PROFILE(p) * np.exp(1j * th), m, bc)
    ref = U1.scaled(np.exp(1j * th)).to_vector()
    assert np.linalg.norm(U2.to_vector() - ref) <= 1e-10 * np.linalg.norm(ref)


def test_trace_residual_first_order_in_dx():
    res = []
    for n in (40, 80, 160):
        g, m, bc = slab_setup(n)
        U = hm.harmonic_solution(OMEGA, PROFILE, m, bc)
        res.append(hm.trace_residual(U, m, bc))
    # measured 0.0158, 0.0079, 0.0039
    assert res[0] < 0.03
    assert 0.4 < res[1] / res[0] < 0.6 and 0.4 < res[2] / res[1] < 0.6


def test_exact_branch_stays_close():
    g, m, bc = slab_setup(60)
    dt = 0.9 * cfl_max_dt(g)
    U_hat = hm.harmonic_solution(OMEGA, PROFILE, m, bc)
    T = 10 * 2 * np.pi / OMEGA
    r = hm.convergence_test(OMEGA, PROFILE, m, bc, hm.rotate(U_hat, OMEGA, 0.0), T, dt, fit=False, U_hat=U_hat)
    nU = np.sqrt(np.sum(x_weights(g, m) * np.abs(U_hat.to_vector()) ** 2))
    assert np.max(r.err_x) < 10 * dt**2 * nU


def test_error_dynamics_are_the_homogeneous_flow():
    g, m, bc = slab_setup(40)
    dt = 0.9 * cfl_max_dt(g)
    U_hat = hm.harmonic_solution(OMEGA, PROFILE, m, bc)
    ref0 = hm.rotate(U_hat, OMEGA, 0.0)
    U0 = ref0.combine(1.0, hm.interior_perturbation(g), 3.0)
    n = 200
    Uf = run(m, bc, U0, dt, n, diagnostics=False).final
    Rf = run(m, bc, ref0, dt, n, diagnostics=False).final
    Hf = run(m, all_sm(g), U0.combine(1.0, ref0, -1.0), dt, n, diagnostics=False).final
    d = Uf.combine(1.0, Rf, -1.0).to_vector() - Hf.to_vector()
    assert np.linalg.norm(d) <= 1e-10 * np.linalg.norm(Hf.to_vector())


def test_incompatible_initial_data():
    g, m, bc = slab_setup()
    with pytest.raises(IncompatibleInitialData):
        hm.convergence_test(OMEGA, PROFILE, m, bc, StateVector.zeros(g, 2), 1.0, 0.01)


def test_perturbation_keeps_trace_and_is_divergence_free():
    g = Box((1, 1, 1), (6, 6, 6))
    P = hm.interior_perturbation(g, 2, 5.0)
    bc = all_sm(g)
    assert hm.trace_residual(P, medium(g), bc, g=lambda p: np.zeros((p.shape[0], 3))) == 0.0
    assert np.max(np.abs(g.div_e(P.E))) < 1e-12
    s = Slab(1.0, 30)
    assert np.all(s.split_e(hm.interior_perturbation(s).E)[0] == 0)


def test_mixed_box_decay_is_at_least_polynomial():
    g = Box((1, 1, 1), (6, 6, 6))
    m = medium(g)
    f = Forcing("harmonic", OMEGA, PROFILE)
    bc = BoundarySpec({"x-": SM}, f)
    U_hat = hm.harmonic_solution(OMEGA, None, m, bc)
    U0 = hm.rotate(U_hat, OMEGA, 0.0).combine(1.0, hm.interior_perturbation(g), 10.0)
    r = hm.convergence_test(OMEGA, PROFILE, m, bc, U0, 60.0, 0.9 * cfl_max_dt(g), model="poly",
                            window=(1, 60), every=5, U_hat=U_hat)
    # measured slope -0.92
    assert r.fit.rate <= -0.5 + 0.15


def test_csv_layout(tmp_path):
    g, m, bc = slab_setup(20)
    U_hat = hm.harmonic_solution(OMEGA, PROFILE, m, bc)
    r = hm.convergence_test(OMEGA, PROFILE, m, bc, hm.rotate(U_hat, OMEGA, 0.0), 0.5, 0.02, fit=False,
                            U_hat=U_hat)
    p = tmp_path / "h.csv"
    r.write_csv(str(p))
    assert p.read_text().splitlines()[0] == "t,err_X,err_J1,err_J2,err_E,err_B"
