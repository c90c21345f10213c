import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coldplasma import spectral_probe as spp
from coldplasma.errors import ShapeMismatch
from coldplasma.fdtd_core import SM, Box, BoundarySpec, Slab, StateVector, all_pec, all_sm, apply_generator
from coldplasma.fdtd_core.assembly import assemble_generator
from coldplasma.fdtd_core.boundary import BoundaryOperator
from coldplasma.fdtd_core.state import x_weights
from coldplasma.medium import Constant, MediumSpec, SpeciesSpec, uniform_medium

B_DIR = [0.3, 0.2, 1.0]


def medium(grid, nu=1.0):
    return uniform_medium(grid, [1.0, 0.6], [nu, nu], [-1.0, 0.4], B_DIR)


@pytest.mark.parametrize("grid,bc", [(Slab(1.0, 12), "pec"), (Slab(1.0, 12), "sm"),
                                     (Box((1, 1, 1), (3, 2, 4)), "mixed")])
def test_assembled_matches_matrix_free(grid, bc):
    b = {"pec": all_pec(grid), "sm": all_sm(grid), "mixed": BoundarySpec({"x-": SM})}[bc]
    m = medium(grid)
    bops = BoundaryOperator(grid, b)
    A, free = assemble_generator(m, b, bops)
    nA = np.abs(A).sum(axis=0).max()
    rng = np.random.default_rng(0)
    for _ in range(100):
        U = StateVector.from_vector(rng.standard_normal(A.shape[0]), grid, 2)
        U.E[bops.pinned] = 0.0
        v = U.to_vector()
        d = A @ v - apply_generator(U, m, bops).to_vector()
        assert np.max(np.abs(d)) <= 1e-13 * nA * np.max(np.abs(v))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["pec", "sm"]))
def test_numerical_range_nonnegative(seed, kind):
    g = Slab(1.0, 10)
    op = spp.assemble_slab(medium(g, 0.3), all_pec(g) if kind == "pec" else all_sm(g))
    y = np.random.default_rng(seed).standard_normal(op.dim)
    assert y @ (op.A_hat @ y) >= -1e-12 * op.norm() * (y @ y)


def test_longitudinal_block_roots():
    # one species, no rotation: every node carries (J_x, E_x) with
    # d/dt J = eps0 wp^2 E - nu J, d/dt E = -J / eps0
    g = Slab(1.0, 6)
    wp, nu, eps0 = 1.3, 0.7, 2.0
    m = uniform_medium(g, [wp], [nu], [0.0], eps0=eps0)
    op = spp.assemble_slab(m, all_pec(g))
    lam = np.linalg.eigvals(op.dense())
    roots = np.roots([1.0, -nu, wp**2])
    for r in roots:
        assert np.sum(np.abs(lam - r) < 1e-10) >= g.n_nodes


def test_assemble_slab_shape_checks():
    with pytest.raises(ShapeMismatch):
        spp.assemble_slab(medium(Slab(1.0, 3)), all_pec(Slab(1.0, 3)))
    with pytest.raises(ShapeMismatch):
        spp.assemble_slab(medium(Box((1, 1, 1), (2, 2, 2))), all_pec(Box((1, 1, 1), (2, 2, 2))))
    with pytest.raises(ShapeMismatch):
        spp.assemble_slab(medium(Slab(1.0, 8)), all_pec(Slab(1.0, 8)), n=9)
    spec = MediumSpec((SpeciesSpec(Constant(1.0), Constant(1.0)),), (Constant(0.0), Constant(0.0), Constant(1.0)))
    op = spp.assemble_slab(spec, all_pec(Slab(2.0, 10)), 10, length=2.0)
    assert op.n == 10 and op.grid.length == 2.0


def test_kernel_basis_dimensions():
    g = Slab(1.0, 10)
    op = spp.assemble_slab(medium(g), all_pec(g))
    K = spp.kernel_basis(op)
    assert K.shape[1] == 2
    assert np.linalg.norm(op.A_hat @ K) < 1e-12
    Q = spp.tilde_basis(op)
    assert Q.shape[1] == op.dim - 2
    assert np.linalg.norm(K.T @ Q) < 1e-12
    assert spp.kernel_basis(spp.assemble_slab(medium(g), all_sm(g))).shape[1] == 0


def test_undamped_pec_has_imaginary_pairs():
    g = Slab(1.0, 30)
    op = spp.assemble_slab(medium(g, nu=0.0), all_pec(g))
    rep = spp.spectrum_near_axis(op)
    assert spp.imaginary_pairs(rep.eigenvalues) >= 5
    assert rep.min_re >= -1e-10 * op.norm()


def test_damped_pec_tilde_space_clean():
    g = Slab(1.0, 30)
    op = spp.assemble_slab(medium(g), all_pec(g))
    full = spp.spectrum_near_axis(op)
    assert full.counts["kernel-mode"] == 2 and full.counts["suspicious"] == 0
    rep = spp.spectrum_near_axis(op, restrict=spp.tilde_basis(op))
    assert rep.counts["suspicious"] == 0 and rep.counts["kernel-mode"] == 0
    assert rep.min_re_nonkernel > 0
    assert rep.min_re >= -1e-10 * op.norm()


def test_spectral_abscissa_band():
    # eigenvalues of A_h; the abscissa belongs to -A_h
    lam = np.array([1 + 0.5j, 0.2 + 300j, 2 - 1j])
    assert spp.spectral_abscissa(lam) == pytest.approx(-0.2)
    assert spp.spectral_abscissa(lam, band=10) == pytest.approx(-1.0)


def test_resolvent_continuous_at_zero_absorbing():
    g = Slab(1.0, 30)
    op = spp.assemble_slab(medium(g), all_sm(g))
    c = spp.resolvent_curve(op, [-1e-3, 0.0, 1e-3])
    assert np.all(np.isfinite(c.norms))
    assert np.max(c.norms) / np.min(c.norms) < 1.1


def test_dense_and_sparse_singular_values_agree():
    g = Slab(1.0, 20)
    op = spp.assemble_slab(medium(g), all_pec(g))
    K = spp.kernel_basis(op)
    betas = [0.5, 3.0, 11.0]
    d = spp.resolvent_curve(op, betas, K)
    s = spp.resolvent_curve(op, betas, K, dense_max=0)
    assert d.method == "dense" and s.method == "sparse-lanczos"
    np.testing.assert_allclose(s.sigma_min, d.sigma_min, rtol=1e-6)


def test_betas_deduplicated_and_nudged():
    b = spp._dedupe_betas([2.0, 1.0, 2.0, 3.0], np.array([3.0]))
    assert b[0] == 1.0 and b[1] == 2.0 and b.size == 3
    assert b[2] == pytest.approx(3.0 + 1e-9, abs=1e-15)


def test_envelope_slope_of_synthetic_peaks():
    beta = np.linspace(1, 100, 4000)
    r = beta**2 * (1.5 + np.cos(2 * np.pi * beta))
    c = spp.ResolventCurve(beta, 1 / r, r)
    assert spp.envelope_slope(c, (5, 100)) == pytest.approx(2.0, abs=0.02)


def test_quasimodes_witness():
    g = Slab(1.0, 100)
    op = spp.assemble_slab(medium(g), all_pec(g))
    q = spp.cavity_quasimodes(op, 4)
    res = [x.residual for x in q]
    assert all(a > b for a, b in zip(res, res[1:]))
    assert res[3] < 0.5 * res[0]
    assert min(x.norm for x in q) > 0.5


def test_csv_and_json(tmp_path):
    g = Slab(1.0, 10)
    op = spp.assemble_slab(medium(g), all_sm(g))
    c = spp.resolvent_curve(op, np.linspace(0, 5, 30), envelope_window=(1, 5))
    c.write_csv(str(tmp_path / "r.csv"))
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "beta,sigma_min,resolvent_norm"
    c.write_json(str(tmp_path / "r.json"))
    assert "tail_slope" in (tmp_path / "r.json").read_text()
