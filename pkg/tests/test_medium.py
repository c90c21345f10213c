import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coldplasma.errors import ValidationError, ZeroExternalField
from coldplasma.fdtd_core.grid import Box, Slab
from coldplasma.medium import (Affine, Constant, Gaussian, MediumSpec, Product, SpeciesSpec,
                               profile_from_dict, sample_medium, uniform_medium, validate_hypotheses)


def spec(wp=Constant(1.0), nu=Constant(1.0), B=(0.0, 0.0, 2.0), q_m=1.0):
    return MediumSpec(species=(SpeciesSpec(wp, nu, -1, q_m), SpeciesSpec(Constant(0.5), Constant(1.0), 1, 0.1)),
                      B_ext=tuple(Constant(x) for x in B))


def test_uniform_field_gives_uniform_direction():
    m = sample_medium(spec(), Box((1, 1, 1), (3, 3, 3)))
    np.testing.assert_allclose(m.b, np.tile([0, 0, 1.0], (m.n_points, 1)))
    np.testing.assert_allclose(m.Omega_c[0], -2.0)
    np.testing.assert_allclose(m.Omega_c[1], 0.2)
    assert m.bounds.hyp1_ok and m.bounds.hyp2_ok


def test_zero_plasma_frequency_flags_hypothesis():
    wp = Gaussian(1.0, -1.0, (0.5, 0.0, 0.0), 0.1)
    g = Slab(1.0, 10)  # node x = 0.5 sits in the middle
    m = sample_medium(spec(wp=wp), g)
    assert not m.bounds.hyp1_ok
    assert 5 in m.bounds.hyp1_violations


def test_ramp_collision_bounds():
    g = Slab(1.0, 20)
    m = sample_medium(spec(nu=Affine(0.5, (1.0, 0.0, 0.0))), g)
    assert m.bounds.nu_lower == pytest.approx(0.5)
    assert m.bounds.nu_star == pytest.approx(1.5)
    assert m.bounds.hyp2_ok


def test_zero_external_field_raises_when_magnetised():
    with pytest.raises(ZeroExternalField):
        sample_medium(spec(B=(0.0, 0.0, 0.0)), Slab(1.0, 4))


def test_zero_external_field_allowed_without_rotation():
    sp = MediumSpec((SpeciesSpec(Constant(1.0), Constant(1.0), -1, 0.0),), (Constant(0.0),) * 3)
    m = sample_medium(sp, Slab(1.0, 4))
    assert np.all(m.Omega_c[0] == 0.0)


def test_undamped_medium_fails_only_positivity():
    r = uniform_medium(Slab(1.0, 5), [1.0], [0.0], [0.0]).bounds
    assert r.hyp1_ok and not r.hyp2_ok


def test_constant_medium_bounds():
    r = uniform_medium(Slab(1.0, 5), [1.0], [1.0], [2.0]).bounds
    assert r.hyp1_ok and r.hyp2_ok
    assert r.nu_star == 1.0 and r.Omega_star == 2.0


def test_profile_round_trip():
    p = Product((Affine(1.0, (0.5, 0, 0)), Gaussian(0.2, 1.0, (0.5, 0.5, 0.5), 0.3)))
    q = profile_from_dict(p.to_dict())
    pts = np.random.default_rng(0).random((10, 3))
    np.testing.assert_array_equal(p(pts), q(pts))
    assert profile_from_dict(2.5) == Constant(2.5)


def test_bad_profile_is_located():
    with pytest.raises(ValidationError) as e:
        profile_from_dict({"type": "gaussian", "amplitude": 1, "center": [0, 0, 0], "width": 0}, "/x")
    assert e.value.pointer == "/x/width"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_field_direction_unit_and_bounds_match_scan(seed):
    rng = np.random.default_rng(seed)
    B = tuple(Affine(float(rng.normal()), tuple(rng.normal(size=3))) for _ in range(3))
    nu = Affine(float(rng.uniform(-0.2, 1)), tuple(rng.normal(size=3)))
    g = Box((1, 1, 1), (3, 2, 2))
    try:
        m = sample_medium(MediumSpec((SpeciesSpec(Constant(1.0), nu),), B), g)
    except ZeroExternalField:
        return
    assert np.max(np.abs(np.linalg.norm(m.b, axis=1) - 1.0)) <= 1e-12
    r = m.bounds
    # exhaustive loop oracle
    bad1, nus, oms = [], [], []
    for i in range(m.n_points):
        v, w, o = m.nu[0][i], m.omega_p[0][i], m.Omega_c[0][i]
        nus.append(v)
        oms.append(abs(o))
        if v < 0 or w <= 0:
            bad1.append(i)
    assert r.nu_star == max(nus) and r.nu_lower == min(nus) and r.Omega_star == max(oms)
    assert r.hyp1_violations == tuple(bad1)
    assert r.hyp1_ok == (not bad1)


def test_validation_idempotent_and_order_independent():
    g = Slab(1.0, 30)
    m = sample_medium(spec(nu=Affine(-0.1, (1.0, 0, 0))), g)
    r1, r2 = validate_hypotheses(m), validate_hypotheses(m)
    assert r1 == r2
    perm = np.random.default_rng(1).permutation(m.n_points)
    from coldplasma.medium import MediumFields
    mp = MediumFields(g, tuple(a[perm] for a in m.omega_p), tuple(a[perm] for a in m.nu),
                      tuple(a[perm] for a in m.Omega_c), m.b[perm])
    rp = validate_hypotheses(mp)
    assert (rp.nu_star, rp.nu_lower, rp.Omega_star, rp.hyp1_ok, rp.hyp2_ok) == \
        (r1.nu_star, r1.nu_lower, r1.Omega_star, r1.hyp1_ok, r1.hyp2_ok)
    assert sorted(perm[list(rp.hyp1_violations)]) == list(r1.hyp1_violations)
