import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, special

from crmfk.families import (
    BaseMeasure,
    CrmSpec,
    cumulant,
    cumulant_by_quadrature,
    inverse_tail_mass,
    inverse_tail_mass_batch,
    laplace_exponent,
    levy_density,
    spec_from_config,
    spec_to_config,
    tail_mass,
)

GAMMA = CrmSpec.gamma_process(1.0)
GAMMA_SCALED = CrmSpec.gamma_process(2.0, theta=3.0)
IG = CrmSpec.inverse_gaussian(1.0)
GG = CrmSpec.generalized_gamma(1.5, 0.75, theta=2.0)
BETA = CrmSpec.beta_process(1.0, 1.0)
BETA_WIDE = CrmSpec.beta_process(2.0, 30.0)
SBP = CrmSpec.stable_beta(1.0, 0.5, 0.5)
ALL = [GAMMA, GAMMA_SCALED, IG, GG, BETA, BETA_WIDE, SBP]


# ---------------------------------------------------------------------------
# construction

def test_family_constructors_pin_linked_parameters():
    assert GAMMA.gamma == 0.0
    assert IG.gamma == 0.5
    assert BETA.sigma == 0.0


@pytest.mark.parametrize("bad", [
    lambda: CrmSpec.gamma_process(-1.0),
    lambda: CrmSpec.gamma_process(1.0, theta=0.0),
    lambda: CrmSpec.generalized_gamma(1.0, 1.0),
    lambda: CrmSpec.generalized_gamma(1.0, -0.1),
    lambda: CrmSpec.beta_process(1.0, 0.0),
    lambda: CrmSpec.stable_beta(1.0, -0.6, 0.5),
    lambda: CrmSpec.stable_beta(1.0, 1.0, 1.0),
    lambda: CrmSpec("gamma", 1.0, gamma=0.3, theta=1.0),
    lambda: CrmSpec("inverse_gaussian", 1.0, gamma=0.0, theta=1.0),
    lambda: CrmSpec("beta", 1.0, c=1.0, sigma=0.2),
    lambda: CrmSpec("no_such", 1.0),
])
def test_invalid_specs_rejected(bad):
    with pytest.raises(ValueError):
        bad()


# ---------------------------------------------------------------------------
# tail mass

def test_gamma_tail_is_exponential_integral():
    v = np.array([1e-8, 1e-3, 0.5, 5.0])
    assert np.allclose(tail_mass(GAMMA, v), special.exp1(v), rtol=1e-13)
    assert np.allclose(tail_mass(GAMMA_SCALED, v), 2.0 * special.exp1(3.0 * v),
                       rtol=1e-13)


def test_beta_unit_c_tail_is_log():
    for v in [1e-10, 0.01, 0.4, 0.97]:
        assert tail_mass(BETA, v) == pytest.approx(-math.log(v), rel=1e-12)


def test_sbp_conjugate_c_tail_closed_form():
    # c = 1 - sigma: N(v) = a (1 - sigma) (v^-sigma - 1) / sigma
    spec = CrmSpec.stable_beta(1.3, 0.5, 0.5)
    for v in [1e-9, 0.02, 0.6]:
        want = 1.3 * 0.5 * (v ** -0.5 - 1.0) / 0.5
        assert tail_mass(spec, v) == pytest.approx(want, rel=1e-12)


def test_ig_tail_against_mpmath():
    mpmath.mp.dps = 40
    for v in [1e-6, 0.03, 1.0, 8.0]:
        want = float(mpmath.gammainc(mpmath.mpf("-0.5"), a=v)
                     / mpmath.gamma(mpmath.mpf("0.5")))
        assert tail_mass(IG, v) == pytest.approx(want, rel=1e-11)


def test_tail_mass_vanishes_outside_sbp_support():
    assert tail_mass(SBP, 1.0) == 0.0
    assert tail_mass(SBP, 2.0) == 0.0


def test_tail_mass_is_integral_of_density():
    for spec in ALL:
        hi = np.inf if spec.family in ("gamma", "inverse_gaussian",
                                       "generalized_gamma") else 1.0
        for v in [0.11, 0.63]:
            want, _ = integrate.quad(lambda t: levy_density(spec, t), v, hi)
            assert tail_mass(spec, v) == pytest.approx(want, rel=1e-9), spec.family


# ---------------------------------------------------------------------------
# inversion

@pytest.mark.parametrize("spec", ALL)
def test_inverse_tail_mass_round_trip(spec):
    for xi in [1e-4, 0.3, 2.0, 17.0, 300.0]:
        v = inverse_tail_mass(spec, xi)
        assert tail_mass(spec, v) == pytest.approx(xi, rel=1e-9)


def test_inverse_tail_mass_batch_matches_scalar_route():
    xi = np.array([0.05, 1.0, 4.0, 90.0])
    got = inverse_tail_mass_batch(GG, xi)
    assert np.allclose(tail_mass(GG, got), xi, rtol=1e-9)


def test_inverse_tail_mass_with_prev_jump_bracket():
    xi1, xi2 = 1.0, 2.5
    j1 = inverse_tail_mass(GAMMA, xi1)
    j2 = inverse_tail_mass(GAMMA, xi2, prev_jump=j1)
    assert j2 < j1
    assert tail_mass(GAMMA, j2) == pytest.approx(xi2, rel=1e-9)


def test_inverse_tail_mass_decreasing_in_xi():
    xi = np.linspace(0.01, 50.0, 400)
    for spec in [GAMMA, SBP, BETA_WIDE]:
        j = inverse_tail_mass_batch(spec, xi)
        assert np.all(np.diff(j) < 0)


def test_inverse_tail_mass_rejects_bad_levels():
    with pytest.raises(ValueError):
        inverse_tail_mass(GAMMA, 0.0)
    with pytest.raises(ValueError):
        inverse_tail_mass_batch(GAMMA, np.array([1.0, -2.0]))


# ---------------------------------------------------------------------------
# cumulants

def test_gamma_cumulants_closed_form():
    # kappa_i = a (i-1)! / theta^i
    for i in range(1, 7):
        assert cumulant(GAMMA_SCALED, i) == pytest.approx(
            2.0 * math.factorial(i - 1) / 3.0 ** i, rel=1e-13)


def test_beta_cumulants_closed_form():
    # kappa_i = a (i-1)! / (c+1)_(i-1)
    spec = CrmSpec.beta_process(2.0, 3.0)
    for i, want in [(1, 2.0), (2, 2.0 / 4.0), (3, 2.0 * 2.0 / 20.0)]:
        assert cumulant(spec, i) == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("spec", ALL)
@pytest.mark.parametrize("i", [1, 2, 3, 4])
def test_cumulant_matches_quadrature(spec, i):
    assert cumulant(spec, i) == pytest.approx(
        cumulant_by_quadrature(spec, i), rel=1e-8)


def test_cumulant_rejects_order_zero():
    with pytest.raises(ValueError):
        cumulant(GAMMA, 0)


# ---------------------------------------------------------------------------
# Laplace exponent

def test_laplace_exponent_gamma_log_form():
    u = np.array([0.0, 0.5, 4.0, 77.0])
    assert np.allclose(laplace_exponent(GAMMA_SCALED, u),
                       2.0 * np.log1p(u / 3.0), rtol=1e-13)


def test_laplace_exponent_gg_closed_form_vs_quadrature():
    for u in [0.3, 2.0, 11.0]:
        want, _ = integrate.quad(
            lambda v: -special.expm1(-u * v) * levy_density(GG, v), 0.0, np.inf)
        assert laplace_exponent(GG, u) == pytest.approx(want, rel=1e-8)


def test_laplace_exponent_small_index_approaches_gamma():
    nearly = CrmSpec.generalized_gamma(1.0, 1e-9, theta=1.0)
    for u in [0.5, 3.0]:
        assert laplace_exponent(nearly, u) == pytest.approx(
            laplace_exponent(GAMMA, u), rel=1e-6)


def test_laplace_exponent_sbp_vs_direct_quadrature():
    for spec in [BETA, SBP]:
        for u in [0.7, 5.0]:
            want, _ = integrate.quad(
                lambda v: -special.expm1(-u * v) * levy_density(spec, v),
                0.0, 1.0, points=[1e-12, 1e-6])
            assert laplace_exponent(spec, u) == pytest.approx(want, rel=1e-7)


def test_laplace_exponent_monotone_from_zero():
    u = np.linspace(0.0, 20.0, 50)
    for spec in [GAMMA, GG, SBP]:
        psi = laplace_exponent(spec, u)
        assert psi[0] == 0.0
        assert np.all(np.diff(psi) > 0)


def test_laplace_exponent_rejects_negative_u():
    with pytest.raises(ValueError):
        laplace_exponent(GAMMA, -0.5)


# ---------------------------------------------------------------------------
# base measures and serialization

def test_base_measure_sampling_shapes_and_ranges():
    rng = np.random.default_rng(7)
    u = BaseMeasure("uniform", (2.0, 5.0)).sample(rng, 1000)
    assert u.shape == (1000,) and u.min() >= 2.0 and u.max() <= 5.0
    n = BaseMeasure("normal", (10.0, 0.5)).sample(rng, 1000)
    assert abs(n.mean() - 10.0) < 0.1
    nig = BaseMeasure("normal_inverse_gamma", (20.0, 0.01, 2.0, 1.0))
    draws = nig.sample(rng, 500)
    assert draws.shape == (500, 2)
    assert np.all(draws[:, 1] > 0)


def test_empirical_base_measure(tmp_path):
    p = tmp_path / "vals.txt"
    p.write_text("1.5\n2.5\n3.5\n")
    bm = BaseMeasure.empirical(p)
    rng = np.random.default_rng(0)
    draws = bm.sample(rng, 200)
    assert set(np.unique(draws)) <= {1.5, 2.5, 3.5}


def test_base_measure_validation():
    with pytest.raises(ValueError):
        BaseMeasure("uniform", (1.0, 1.0))
    with pytest.raises(ValueError):
        BaseMeasure("normal", (0.0, 0.0))
    with pytest.raises(ValueError):
        BaseMeasure("mystery")


@pytest.mark.parametrize("spec", ALL)
def test_spec_config_round_trip(spec):
    back = spec_from_config(spec_to_config(spec))
    assert back.family == spec.family
    assert back.a == spec.a
    assert back.gamma == spec.gamma
    assert back.theta == spec.theta
    assert back.c == spec.c
    assert back.sigma == spec.sigma
    assert back.base_measure.kind == spec.base_measure.kind


def test_spec_config_round_trip_custom_base(tmp_path):
    p = tmp_path / "vals.txt"
    p.write_text("1.0\n2.0\n")
    spec = CrmSpec.gamma_process(1.0, base_measure=BaseMeasure.empirical(p))
    back = spec_from_config(spec_to_config(spec))
    assert back.base_measure.kind == "empirical"
    assert back.base_measure.path == str(p)
