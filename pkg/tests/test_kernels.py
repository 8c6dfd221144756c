import math

import numpy as np
import pytest
from scipy import integrate, special

from heavytail.errors import DomainError, StabilityOrderError
from heavytail.kernels import (bg_coefficient, check_sigma, convolution_kernel, gaussian_profile, levy_at_zero,
                               levy_derivative, levy_phi3_scaled, levy_profile, levy_profile_1d, levy_tail_mass,
                               mollify, normalizer_lower_bound, poisson_eval, poisson_normalizer, poisson_profile,
                               poisson_tail_mass, sphere_area, tail_coefficient)

from oracles import BG, LEVY_DENSITY, LEVY_DERIVATIVE, LEVY_PHI3, LEVY_TAIL, NORMALIZER, cauchy


# ---- Poisson normalizer ------------------------------------------------------

def test_normalizer_closed_forms():
    assert poisson_normalizer(1, 1.0) == pytest.approx(math.pi, abs=1e-12)
    assert poisson_normalizer(3, 1.0) == pytest.approx(math.pi ** 2, abs=1e-11)


@pytest.mark.parametrize("key", sorted(NORMALIZER))
def test_normalizer_frozen_values(key):
    assert poisson_normalizer(*key) == pytest.approx(NORMALIZER[key], rel=1e-11)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
@pytest.mark.parametrize("s", [0.05, 0.3, 1.0, 1.7, 1.99])
def test_normalizer_matches_beta_form(n, s):
    beta = sphere_area(n) * special.beta(n / 2, s / 2) / 2
    assert poisson_normalizer(n, s) == pytest.approx(beta, rel=1e-11)


def test_normalizer_exceeds_lower_bound_example():
    assert normalizer_lower_bound(1, 0.5) == pytest.approx(2 * 2 * 2 ** -0.75)
    assert poisson_normalizer(1, 0.5) > 2.378


def test_normalizer_blows_up_as_sigma_vanishes():
    vals = [poisson_normalizer(1, s) for s in (0.1, 0.01, 0.001)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] > 1000


def test_normalizer_rejects_bad_order():
    with pytest.raises(DomainError):
        poisson_normalizer(1, 2.0)
    with pytest.raises(DomainError):
        poisson_normalizer(0, 1.0)


# ---- Poisson evaluation ------------------------------------------------------

def test_poisson_eval_cauchy():
    assert poisson_eval(1, 1.0, 1.0, 0.0) == pytest.approx(1 / math.pi, rel=1e-14)
    x = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(poisson_eval(1, 1.0, 1.0, x), poisson_eval(1, 1.0, 1.0, -x), rtol=0)
    np.testing.assert_allclose(poisson_eval(1, 1.0, 0.3, x), cauchy(x, 0.3), rtol=1e-13)


def test_poisson_eval_radial_in_2d():
    p = np.array([[3.0, 4.0], [5.0, 0.0], [0.0, -5.0]])
    v = poisson_eval(2, 0.7, 1.3, p)
    assert np.ptp(v) == 0


def test_poisson_tail_mass_cauchy():
    assert float(poisson_tail_mass(1, 1.0, 1.0)) == pytest.approx(0.5, abs=1e-14)
    prof = poisson_profile(1, 1.0, 0.01)
    assert float(prof.tail_mass(1.0)) == pytest.approx(1 - 2 / math.pi * math.atan(100), rel=1e-12)


@pytest.mark.parametrize("n,s,a", [(1, 0.5, 2.0), (2, 1.3, 0.7), (3, 1.8, 5.0)])
def test_poisson_tail_mass_matches_quadrature(n, s, a):
    I = poisson_normalizer(n, s)
    f = lambda r: sphere_area(n) * r ** (n - 1) * (1 + r * r) ** (-(n + s) / 2) / I
    direct, _ = integrate.quad(f, a, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    assert float(poisson_tail_mass(n, s, a)) == pytest.approx(direct, rel=1e-9)


# ---- Levy density ------------------------------------------------------------

def test_levy_closed_forms():
    rho = np.concatenate([[0.0], np.geomspace(1e-3, 50, 199)])
    np.testing.assert_allclose(levy_profile_1d(1.0, rho), cauchy(rho), atol=1e-8, rtol=0)
    gauss = np.exp(-rho ** 2 / 4) / (2 * math.sqrt(math.pi))
    np.testing.assert_allclose(levy_profile_1d(2.0, rho), gauss, atol=1e-8, rtol=0)
    assert levy_profile_1d(1.0, 0.0) == pytest.approx(1 / math.pi)
    assert levy_profile_1d(2.0, 1.0) == pytest.approx(math.exp(-0.25) / (2 * math.sqrt(math.pi)), rel=1e-12)


@pytest.mark.parametrize("key", sorted(LEVY_DENSITY))
def test_levy_frozen_values(key):
    s, r = key
    assert levy_profile_1d(s, r) == pytest.approx(LEVY_DENSITY[key], rel=1e-11)


@pytest.mark.parametrize("key", sorted(LEVY_TAIL))
def test_levy_tail_frozen_values(key):
    assert levy_tail_mass(*key) == pytest.approx(LEVY_TAIL[key], rel=1e-11)


def test_levy_at_zero():
    for s in (0.5, 1.0, 1.5):
        assert levy_profile_1d(s, 0.0) == pytest.approx(math.gamma(1 + 1 / s) / math.pi)
    assert levy_at_zero(1.0) == pytest.approx(1 / math.pi)


@pytest.mark.parametrize("s", [0.4, 0.8, 1.2, 1.7])
def test_levy_series_and_quadrature_agree(s):
    rho = np.array([6.0, 12.0, 40.0, 150.0])
    a = levy_profile_1d(s, rho)
    b = levy_profile_1d(s, rho, use_series=False)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-16)


@pytest.mark.parametrize("s", [0.7, 1.3])
def test_levy_profile_integrates_to_one(s):
    assert levy_profile(s).mass() == pytest.approx(1.0, abs=1e-6)


def test_levy_tail_cauchy():
    for lam in (0.1, 1.0, 7.0, 300.0):
        assert levy_tail_mass(1.0, lam) == pytest.approx(1 - 2 / math.pi * math.atan(lam), rel=1e-10, abs=1e-15)


def test_levy_density_is_nonincreasing():
    rho = np.linspace(0, 30, 301)
    for s in (0.3, 1.0, 1.9):
        assert np.all(np.diff(levy_profile_1d(s, rho)) <= 1e-15)


def test_levy_rejects_negative_radius():
    with pytest.raises(DomainError):
        levy_profile_1d(1.0, -1.0)


# ---- Phi3 and the derivative -------------------------------------------------

@pytest.mark.parametrize("key", sorted(LEVY_PHI3))
def test_phi3_frozen_values(key):
    assert levy_phi3_scaled(*key) == pytest.approx(LEVY_PHI3[key], rel=1e-9)


@pytest.mark.parametrize("key", sorted(LEVY_DERIVATIVE))
def test_derivative_frozen_values(key):
    assert levy_derivative(*key) == pytest.approx(LEVY_DERIVATIVE[key], rel=1e-9)


def test_phi3_cauchy_closed_form():
    # three-dimensional sigma=1 density is pi^-2 (1 + rho^2)^-2
    rho = np.geomspace(0.05, 200, 25)
    np.testing.assert_allclose(levy_phi3_scaled(1.0, rho), rho ** 3 / (math.pi ** 2 * (1 + rho ** 2) ** 2),
                               rtol=1e-8)


def test_phi3_vanishes_at_origin():
    assert abs(levy_phi3_scaled(1.9, 1e-3)) < 1e-8


def test_derivative_matches_finite_difference():
    for s in (0.6, 1.4):
        h = 1e-4
        fd = (levy_profile_1d(s, 2 + h) - levy_profile_1d(s, 2 - h)) / (2 * h)
        assert levy_derivative(s, 2.0) == pytest.approx(fd, rel=1e-6)


def test_derivative_phi3_identity():
    # v'(rho) = -2 pi rho Phi3(rho) for unit-mass radial stable profiles
    rho = np.array([0.5, 3.0, 20.0])
    for s in (0.5, 1.5):
        phi3 = levy_phi3_scaled(s, rho) / rho ** 3
        np.testing.assert_allclose(levy_derivative(s, rho), -2 * math.pi * rho * phi3, rtol=1e-8)


# ---- Mollification and tail coefficients ------------------------------------

def test_mollify_identity_and_mass():
    g = poisson_profile(1, 0.8)
    assert mollify(g, 1.0) is g
    for y in (0.1, 2.0, 10.0):
        gy = mollify(g, y)
        assert gy.mass() == pytest.approx(1.0, abs=1e-7)
        assert gy.decreasing
        assert gy(3.0) == pytest.approx(g(3.0 / y) / y)


def test_tail_coefficient_poisson_cauchy():
    tc = tail_coefficient(poisson_profile(1, 1.0), 1.0)
    assert tc.value == pytest.approx(1 / math.pi, rel=1e-6)
    assert tc.residual < 1e-4


def test_tail_coefficient_levy_cauchy():
    tc = tail_coefficient(levy_profile(1.0), 1.0)
    assert tc.value == pytest.approx(1 / math.pi, rel=1e-6)
    assert tc.value == pytest.approx(bg_coefficient(1.0), rel=1e-6)


def test_tail_coefficient_wrong_order_is_flagged():
    with pytest.raises(StabilityOrderError, match="not sigma-stable"):
        tail_coefficient(poisson_profile(1, 1.0), 0.5)


def test_tail_coefficient_scaling():
    s = 0.8
    base = tail_coefficient(poisson_profile(1, s), s)
    scaled = tail_coefficient(mollify(poisson_profile(1, s), 3.0), s)
    assert scaled.value / base.value == pytest.approx(3.0 ** s, rel=1e-4)


def test_tail_coefficient_rejects_bad_probe():
    with pytest.raises(DomainError):
        tail_coefficient(poisson_profile(1, 1.0), 1.0, probe=[10.0, 5.0])


# ---- Blumenthal-Getoor coefficient -------------------------------------------

def test_bg_values():
    assert bg_coefficient(1.0) == pytest.approx(1 / math.pi, rel=1e-14)
    for s, v in BG.items():
        assert bg_coefficient(s) == pytest.approx(v, rel=1e-12)


@pytest.mark.parametrize("s", [0.5, 1.0, 1.5])
def test_bg_matches_levy_tail(s):
    tc = tail_coefficient(levy_profile(s), s)
    assert tc.value == pytest.approx(bg_coefficient(s), rel=0.05)


# ---- Gaussian and kernels ----------------------------------------------------

def test_gaussian_profile_mass_and_tail():
    for n in (1, 2, 3):
        g = gaussian_profile(n)
        assert g.mass() == pytest.approx(1.0, abs=1e-9)
        assert float(g.tail_mass(0.0)) == pytest.approx(1.0)


def test_convolution_kernel_symmetric():
    K = convolution_kernel(poisson_profile(2, 1.2, 0.5))
    x = np.array([[0.1, 0.2]])
    z = np.array([[1.0, -3.0]])
    assert K(x, z) == pytest.approx(K(z, x))
    assert K.translation_invariant


def test_check_sigma():
    assert check_sigma(2.0, allow_gaussian=True) == 2.0
    for bad in (0.0, 2.0, -1.0, 2.5):
        with pytest.raises(DomainError):
            check_sigma(bad)
