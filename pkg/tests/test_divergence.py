import numpy as np
import pytest
from hypothesis import given, strategies as st

from lmomdiv.divergence import (
    CHI2,
    KL,
    KLM,
    ConjugateDomainError,
    divergence_by_name,
    power_divergence,
)

ALL = [CHI2, KL, KLM, power_divergence(0.5), power_divergence(3.0),
       power_divergence(-1.0)]


def test_phi_anchors():
    # [TRIVIAL] phi(1) = 0, phi'(1) = 0 for every member
    for div in ALL:
        assert div.phi(1.0) == pytest.approx(0.0, abs=1e-12)
        assert div.phi_prime(1.0) == pytest.approx(0.0, abs=1e-12)


def test_chi2_values():
    # [DERIVED] phi_2(x) = (x-1)^2 / 2
    x = np.array([0.0, 0.5, 2.0, 3.0])
    assert np.allclose(CHI2.phi(x), (x - 1) ** 2 / 2)
    assert CHI2.psi(0.3) == pytest.approx(0.3**2 / 2 + 0.3)


def test_kl_klm_values():
    # [DERIVED] gamma -> 1: x log x - x + 1;  gamma -> 0: -log x + x - 1
    x = 2.0
    assert KL.phi(x) == pytest.approx(2 * np.log(2) - 1)
    assert KLM.phi(x) == pytest.approx(-np.log(2) + 1)
    assert KL.psi(0.5) == pytest.approx(np.exp(0.5) - 1)
    assert KLM.psi(0.5) == pytest.approx(-np.log(0.5))


def test_extended_real_outside_domain():
    # chi-square is the one finite-everywhere member
    assert np.isfinite(CHI2.phi(-1.0))
    assert KL.phi(-0.5) == np.inf
    assert KLM.phi(0.0) == np.inf
    assert power_divergence(0.5).phi(-2.0) == np.inf


def test_psi_domain_errors():
    with pytest.raises(ConjugateDomainError):
        KLM.psi(1.0)
    with pytest.raises(ConjugateDomainError):
        KLM.psi(np.array([0.5, 1.2]))
    with pytest.raises(ConjugateDomainError):
        power_divergence(0.5).psi(3.0)   # needs 1 + (gamma-1) t > 0
    with pytest.raises(ConjugateDomainError):
        power_divergence(3.0).psi(-1.0)


def test_limit_branch_dispatch():
    # near-integer gamma routes to the closed-form limits
    for g, ref in [(1.0 + 1e-9, KL), (1e-9, KLM)]:
        div = power_divergence(g)
        for x in (0.5, 1.5, 3.0):
            assert div.phi(x) == pytest.approx(ref.phi(x))
        for t in (-0.5, 0.2):
            assert div.psi(t) == pytest.approx(ref.psi(t))


@pytest.mark.parametrize("div", ALL)
def test_conjugacy_roundtrip(div):
    # [DERIVED] psi(t) = sup_x (t x - phi(x)); attained at x = psi'(t)
    for t in (-0.4, -0.1, 0.05, 0.3):
        if div.family == "klm" and t >= 1.0:
            continue
        x_star = div.psi_prime(t)
        assert div.psi(t) == pytest.approx(t * x_star - div.phi(x_star), abs=1e-6)
        # sup property against a grid
        xs = np.linspace(1e-6, 6.0, 500)
        vals = t * xs - div.phi(xs)
        assert div.psi(t) >= np.max(vals) - 1e-6


@pytest.mark.parametrize("div", ALL)
def test_derivatives_match_finite_differences(div):
    h = 1e-6
    for x in (0.5, 1.0, 2.5):
        fd = (div.phi(x + h) - div.phi(x - h)) / (2 * h)
        assert div.phi_prime(x) == pytest.approx(fd, abs=1e-6)
    for t in (-0.3, 0.1):
        fd = (div.psi(t + h) - div.psi(t - h)) / (2 * h)
        assert div.psi_prime(t) == pytest.approx(fd, abs=1e-6)
        fd2 = (div.psi_prime(t + h) - div.psi_prime(t - h)) / (2 * h)
        assert div.psi_second(t) == pytest.approx(fd2, rel=1e-4, abs=1e-6)


@pytest.mark.parametrize("div", ALL)
def test_convexity(div):
    xs = np.linspace(0.05, 5.0, 200)
    vals = div.phi(xs)
    # discrete second differences of a convex function are nonnegative
    assert np.all(np.diff(vals, 2) > -1e-10)
    assert np.all(vals >= -1e-12)


@given(st.floats(min_value=0.05, max_value=5.0),
       st.floats(min_value=-0.9, max_value=0.9))
def test_young_fenchel(x, t):
    # [DERIVED] phi(x) + psi(t) >= t x for every admissible pair
    for div in (CHI2, KL, KLM):
        if div.family == "klm" and t >= 1.0:
            continue
        assert div.phi(x) + div.psi(t) >= t * x - 1e-9


def test_divergence_by_name():
    assert divergence_by_name("chi2").gamma == 2.0
    assert divergence_by_name("kl").family == "kl"
    assert divergence_by_name("klm").family == "klm"
    assert divergence_by_name("power:0.5").gamma == 0.5
    with pytest.raises(ValueError):
        divergence_by_name("hellinger")


def test_psi_array_vectorized():
    t = np.array([-0.5, 0.0, 0.4])
    out = CHI2.psi(t)
    assert out.shape == (3,)
    assert np.allclose(out, t**2 / 2 + t)
