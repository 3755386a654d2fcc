import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from lmomdiv.models import (
    ParametricFamily,
    gpd_lmoment_jacobian,
    gpd_lmoment_map,
    gpd_model,
    model_by_name,
    model_jacobian,
    order_stat_model_3,
    order_stat_polynomial,
    weibull_lmoment_jacobian,
    weibull_lmoment_map,
    weibull_model,
)


# ---------------------------------------------------------------------------
# closed-form L-moment maps


def test_gpd_lmoment_values():
    # [DERIVED] sigma=3, nu=0.7: lambda_2 = 3/(0.3*1.3), ratio recursions
    l2, l3, l4 = gpd_lmoment_map(3.0, 0.7)
    assert l2 == pytest.approx(3.0 / (0.3 * 1.3))
    assert l3 == pytest.approx(l2 * 1.7 / 2.3)
    assert l4 == pytest.approx(l3 * 2.7 / 3.3)


def test_gpd_exponential_limit():
    # [DERIVED] nu -> 0 is the exponential law: tau_3 = 1/3, tau_4 = 1/6
    l2, l3, l4 = gpd_lmoment_map(1.0, 0.0)
    assert l2 == pytest.approx(0.5)
    assert l3 / l2 == pytest.approx(1.0 / 3.0)
    assert l4 / l2 == pytest.approx(1.0 / 6.0)


def test_weibull_exponential_case():
    # [DERIVED] nu=1 is exponential with mean sigma
    l2, l3, l4 = weibull_lmoment_map(2.0, 1.0)
    assert l2 == pytest.approx(1.0)
    assert l3 / l2 == pytest.approx(1.0 / 3.0)
    assert l4 / l2 == pytest.approx(1.0 / 6.0)


@pytest.mark.parametrize(
    "fn,jac,theta",
    [
        (gpd_lmoment_map, gpd_lmoment_jacobian, (3.0, 0.7)),
        (gpd_lmoment_map, gpd_lmoment_jacobian, (1.0, -0.4)),
        (weibull_lmoment_map, weibull_lmoment_jacobian, (3.0, 0.4)),
        (weibull_lmoment_map, weibull_lmoment_jacobian, (2.0, 2.5)),
    ],
)
def test_analytic_jacobians(fn, jac, theta):
    J = jac(*theta)
    h = 1e-6
    fd = np.column_stack([
        (np.array(fn(theta[0] + h, theta[1])) - np.array(fn(theta[0] - h, theta[1]))) / (2 * h),
        (np.array(fn(theta[0], theta[1] + h)) - np.array(fn(theta[0], theta[1] - h))) / (2 * h),
    ])
    assert np.allclose(J, fd, rtol=1e-5, atol=1e-5)


def test_lmoment_maps_match_quadrature():
    for fam in (ParametricFamily("gpd", 3.0, 0.7),
                ParametricFamily("gpd", 2.0, -0.5),
                ParametricFamily("weibull", 3.0, 0.4)):
        from lmomdiv.lmoments import population_lmoments

        lam = population_lmoments(fam.quantile, 4)
        assert np.allclose(lam.values[1:], fam.lmoments(), rtol=1e-6)


# ---------------------------------------------------------------------------
# distribution families


@pytest.mark.parametrize("fam", [
    ParametricFamily("gpd", 3.0, 0.7),
    ParametricFamily("gpd", 2.0, -0.5),
    ParametricFamily("gpd", 1.0, 0.0),
    ParametricFamily("weibull", 3.0, 0.4),
    ParametricFamily("weibull", 1.0, 2.0),
])
def test_quantile_inverts_cdf(fam):
    u = np.linspace(0.01, 0.99, 25)
    assert np.allclose(fam.cdf(fam.quantile(u)), u, atol=1e-9)


@pytest.mark.parametrize("fam", [
    ParametricFamily("gpd", 3.0, 0.5),
    ParametricFamily("gpd", 2.0, -0.5),
    ParametricFamily("weibull", 3.0, 0.4),
])
def test_density_integrates_to_one(fam):
    # piecewise between quantiles so the adaptive rule sees every scale
    cuts = fam.quantile(np.array([0.0, 0.5, 0.9, 0.99, 0.9999, 1.0 - 1e-9]))
    total = sum(
        quad(fam.density, a, b, limit=200)[0]
        for a, b in zip(cuts[:-1], cuts[1:])
    )
    assert total == pytest.approx(1.0, abs=1e-6)


def test_density_is_cdf_derivative():
    fam = ParametricFamily("gpd", 3.0, 0.7)
    x = np.linspace(0.5, 20.0, 30)
    h = 1e-6
    fd = (fam.cdf(x + h) - fam.cdf(x - h)) / (2 * h)
    assert np.allclose(fam.density(x), fd, rtol=1e-5)


def test_negative_shape_support():
    fam = ParametricFamily("gpd", 2.0, -0.5)
    assert fam.support == (0.0, pytest.approx(4.0))
    assert fam.cdf(5.0) == 1.0
    assert fam.density(5.0) == 0.0


def test_sampler_distribution():
    rng = np.random.default_rng(42)
    fam = ParametricFamily("gpd", 3.0, 0.1)
    x = fam.sample(100_000, rng)
    # Kolmogorov-Smirnov distance against the model cdf
    xs = np.sort(x)
    n = len(xs)
    u = fam.cdf(xs)
    ks = max(np.max(u - np.arange(n) / n), np.max(np.arange(1, n + 1) / n - u))
    assert ks < 0.006
    # mean within 3 standard errors: mean = sigma/(1-nu), var known finite
    mean = 3.0 / 0.9
    se = x.std(ddof=1) / np.sqrt(n)
    assert abs(x.mean() - mean) < 3 * se


def test_family_validation():
    with pytest.raises(ValueError):
        ParametricFamily("gpd", -1.0, 0.5)
    with pytest.raises(ValueError):
        ParametricFamily("weibull", 1.0, -0.5)
    with pytest.raises(ValueError):
        ParametricFamily("cauchy", 1.0, 0.5)


# ---------------------------------------------------------------------------
# constraint models


def test_gpd_model_shape():
    model = gpd_model()
    assert model.dim == 2
    assert model.n_constraints == 3
    assert model.param_names == ("sigma", "nu")
    theta = np.array([3.0, 0.7])
    assert np.allclose(model.target_map(theta), -np.array(gpd_lmoment_map(3.0, 0.7)))


def test_weibull_model_target():
    model = weibull_model()
    theta = np.array([3.0, 0.4])
    assert np.allclose(model.target_map(theta), -np.array(weibull_lmoment_map(3.0, 0.4)))


def test_model_jacobian_analytic_vs_fd():
    for model in (gpd_model(), weibull_model()):
        theta = np.array([2.0, 0.5])
        J = model_jacobian(model, theta)
        h = 1e-6
        fd = np.column_stack([
            (model.target_map(theta + h * e) - model.target_map(theta - h * e)) / (2 * h)
            for e in np.eye(2)
        ])
        assert np.allclose(J, fd, rtol=1e-5, atol=1e-6)


def test_clip_to_box():
    model = gpd_model()
    clipped = model.clip_to_box(np.array([1e9, 7.0]))
    assert model.in_box(clipped)
    assert clipped[1] <= 0.99


def test_model_by_name():
    assert model_by_name("gpd-l234").name == "gpd-l234"
    assert model_by_name("weibull-l234").name == "weibull-l234"
    assert model_by_name("orderstat3").dim == 1
    with pytest.raises(ValueError):
        model_by_name("gpd-l23456")


# ---------------------------------------------------------------------------
# order-statistic expectations


def test_order_stat_polynomial_uniform_means():
    # [DERIVED] E U_{j:3} = j/4 follows from integrating the weights
    for j, expect in ((1, 0.25), (2, 0.5), (3, 0.75)):
        val, _ = quad(lambda u: u * order_stat_polynomial(j, 3, u), 0.0, 1.0)
        assert val == pytest.approx(expect, abs=1e-10)


def test_order_stat_polynomial_normalized():
    # the three densities of ranks 1..3 average to the uniform density
    u = np.linspace(0.0, 1.0, 11)
    total = sum(order_stat_polynomial(j, 3, u) for j in (1, 2, 3))
    assert np.allclose(total, 3.0)


def test_orderstat3_rows_boundary():
    model = order_stat_model_3()
    assert np.allclose(model.constraint_values(0.0), 0.0)
    assert np.allclose(model.constraint_values(1.0), 0.0, atol=1e-12)


def test_orderstat3_target_consistency():
    # both adjacent rank gaps are constrained to the single spread parameter
    model = order_stat_model_3()
    target = model.target_map(np.array([1.5]))
    assert np.allclose(target, [-1.5, -1.5])
    # oracle check that the gaps are what the rows measure: for the uniform
    # quantile, integrating u against the differenced kernels gives 1/4
    for j in (1, 2):
        gap, _ = quad(
            lambda u: u * (order_stat_polynomial(j + 1, 3, u)
                           - order_stat_polynomial(j, 3, u)),
            0.0, 1.0,
        )
        assert gap == pytest.approx(0.25, abs=1e-10)


@given(st.floats(min_value=0.05, max_value=0.95))
@settings(max_examples=50, deadline=None)
def test_orderstat3_rows_are_integrated_densities(u):
    # row k integrates the difference of adjacent rank kernels up to u
    model = order_stat_model_3()
    rows = model.constraint_values(u)
    for k, j in enumerate((1, 2)):
        val, _ = quad(
            lambda s: order_stat_polynomial(j + 1, 3, s)
            - order_stat_polynomial(j, 3, s),
            0.0, u,
        )
        assert rows[k] == pytest.approx(val, abs=1e-9)
