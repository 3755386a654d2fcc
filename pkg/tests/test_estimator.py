import numpy as np
import pytest

from lmomdiv.divergence import CHI2, KL, KLM
from lmomdiv.estimator import (
    EstimationError,
    OuterConfig,
    asymptotic_covariance,
    confidence_stat,
    envelope_gradient,
    fit_divergence,
    fit_lmoment_method_gpd,
    fit_mle_gpd,
    fit_moment_method_gpd,
)
from lmomdiv.lmoments import SortedSample
from lmomdiv.models import ParametricFamily, gpd_model, model_by_name


def grid_sample(fam, n):
    """Deterministic stand-in sample on the mid-point quantile grid."""
    u = (np.arange(n) + 0.5) / n
    return SortedSample(fam.quantile(u))


def mc_sample(fam, n, seed):
    return SortedSample(fam.sample(n, np.random.default_rng(seed)))


# ---------------------------------------------------------------------------
# divergence fits


def test_fit_recovers_parameters_on_grid_sample():
    fam = ParametricFamily("gpd", 3.0, 0.4)
    s = grid_sample(fam, 2000)
    for div in (CHI2, KLM):
        report = fit_divergence(s, gpd_model(), div)
        assert np.allclose(report.theta, [3.0, 0.4], atol=0.05)
        assert report.criterion >= -1e-12
        # the truncated tail of the grid sample leaves a small residual
        assert report.criterion < 1e-3


def test_fit_report_contents():
    s = mc_sample(ParametricFamily("gpd", 3.0, 0.2), 150, seed=0)
    report = fit_divergence(s, gpd_model(), CHI2)
    assert report.method == "divergence:chi2"
    assert report.param_names == ("sigma", "nu")
    assert report.xi.shape == (3,)
    assert {"outer_iterations", "inner_failures", "boundary"} <= set(report.diagnostics)
    d = report.to_dict()
    assert set(d["theta"]) == {"sigma", "nu"}


def test_fit_shift_invariance():
    # the criterion sees only spacings, and the search starts from
    # shift-invariant statistics, so a translated sample gives the same fit
    s = mc_sample(ParametricFamily("gpd", 3.0, 0.3), 120, seed=1)
    t = s.shifted(250.0)
    a = fit_divergence(s, gpd_model(), CHI2)
    b = fit_divergence(t, gpd_model(), CHI2)
    assert np.allclose(a.theta, b.theta, atol=1e-6)


def test_fit_with_explicit_starts():
    s = mc_sample(ParametricFamily("gpd", 3.0, 0.3), 100, seed=2)
    cfg = OuterConfig(starts=[np.array([2.0, 0.2])])
    report = fit_divergence(s, gpd_model(), KL, cfg)
    assert report.diagnostics["n_starts"] == 1
    assert np.isfinite(report.criterion)


def test_fit_small_sample_raises():
    s = SortedSample(np.array([1.0, 2.0, 3.0]))
    with pytest.raises(EstimationError):
        fit_divergence(s, gpd_model(), CHI2)


def test_envelope_gradient_vanishes_at_optimum():
    s = mc_sample(ParametricFamily("gpd", 3.0, 0.2), 400, seed=3)
    model = gpd_model()
    report = fit_divergence(s, model, CHI2)
    assert not report.diagnostics["boundary"]
    g = envelope_gradient(model, report.theta, report.xi)
    # scale-free comparison against the multiplier magnitude
    assert np.linalg.norm(g) < 1e-4 * (1.0 + np.linalg.norm(report.xi))


def test_weibull_model_fit():
    fam = ParametricFamily("weibull", 3.0, 0.5)
    s = grid_sample(fam, 1500)
    report = fit_divergence(s, model_by_name("weibull-l234"), CHI2)
    assert np.allclose(report.theta, [3.0, 0.5], atol=0.05)


# ---------------------------------------------------------------------------
# asymptotic covariance and the confidence statistic


@pytest.fixture(scope="module")
def gpd_cov():
    model = gpd_model()
    theta = np.array([3.0, 0.1])
    return asymptotic_covariance(theta, model, ParametricFamily("gpd", 3.0, 0.1))


def test_projection_identities(gpd_cov):
    # [DERIVED] H J0 = I and P J0 = 0 characterize the two blocks
    assert np.allclose(gpd_cov.h @ gpd_cov.j0, np.eye(2), atol=1e-10)
    assert np.allclose(gpd_cov.p @ gpd_cov.j0, 0.0, atol=1e-10)


def test_covariance_matrices_psd(gpd_cov):
    for mat in (gpd_cov.sigma, gpd_cov.omega, gpd_cov.cov_theta, gpd_cov.cov_xi):
        assert np.allclose(mat, mat.T)
        assert np.all(np.linalg.eigvalsh(mat) > -1e-10)


def test_omega_positive_definite(gpd_cov):
    assert np.all(np.linalg.eigvalsh(gpd_cov.omega) > 0)


def test_confidence_stat_zero_multiplier(gpd_cov):
    stat = confidence_stat(np.zeros(3), gpd_cov.p, gpd_cov.sigma, 100)
    assert stat.s_n == pytest.approx(0.0, abs=1e-12)
    assert stat.p_value == pytest.approx(1.0)


def test_confidence_stat_rank_adjustment(gpd_cov):
    # three constraints, two parameters: the multiplier covariance has
    # rank one and the reduced degrees of freedom are flagged
    stat = confidence_stat(np.array([0.01, -0.02, 0.005]), gpd_cov.p,
                           gpd_cov.sigma, 100)
    assert stat.rank == 1
    assert stat.df == 1
    assert stat.rank_adjusted


def test_confidence_stat_full_rank_path():
    stat = confidence_stat(np.array([0.3, -0.1]), np.eye(2), np.eye(2), 50)
    assert not stat.rank_adjusted
    assert stat.df == 2
    assert stat.s_n == pytest.approx(50 * 0.1)


# ---------------------------------------------------------------------------
# classical estimators


def test_lmoment_method_roundtrip():
    fam = ParametricFamily("gpd", 3.0, 0.7)
    s = grid_sample(fam, 5000)
    sigma, nu = fit_lmoment_method_gpd(s)
    # the mid-point grid clips the heavy upper tail, biasing both a little
    assert sigma == pytest.approx(3.0, abs=0.25)
    assert nu == pytest.approx(0.7, abs=0.05)


def test_lmoment_method_known_ratio():
    # [DERIVED] tau_4 of GPD(., 0.7) is 4.59/7.59; the quadratic inversion
    # must map it back to 0.7 (checked by hand against the formula)
    fam = ParametricFamily("gpd", 1.0, 0.7)
    lam = fam.lmoments()
    tau4 = lam[2] / lam[0]
    assert tau4 == pytest.approx(4.59 / 7.59, abs=1e-12)


def test_moment_method_roundtrip():
    fam = ParametricFamily("gpd", 3.0, 0.1)
    s = grid_sample(fam, 20000)
    sigma, nu = fit_moment_method_gpd(s)
    assert sigma == pytest.approx(3.0, abs=0.15)
    assert nu == pytest.approx(0.1, abs=0.05)


def test_moment_method_rejects_flat_sample():
    with pytest.raises(EstimationError):
        fit_moment_method_gpd(SortedSample(np.array([2.0, 2.0, 2.0, 2.0])))


def test_mle_beats_other_starts():
    fam = ParametricFamily("gpd", 3.0, 0.4)
    s = mc_sample(fam, 300, seed=4)
    sigma, nu = fit_mle_gpd(s)
    x = s.values
    n = s.n

    def nll(sig, v):
        z = 1.0 + v * x / sig
        return n * np.log(sig) + (1.0 + 1.0 / v) * np.log(z).sum()

    attained = nll(sigma, nu)
    assert attained <= nll(3.0, 0.4) + 1e-8
    lm = fit_lmoment_method_gpd(s)
    assert attained <= nll(*lm) + 1e-8


def test_mle_exponential_scale():
    # with the shape pinned near zero by the data, sigma approaches the mean
    fam = ParametricFamily("gpd", 2.0, 0.0)
    s = grid_sample(fam, 3000)
    sigma, nu = fit_mle_gpd(s)
    assert nu == pytest.approx(0.0, abs=0.03)
    assert sigma == pytest.approx(2.0, abs=0.1)


def test_mle_rejects_negative_data():
    with pytest.raises(EstimationError):
        fit_mle_gpd(SortedSample(np.array([-1.0, 2.0, 3.0])))
