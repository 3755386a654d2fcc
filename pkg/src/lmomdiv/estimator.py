"""Outer parameter estimation, asymptotic covariance and the model test.

The outer search is derivative free (Nelder-Mead clamped to the parameter
box): the criterion is smooth in theta, but its gradient is available only
at converged inner solves, so coupling the two tolerances is avoided.  The
envelope gradient is exposed for diagnostics only.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
from scipy.stats import chi2 as chi2_dist

from .divergence import DivergenceSpec
from .dualsolve import (
    DualProblem,
    SingularConstraintError,
    chi2_value_closed_form,
    make_dual_problem,
    omega_empirical,
    solve_dual,
)
from .lmoments import SortedSample, sample_lmoments_v
from .models import SplqModel, ParametricFamily, model_jacobian
from .poly import shifted_legendre_eval


class EstimationError(RuntimeError):
    """Estimation failed; the message carries the offending statistic."""


@dataclass
class OuterConfig:
    """Settings for the outer Nelder-Mead search."""

    xatol: float = 1e-8
    fatol: float = 1e-10
    max_iter: int = 2000
    inner_tol: float = 1e-9
    starts: list | None = None


@dataclass
class FitReport:
    """Everything one fit produces."""

    theta: np.ndarray
    xi: np.ndarray | None
    criterion: float
    method: str
    param_names: tuple[str, ...]
    diagnostics: dict = field(default_factory=dict)
    cov_theta: np.ndarray | None = None
    cov_xi: np.ndarray | None = None
    s_n: float | None = None
    df: int | None = None
    p_value: float | None = None

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "theta": dict(zip(self.param_names, map(float, self.theta))),
            "criterion": float(self.criterion),
            "diagnostics": self.diagnostics,
        }
        if self.xi is not None:
            out["xi"] = [float(v) for v in self.xi]
        if self.cov_theta is not None:
            out["cov_theta"] = self.cov_theta.tolist()
        if self.cov_xi is not None:
            out["cov_xi"] = self.cov_xi.tolist()
        if self.s_n is not None:
            out["confidence"] = {
                "s_n": float(self.s_n),
                "df": int(self.df),
                "p_value": float(self.p_value),
            }
        return out


def _criterion_factory(skeleton: DualProblem, model: SplqModel,
                       divergence: DivergenceSpec, sample: SortedSample,
                       inner_tol: float):
    """Build theta -> (criterion, xi | None); +inf outside the model domain."""
    chi2_fast = divergence.family == "chi2"
    failures = {"count": 0}
    if chi2_fast:
        # the quadratic form depends only on the sample; factor it once
        omega = omega_empirical(sample, model.constraint_values)
        m_n = skeleton.m_n
        try:
            omega_chol = scipy.linalg.cho_factor(omega)
        except scipy.linalg.LinAlgError:
            raise EstimationError("singular empirical second-moment matrix")

    def evaluate(theta):
        theta = model.clip_to_box(theta)
        try:
            target = model.target_map(theta)
        except (ValueError, FloatingPointError):
            return np.inf, None
        if not np.all(np.isfinite(target)):
            return np.inf, None
        if chi2_fast:
            resid = target - m_n
            xi = scipy.linalg.cho_solve(omega_chol, resid)
            return 0.5 * float(resid @ xi), xi
        sol = solve_dual(skeleton.with_target(target), tol=inner_tol)
        if sol.status == "infeasibleDirection":
            return np.inf, None
        if sol.status == "maxIter":
            failures["count"] += 1
        return sol.value, sol.xi

    evaluate.failures = failures
    return evaluate


def lmoment_method_start(sample: SortedSample, model: SplqModel) -> np.ndarray | None:
    """Classical L-moment start for the GPD model, if defined."""
    if model.name != "gpd-l234":
        return None
    try:
        theta = np.array(fit_lmoment_method_gpd(sample))
    except EstimationError:
        return None
    theta = model.clip_to_box(theta)
    return theta


def fit_divergence(
    sample: SortedSample,
    model: SplqModel,
    divergence: DivergenceSpec,
    config: OuterConfig | None = None,
) -> FitReport:
    """Minimum-divergence fit: outer box search over the dual criterion."""
    config = config or OuterConfig()
    if sample.n < model.n_constraints + 1:
        raise EstimationError("sample too small for the configured constraints")
    skeleton = make_dual_problem(
        sample, model.constraint_values, divergence,
        np.zeros(model.n_constraints),
    )
    evaluate = _criterion_factory(skeleton, model, divergence, sample,
                                  config.inner_tol)

    if config.starts is not None:
        starts = [np.asarray(s, dtype=float) for s in config.starts]
    else:
        starts = []
        lm_start = lmoment_method_start(sample, model)
        if lm_start is not None:
            starts.append(lm_start)
        starts.append(model.box.mean(axis=1))

    best = None
    total_iters = 0
    for start in starts:
        res = scipy.optimize.minimize(
            lambda th: evaluate(th)[0],
            start,
            method="Nelder-Mead",
            options={
                "xatol": config.xatol,
                "fatol": config.fatol,
                "maxiter": config.max_iter,
            },
        )
        total_iters += res.nit
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise EstimationError("all starts failed the inner solve")

    theta_hat = model.clip_to_box(best.x)
    criterion, xi_hat = evaluate(theta_hat)
    at_boundary = bool(
        np.any(np.abs(theta_hat - model.box[:, 0]) < 1e-6)
        or np.any(np.abs(theta_hat - model.box[:, 1]) < 1e-6)
    )
    return FitReport(
        theta=theta_hat,
        xi=xi_hat,
        criterion=float(criterion),
        method=f"divergence:{divergence.family}",
        param_names=model.param_names,
        diagnostics={
            "outer_iterations": int(total_iters),
            "inner_failures": int(evaluate.failures["count"]),
            "boundary": at_boundary,
            "n_starts": len(starts),
        },
    )


def envelope_gradient(model: SplqModel, theta, xi) -> np.ndarray:
    """Gradient of the outer criterion at a converged inner solve."""
    return model_jacobian(model, theta).T @ np.asarray(xi, dtype=float)


# ---------------------------------------------------------------------------
# asymptotic covariance and the confidence statistic


@dataclass(frozen=True)
class CovarianceReport:
    sigma: np.ndarray       # long-run covariance of the constraint moments
    omega: np.ndarray       # second-moment matrix of the constraint rows
    j0: np.ndarray          # Jacobian of the target map at theta_hat
    m: np.ndarray
    h: np.ndarray
    p: np.ndarray

    @property
    def cov_theta(self) -> np.ndarray:
        c = self.h @ self.sigma @ self.h.T
        return 0.5 * (c + c.T)

    @property
    def cov_xi(self) -> np.ndarray:
        c = self.p @ self.sigma @ self.p.T
        return 0.5 * (c + c.T)


@functools.lru_cache(maxsize=16)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _rows_deriv(model: SplqModel, u: np.ndarray) -> np.ndarray:
    """Derivative of the integrated constraint rows at quantile levels u."""
    if model.orders is not None:
        return np.stack(
            [shifted_legendre_eval(r - 1, u) for r in model.orders], axis=-1
        )
    # generic rows: central finite differences on (0, 1)
    h = 1e-6
    up = np.clip(u + h, 0.0, 1.0)
    dn = np.clip(u - h, 0.0, 1.0)
    return (model.constraint_values(up) - model.constraint_values(dn)) / (up - dn)[..., None]


def asymptotic_covariance(
    theta_hat,
    model: SplqModel,
    plugin: ParametricFamily,
    n_outer: int = 200,
    n_inner: int = 200,
    n_omega: int = 2000,
    tail_eps: float = 1e-10,
) -> CovarianceReport:
    """Plug-in asymptotic covariance blocks at ``theta_hat``.

    Both integrals run against the plug-in cdf over a support truncated
    where ``F(1-F)`` is negligible.  The second-moment matrix uses a 1-D
    Gauss rule; the long-run covariance a tensor Gauss grid on the triangle
    x < y.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    lo = plugin.support[0]
    hi = min(plugin.support[1], plugin.quantile(1.0 - tail_eps))
    cdf = plugin.cdf

    gx, wx = _leggauss(n_omega)
    x = 0.5 * (hi - lo) * (gx + 1.0) + lo
    w = 0.5 * (hi - lo) * wx
    rows = np.atleast_2d(model.constraint_values(np.clip(cdf(x), 0.0, 1.0)))
    omega = (rows.T * w) @ rows

    sigma = _sigma_quadrature(cdf, model, (lo, hi), n_outer, n_inner)

    j0 = model_jacobian(model, theta_hat)
    try:
        omega_inv = scipy.linalg.inv(omega)
    except scipy.linalg.LinAlgError:
        raise EstimationError(
            f"singular second-moment matrix (cond={np.linalg.cond(omega):.3e})"
        )
    m_inner = j0.T @ omega_inv @ j0
    if np.linalg.matrix_rank(j0) < j0.shape[1]:
        raise EstimationError(
            f"rank-deficient Jacobian (cond={np.linalg.cond(j0):.3e})"
        )
    m = scipy.linalg.inv(m_inner)
    m = 0.5 * (m + m.T)
    h = m @ j0.T @ omega_inv
    p = omega_inv - omega_inv @ j0 @ m @ j0.T @ omega_inv
    return CovarianceReport(sigma=sigma, omega=omega, j0=j0, m=m, h=h,
                            p=0.5 * (p + p.T))


def _sigma_quadrature(cdf, model: SplqModel, support, n_outer, n_inner) -> np.ndarray:
    """Triangle quadrature of the long-run covariance of constraint moments."""
    a, b = support
    gx, wx = _leggauss(n_outer)
    gy, wy = _leggauss(n_inner)
    x = 0.5 * (b - a) * (gx + 1.0) + a
    wxs = 0.5 * (b - a) * wx
    half = 0.5 * (b - x)
    y = x[:, None] + half[:, None] * (gy[None, :] + 1.0)
    wys = half[:, None] * wy[None, :]

    fx = np.clip(np.asarray(cdf(x), dtype=float), 0.0, 1.0)
    fy = np.clip(np.asarray(cdf(y), dtype=float), 0.0, 1.0)
    dx_rows = _rows_deriv(model, fx)                    # (nx, c)
    dy_rows = _rows_deriv(model, fy)                    # (nx, ny, c)
    base = fx[:, None] * (1.0 - fy) * wys
    c = dx_rows.shape[-1]
    sig = np.empty((c, c))
    for r in range(c):
        for s in range(r, c):
            integrand = (
                dx_rows[:, None, r] * dy_rows[:, :, s]
                + dy_rows[:, :, r] * dx_rows[:, None, s]
            ) * base
            val = wxs @ integrand.sum(axis=1)
            sig[r, s] = val
            sig[s, r] = val
    return 0.5 * (sig + sig.T)


@dataclass(frozen=True)
class ConfidenceStat:
    s_n: float
    df: int
    p_value: float
    rank: int
    rank_adjusted: bool


def confidence_stat(xi_hat, p_mat, sigma_mat, n: int,
                    rank_tol: float = 1e-10) -> ConfidenceStat:
    """Model-membership statistic from the scaled multiplier estimate.

    When the middle matrix is numerically singular (the generic case, its
    rank being limited by the parameter count) a pseudo-inverse path with
    rank-adjusted degrees of freedom fires and is flagged.
    """
    xi_hat = np.asarray(xi_hat, dtype=float)
    middle = p_mat @ sigma_mat @ p_mat.T
    middle = 0.5 * (middle + middle.T)
    evals, evecs = np.linalg.eigh(middle)
    top = float(np.max(np.abs(evals)))
    if top <= 0.0:
        raise EstimationError("degenerate multiplier covariance")
    keep = evals > rank_tol * top
    rank = int(np.count_nonzero(keep))
    full = rank == middle.shape[0]
    if full:
        s_n = float(n * xi_hat @ np.linalg.solve(middle, xi_hat))
        df = middle.shape[0]
    else:
        inv = (evecs[:, keep] / evals[keep]) @ evecs[:, keep].T
        s_n = float(n * xi_hat @ inv @ xi_hat)
        df = rank
    return ConfidenceStat(
        s_n=s_n, df=df, p_value=float(chi2_dist.sf(s_n, df)),
        rank=rank, rank_adjusted=not full,
    )


# ---------------------------------------------------------------------------
# classical comparison estimators (GPD)


def fit_lmoment_method_gpd(sample: SortedSample) -> tuple[float, float]:
    """Invert the (lambda_2, tau_4) map of the GPD from plug-in L-moments."""
    lm = sample_lmoments_v(sample, 4)
    lam2 = lm[2]
    if lam2 <= 0:
        raise EstimationError(f"nonpositive sample L-scale {lam2!r}")
    tau4 = lm[4] / lam2
    disc = tau4 * tau4 + 98.0 * tau4 + 1.0
    if disc < 0.0 or tau4 == 1.0:
        raise EstimationError(f"tau_4={tau4!r} outside the invertibility range")
    nu = (7.0 * tau4 + 3.0 - np.sqrt(disc)) / (2.0 * (tau4 - 1.0))
    if nu >= 1.0:
        raise EstimationError(f"tau_4={tau4!r} maps outside the existence region")
    sigma = lam2 * (1.0 - nu) * (2.0 - nu)
    if sigma <= 0.0:
        raise EstimationError(f"tau_4={tau4!r} yields nonpositive scale")
    return float(sigma), float(nu)


def _gpd_skewness(nu: float) -> float:
    return 2.0 * (1.0 + nu) * np.sqrt(1.0 - 2.0 * nu) / (1.0 - 3.0 * nu)


def fit_moment_method_gpd(sample: SortedSample) -> tuple[float, float]:
    """Invert the (variance, skewness) map of the GPD numerically.

    The forward formulas require shape < 1/3; the inversion brackets the
    root on (-5, 1/3).
    """
    x = sample.values
    var = float(np.var(x, ddof=1))
    m3 = float(np.mean((x - x.mean()) ** 3))
    if var <= 0:
        raise EstimationError("degenerate sample variance")
    t3 = m3 / var ** 1.5
    lo, hi = -5.0, 1.0 / 3.0 - 1e-6
    if not _gpd_skewness(lo) < t3 < _gpd_skewness(hi):
        raise EstimationError(f"sample skewness {t3!r} outside the GPD range")
    nu = scipy.optimize.brentq(lambda v: _gpd_skewness(v) - t3, lo, hi, xtol=1e-12)
    sigma = float(np.sqrt(var * (1.0 - nu) ** 2 * (1.0 - 2.0 * nu)))
    return sigma, float(nu)


def fit_mle_gpd(sample: SortedSample) -> tuple[float, float]:
    """Maximum likelihood in the GPD family with location fixed at zero."""
    x = sample.values
    if np.any(x < 0):
        raise EstimationError("GPD MLE requires nonnegative observations")
    n = sample.n
    xmax = float(x.max())

    def nll(theta):
        sigma, nu = theta
        if sigma <= 0 or not -5.0 <= nu <= 5.0:
            return np.inf
        if abs(nu) < 1e-10:
            return n * np.log(sigma) + x.sum() / sigma
        z = 1.0 + nu * x / sigma
        if np.any(z <= 0):
            return np.inf
        return n * np.log(sigma) + (1.0 + 1.0 / nu) * float(np.log(z).sum())

    starts = [np.array([x.mean(), 0.5])]
    for fitter in (fit_lmoment_method_gpd, fit_moment_method_gpd):
        try:
            starts.append(np.array(fitter(sample)))
        except EstimationError:
            pass

    best = None
    for start in starts:
        res = scipy.optimize.minimize(
            nll, start, method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 2000},
        )
        if best is None or res.fun < best.fun:
            best = res
    sigma, nu = best.x
    if not np.isfinite(best.fun):
        raise EstimationError("GPD likelihood could not be maximized")
    if nu < 0 and -sigma / nu <= xmax * (1.0 + 1e-9):
        raise EstimationError("MLE degenerated to the support boundary")
    return float(sigma), float(nu)
