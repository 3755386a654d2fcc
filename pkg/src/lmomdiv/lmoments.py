"""Sample, population and discrete L-moments, plus their asymptotic covariance.

Sample statistics integrate the piecewise-constant empirical quantile
function exactly against the polynomial basis; no quadrature ever touches
observed data.  Quadrature appears only for population quantities.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.integrate as spi

from .poly import (
    MAX_ORDER,
    integrated_legendre_eval,
    legendre_coefficients,
    shifted_legendre_eval,
    _check_order,
    _horner,
)


class QuadratureError(RuntimeError):
    """Quadrature failed to converge; carries the estimate and error bound."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class QuadConfig:
    """1-D quadrature settings for population L-moments."""

    method: str = "adaptive"   # "adaptive" | "gauss"
    tol: float = 1e-9
    gauss_points: int = 256
    limit: int = 200


@dataclass(frozen=True)
class SortedSample:
    """Ordered observations carrying the empirical quantile measure.

    The measure puts mass ``spacings[i-1] = x_{i+1:n} - x_{i:n}`` at the
    point ``i/n``.  Ties are kept; they simply yield zero spacings.
    """

    values: np.ndarray

    def __init__(self, data):
        values = np.sort(np.asarray(data, dtype=float), kind="stable")
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a sample needs at least two observations")
        if not np.all(np.isfinite(values)):
            raise ValueError("sample contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.values)

    def shifted(self, a: float) -> "SortedSample":
        return SortedSample(self.values + a)


@dataclass(frozen=True)
class LmomentVector:
    """L-moments indexed by order, tagged with how they were computed."""

    values: np.ndarray           # lambda_1 .. lambda_m
    kind: str                    # "population" | "v-statistic" | "u-statistic"

    def __getitem__(self, order: int) -> float:
        if order < 1 or order > self.values.size:
            raise IndexError(f"order {order} not computed")
        return float(self.values[order - 1])

    @property
    def max_order(self) -> int:
        return self.values.size


def vstat_weights(n: int, orders) -> np.ndarray:
    """Exact plug-in weights: column ``j`` holds the per-observation weights
    for the order ``orders[j]`` L-moment of a size-``n`` sample.

    Order 1 gets uniform weights 1/n; order r >= 2 gets the differences of
    the integrated polynomial at consecutive plotting positions.
    """
    grid = np.arange(n + 1) / n
    cols = []
    for r in orders:
        if r == 1:
            cols.append(np.full(n, 1.0 / n))
        else:
            k = integrated_legendre_eval(r, grid)
            cols.append(np.diff(k))
    return np.stack(cols, axis=-1)


def sample_lmoments_v(sample: SortedSample, max_order: int) -> LmomentVector:
    """Plug-in (V-statistic) sample L-moments up to ``max_order``.

    Orders two and up are accumulated from the spacings, so they are exactly
    invariant under any translation that leaves the spacings unchanged.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    _check_order(max_order)
    vals = np.empty(max_order)
    vals[0] = float(np.mean(sample.values))
    if max_order >= 2:
        interior = np.arange(1, sample.n) / sample.n
        for r in range(2, max_order + 1):
            vals[r - 1] = -(integrated_legendre_eval(r, interior) @ sample.spacings)
    return LmomentVector(vals, "v-statistic")


def _pwm_unbiased(sample: SortedSample, max_k: int) -> np.ndarray:
    """Unbiased probability-weighted moments b_0 .. b_{max_k}."""
    n = sample.n
    j = np.arange(n)
    out = np.empty(max_k + 1)
    for k in range(max_k + 1):
        w = np.array([comb(jj, k) for jj in j], dtype=float) / comb(n - 1, k)
        out[k] = (w @ sample.values) / n
    return out


def sample_lmoments_u(sample: SortedSample, max_order: int) -> LmomentVector:
    """Unbiased (U-statistic) sample L-moments via binomial reweighting.

    Equal to the average of the order-r kernel over all size-r subsamples,
    computed in O(n * max_order).
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    _check_order(max_order)
    if sample.n < max_order:
        raise ValueError(
            f"the order-{max_order} U-statistic is undefined for n={sample.n}"
        )
    b = _pwm_unbiased(sample, max_order - 1)
    vals = np.empty(max_order)
    for r in range(1, max_order + 1):
        vals[r - 1] = legendre_coefficients(r - 1) @ b[:r]
    return LmomentVector(vals, "u-statistic")


def population_lmoments(
    quantile,
    max_order: int,
    quad: QuadConfig | None = None,
) -> LmomentVector:
    """Population L-moments of a distribution given by its quantile function.

    Integrates ``quantile(t) * L_{r-1}(t)`` over (0, 1).  The adaptive rule
    (default) handles the integrable endpoint blow-up of heavy-tailed
    quantile functions; a fixed Gauss rule is available for smooth cases.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    _check_order(max_order)
    quad = quad or QuadConfig()
    vals = np.empty(max_order)
    for r in range(1, max_order + 1):
        coeffs = legendre_coefficients(r - 1)

        def integrand(t, _c=coeffs):
            return quantile(t) * _horner(_c, t)

        if quad.method == "adaptive":
            est, err = spi.quad(
                integrand, 0.0, 1.0, epsabs=quad.tol, epsrel=quad.tol,
                limit=quad.limit,
            )
            if not np.isfinite(est) or err > max(quad.tol, 1e-6 * (1 + abs(est))):
                raise QuadratureError(
                    f"population L-moment of order {r} did not converge",
                    est, err,
                )
        elif quad.method == "gauss":
            nodes, weights = np.polynomial.legendre.leggauss(quad.gauss_points)
            t = 0.5 * (nodes + 1.0)
            est = 0.5 * float(weights @ integrand(t))
        else:
            raise ValueError(f"unknown quadrature method {quad.method!r}")
        vals[r - 1] = est
    return LmomentVector(vals, "population")


def lmoment_ratios(lm: LmomentVector) -> dict[str, float]:
    """L-moment ratios tau_r = lambda_r / lambda_2 plus the Gini-style ratio."""
    lam2 = lm[2] if lm.max_order >= 2 else None
    if lam2 is None or lam2 == 0.0:
        raise ValueError("ratios are undefined when lambda_2 is missing or zero")
    out = {}
    lam1 = lm[1]
    if lam1 != 0.0:
        out["gini"] = lam2 / lam1
    for r in range(3, lm.max_order + 1):
        out[f"tau_{r}"] = lm[r] / lam2
    return out


def discrete_lmoments(support, weights) -> LmomentVector:
    """L-moments of a finite discrete distribution, up to order 4.

    With uniform weights on a sorted sample this reduces exactly to the
    plug-in sample statistic.
    """
    x = np.asarray(support, dtype=float)
    w = np.asarray(weights, dtype=float)
    if x.shape != w.shape or x.ndim != 1:
        raise ValueError("support and weights must be 1-D of equal length")
    if np.any(np.diff(x) < 0):
        raise ValueError("support must be nondecreasing")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    cum = np.concatenate([[0.0], np.cumsum(w)])
    cum[-1] = 1.0
    max_order = min(4, MAX_ORDER)
    vals = np.empty(max_order)
    vals[0] = w @ x
    for r in range(2, max_order + 1):
        k = integrated_legendre_eval(r, np.clip(cum, 0.0, 1.0))
        vals[r - 1] = np.diff(k) @ x
    return LmomentVector(vals, "population")


@dataclass(frozen=True)
class Quad2DConfig:
    """Tensor Gauss grid for the double integral of the covariance matrix."""

    nx: int = 200
    ny: int = 200


def lambda_covariance(
    cdf,
    max_order: int,
    support: tuple[float, float],
    quad: Quad2DConfig | None = None,
) -> np.ndarray:
    """Asymptotic covariance of the first ``max_order`` sample L-moments.

    Entry (r, s) integrates
    ``[L_{r-1}(F(x)) L_{s-1}(F(y)) + L_{r-1}(F(y)) L_{s-1}(F(x))] F(x)(1 - F(y))``
    over the triangle x < y inside ``support``.  The caller truncates the
    support where ``F(x)(1-F(x))`` is negligible; the output is symmetrized.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    _check_order(max_order)
    quad = quad or Quad2DConfig()
    a, b = support
    if not b > a:
        raise ValueError("empty support interval")

    gx, wx = np.polynomial.legendre.leggauss(quad.nx)
    gy, wy = np.polynomial.legendre.leggauss(quad.ny)
    x = 0.5 * (b - a) * (gx + 1.0) + a            # (nx,)
    wxs = 0.5 * (b - a) * wx
    # inner nodes on [x_i, b] for each outer node
    half = 0.5 * (b - x)                          # (nx,)
    y = x[:, None] + half[:, None] * (gy[None, :] + 1.0)   # (nx, ny)
    wys = half[:, None] * wy[None, :]

    fx = np.asarray(cdf(x), dtype=float)          # (nx,)
    fy = np.asarray(cdf(y), dtype=float)          # (nx, ny)
    lx = np.stack(
        [shifted_legendre_eval(r, np.clip(fx, 0.0, 1.0)) for r in range(max_order)]
    )                                             # (m, nx)
    ly = np.stack(
        [shifted_legendre_eval(r, np.clip(fy, 0.0, 1.0)) for r in range(max_order)]
    )                                             # (m, nx, ny)

    base = fx[:, None] * (1.0 - fy) * wys         # (nx, ny)
    lam = np.empty((max_order, max_order))
    for r in range(max_order):
        for s in range(r, max_order):
            integrand = (
                lx[r][:, None] * ly[s] + ly[r] * lx[s][:, None]
            ) * base
            val = wxs @ integrand.sum(axis=1)
            lam[r, s] = val
            lam[s, r] = val
    return 0.5 * (lam + lam.T)
