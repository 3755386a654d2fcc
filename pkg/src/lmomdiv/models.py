"""Model definitions: parametric families and their L-moment constraint maps.

A model maps a parameter vector to the constraint values the dual machinery
consumes.  Sign convention, fixed once here: the dual always receives
``target(theta) = -lambda(theta)``, matching the integration-by-parts
identity that equates the integral of the constraint rows against the
quantile measure with minus the L-moment.  User-facing reports always show
``lambda(theta)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import comb, factorial
from typing import Callable

import numpy as np
from scipy.special import digamma, gamma as gamma_fn

from .poly import PolyBasis


# ---------------------------------------------------------------------------
# closed-form L-moment maps


def gpd_lmoment_map(sigma: float, nu: float) -> np.ndarray:
    """(lambda_2, lambda_3, lambda_4) of the generalized Pareto distribution.

    Heavy tail for nu > 0; the L-moments exist only for nu < 1.
    """
    if sigma <= 0:
        raise ValueError("scale must be positive")
    if nu >= 1.0:
        raise ValueError("GPD L-moments do not exist for shape >= 1")
    lam2 = sigma / ((1.0 - nu) * (2.0 - nu))
    lam3 = lam2 * (1.0 + nu) / (3.0 - nu)
    lam4 = lam2 * (1.0 + nu) * (2.0 + nu) / ((3.0 - nu) * (4.0 - nu))
    return np.array([lam2, lam3, lam4])


def gpd_lmoment_jacobian(sigma: float, nu: float) -> np.ndarray:
    """Analytic Jacobian of :func:`gpd_lmoment_map` w.r.t. (sigma, nu)."""
    lam = gpd_lmoment_map(sigma, nu)
    d_sigma = lam / sigma
    lam2 = lam[0]
    dlam2 = sigma * (3.0 - 2.0 * nu) / ((1.0 - nu) ** 2 * (2.0 - nu) ** 2)
    g = (1.0 + nu) / (3.0 - nu)
    dg = 4.0 / (3.0 - nu) ** 2
    num = (1.0 + nu) * (2.0 + nu)
    den = (3.0 - nu) * (4.0 - nu)
    dnum = 2.0 * nu + 3.0
    dden = 2.0 * nu - 7.0
    h = num / den
    dh = (dnum * den - num * dden) / den ** 2
    d_nu = np.array([dlam2, dlam2 * g + lam2 * dg, dlam2 * h + lam2 * dh])
    return np.stack([d_sigma, d_nu], axis=-1)


def weibull_lmoment_map(sigma: float, nu: float) -> np.ndarray:
    """(lambda_2, lambda_3, lambda_4) of the Weibull distribution."""
    if sigma <= 0 or nu <= 0:
        raise ValueError("Weibull parameters must be positive")
    c2 = 1.0 - 2.0 ** (-1.0 / nu)
    c3 = 1.0 - 3.0 ** (-1.0 / nu)
    c4 = 1.0 - 4.0 ** (-1.0 / nu)
    lam2 = sigma * c2 * gamma_fn(1.0 + 1.0 / nu)
    lam3 = lam2 * (3.0 - 2.0 * c3 / c2)
    lam4 = lam2 * (6.0 + (5.0 * c4 - 10.0 * c3) / c2)
    return np.array([lam2, lam3, lam4])


def weibull_lmoment_jacobian(sigma: float, nu: float) -> np.ndarray:
    """Analytic Jacobian of :func:`weibull_lmoment_map` w.r.t. (sigma, nu)."""
    lam = weibull_lmoment_map(sigma, nu)
    d_sigma = lam / sigma

    c = {k: 1.0 - k ** (-1.0 / nu) for k in (2, 3, 4)}
    # d/dnu of 1 - k**(-1/nu)
    dc = {k: -(k ** (-1.0 / nu)) * np.log(k) / nu ** 2 for k in (2, 3, 4)}
    gam = gamma_fn(1.0 + 1.0 / nu)
    dgam = -gam * digamma(1.0 + 1.0 / nu) / nu ** 2
    lam2 = lam[0]
    dlam2 = sigma * (dc[2] * gam + c[2] * dgam)
    r3 = 3.0 - 2.0 * c[3] / c[2]
    dr3 = -2.0 * (dc[3] * c[2] - c[3] * dc[2]) / c[2] ** 2
    r4 = 6.0 + (5.0 * c[4] - 10.0 * c[3]) / c[2]
    dr4 = (
        (5.0 * dc[4] - 10.0 * dc[3]) * c[2]
        - (5.0 * c[4] - 10.0 * c[3]) * dc[2]
    ) / c[2] ** 2
    d_nu = np.array([dlam2, dlam2 * r3 + lam2 * dr3, dlam2 * r4 + lam2 * dr4])
    return np.stack([d_sigma, d_nu], axis=-1)


# ---------------------------------------------------------------------------
# parametric families (densities, cdfs, quantiles, samplers)


@dataclass(frozen=True)
class ParametricFamily:
    """GPD or Weibull with fixed scale/shape; location fixed at 0."""

    name: str            # "gpd" | "weibull"
    sigma: float
    nu: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("scale must be positive")
        if self.name == "weibull" and self.nu <= 0:
            raise ValueError("Weibull shape must be positive")
        if self.name not in ("gpd", "weibull"):
            raise ValueError(f"unknown family {self.name!r}")

    @property
    def support(self) -> tuple[float, float]:
        if self.name == "gpd" and self.nu < 0:
            return (0.0, -self.sigma / self.nu)
        return (0.0, np.inf)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        s, v = self.sigma, self.nu
        lo, hi = self.support
        out = np.zeros_like(x)
        inside = (x > lo) & (x < hi)
        xi = x[inside]
        if self.name == "gpd":
            if v == 0.0:
                out[inside] = np.exp(-xi / s) / s
            else:
                out[inside] = (1.0 + v * xi / s) ** (-1.0 - 1.0 / v) / s
        else:
            z = (xi / s) ** v
            out[inside] = (v / s) * (xi / s) ** (v - 1.0) * np.exp(-z)
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        s, v = self.sigma, self.nu
        lo, hi = self.support
        out = np.zeros_like(x)
        out[x >= hi] = 1.0
        inside = (x > lo) & (x < hi)
        xi = x[inside]
        if self.name == "gpd":
            if v == 0.0:
                out[inside] = -np.expm1(-xi / s)
            else:
                out[inside] = 1.0 - (1.0 + v * xi / s) ** (-1.0 / v)
        else:
            out[inside] = -np.expm1(-((xi / s) ** v))
        return out if out.ndim else float(out)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0.0) or np.any(u >= 1.0):
            raise ValueError("quantile argument must lie in [0, 1)")
        s, v = self.sigma, self.nu
        if self.name == "gpd":
            if v == 0.0:
                out = -s * np.log1p(-u)
            else:
                out = s * ((1.0 - u) ** (-v) - 1.0) / v
        else:
            out = s * (-np.log1p(-u)) ** (1.0 / v)
        return out if out.ndim else float(out)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Inverse-cdf sampling from an externally supplied RNG stream."""
        return self.quantile(rng.random(n))

    def lmoments(self) -> np.ndarray:
        if self.name == "gpd":
            return gpd_lmoment_map(self.sigma, self.nu)
        return weibull_lmoment_map(self.sigma, self.nu)


def family_ops(family: str, sigma: float, nu: float) -> ParametricFamily:
    return ParametricFamily(family, float(sigma), float(nu))


# ---------------------------------------------------------------------------
# SPLQ model objects


@dataclass(frozen=True)
class SplqModel:
    """Parameter box plus the constraint map handed to the dual machinery.

    ``lmoment_map`` returns the constraint values lambda(theta) in report
    convention; ``target_map`` returns -lambda(theta), which is what the
    dual consumes.  ``constraint_values(t)`` evaluates the integrated
    constraint rows at quantile levels ``t``; by default these are the
    integrated shifted Legendre polynomials of the configured orders.
    """

    name: str
    param_names: tuple[str, ...]
    box: np.ndarray                           # (d, 2) bounds
    lmoment_map: Callable[[np.ndarray], np.ndarray]
    lmoment_jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    orders: tuple[int, ...] | None = (2, 3, 4)
    rows: Callable[[np.ndarray], np.ndarray] | None = None
    basis: PolyBasis | None = field(default=None)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "box", np.asarray(self.box, dtype=float))
        if self.box.shape != (len(self.param_names), 2):
            raise ValueError("box must have one (lo, hi) row per parameter")
        if self.orders is not None and self.basis is None:
            object.__setattr__(self, "basis", PolyBasis(self.orders))

    @property
    def dim(self) -> int:
        return len(self.param_names)

    @property
    def n_constraints(self) -> int:
        if self.orders is not None:
            return len(self.orders)
        probe = np.atleast_1d(self.rows(0.5))
        return probe.shape[-1]

    def constraint_values(self, t):
        if self.rows is not None:
            return self.rows(t)
        return self.basis.constraint_vector(t)

    def target_map(self, theta) -> np.ndarray:
        return -np.asarray(self.lmoment_map(np.asarray(theta, dtype=float)))

    def clip_to_box(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.box[:, 0], self.box[:, 1])

    def in_box(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.box[:, 0]) and np.all(theta <= self.box[:, 1]))


def model_jacobian(model: SplqModel, theta) -> np.ndarray:
    """Jacobian of the target map -lambda(theta), shape (l-1, d).

    Analytic when the model carries one; otherwise central finite
    differences, degrading to one-sided at the parameter box boundary.
    """
    theta = np.asarray(theta, dtype=float)
    if model.lmoment_jacobian is not None:
        return -np.asarray(model.lmoment_jacobian(theta))
    lo, hi = model.box[:, 0], model.box[:, 1]
    m = model.n_constraints
    jac = np.empty((m, theta.size))
    for j in range(theta.size):
        h = 1e-6 * (1.0 + abs(theta[j]))
        up, dn = theta.copy(), theta.copy()
        up[j] += h
        dn[j] -= h
        if up[j] > hi[j] or dn[j] < lo[j]:
            warnings.warn(
                f"parameter {model.param_names[j]} at the box boundary; "
                "using a one-sided difference",
                stacklevel=2,
            )
            up[j] = min(up[j], hi[j])
            dn[j] = max(dn[j], lo[j])
        jac[:, j] = (model.target_map(up) - model.target_map(dn)) / (up[j] - dn[j])
    return jac


def gpd_model(orders=(2, 3, 4)) -> SplqModel:
    """Distributions sharing their L-moments with a GPD."""
    if tuple(orders) != (2, 3, 4):
        raise ValueError("the GPD map covers orders (2, 3, 4)")
    return SplqModel(
        name="gpd-l234",
        param_names=("sigma", "nu"),
        box=np.array([[1e-3, 1e3], [-5.0, 0.99]]),
        lmoment_map=lambda th: gpd_lmoment_map(th[0], th[1]),
        lmoment_jacobian=lambda th: gpd_lmoment_jacobian(th[0], th[1]),
        orders=(2, 3, 4),
    )


def weibull_model(orders=(2, 3, 4)) -> SplqModel:
    """Distributions sharing their L-moments with a Weibull distribution."""
    if tuple(orders) != (2, 3, 4):
        raise ValueError("the Weibull map covers orders (2, 3, 4)")
    return SplqModel(
        name="weibull-l234",
        param_names=("sigma", "nu"),
        box=np.array([[1e-3, 1e3], [0.05, 20.0]]),
        lmoment_map=lambda th: weibull_lmoment_map(th[0], th[1]),
        lmoment_jacobian=lambda th: weibull_lmoment_jacobian(th[0], th[1]),
        orders=(2, 3, 4),
    )


def order_stat_polynomial(j: int, r: int, u):
    """Density kernel of the j-th order statistic mean in an r-sample."""
    if not 1 <= j <= r:
        raise ValueError("need 1 <= j <= r")
    u = np.asarray(u, dtype=float)
    c = factorial(r) / (factorial(j - 1) * factorial(r - j))
    out = c * u ** (j - 1) * (1.0 - u) ** (r - j)
    return out if out.ndim else float(out)


def _orderstat3_rows(t):
    """Integrated differences of adjacent 3-sample order-stat kernels.

    Row 1 integrates P_{2:3} - P_{1:3}; row 2 integrates P_{3:3} - P_{2:3}.
    Both vanish at t = 0 and t = 1, making the constraints shift invariant.
    """
    t = np.asarray(t, dtype=float)
    d1 = -3.0 * t + 6.0 * t ** 2 - 3.0 * t ** 3
    d2 = 3.0 * t ** 3 - 3.0 * t ** 2
    out = np.stack([d1, d2], axis=-1)
    return out


def order_stat_model_3(theta: float = 0.0, nu: float = 1.0) -> SplqModel:
    """Loose-symmetry model: adjacent 3-sample order-stat means differ by nu.

    The raw location constraint (the middle order-stat mean equals theta)
    is not expressible through the quantile measure, so the model is built
    in differenced, shift-invariant form; the location is carried as
    metadata and reported via the sample mean plug-in.
    """
    if nu <= 0:
        raise ValueError("spread must be positive")
    return SplqModel(
        name="orderstat3",
        param_names=("nu",),
        box=np.array([[1e-9, 1e6]]),
        lmoment_map=lambda th: np.array([th[0], th[0]]),
        lmoment_jacobian=lambda th: np.array([[1.0], [1.0]]),
        orders=None,
        rows=_orderstat3_rows,
        metadata={"location": float(theta), "nu_init": float(nu)},
    )


def model_by_name(name: str) -> SplqModel:
    """Model lookup for config files and the CLI."""
    name = name.strip().lower()
    if name == "gpd-l234":
        return gpd_model()
    if name == "weibull-l234":
        return weibull_model()
    if name == "orderstat3":
        return order_stat_model_3()
    raise ValueError(f"unknown model {name!r}")
