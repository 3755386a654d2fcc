"""Power-divergence family: the convex integrand, its conjugate and derivatives.

``phi`` uses an extended-real contract (+inf outside its domain) so it can
serve as a penalized primal objective.  ``psi`` and its derivatives raise on
domain violations instead, because the dual solver relies on that signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Dispatch to the closed-form limit branches near the removable
#: singularities of the power formula.
_GAMMA_EPS = 1e-6


class ConjugateDomainError(ValueError):
    """Argument outside the domain of the conjugate function."""


@dataclass(frozen=True)
class DivergenceSpec:
    """One member of the power-divergence family.

    ``gamma = 2`` is the chi-square divergence (finite on all of R),
    ``gamma = 1`` the Kullback-Leibler divergence, ``gamma = 0`` its
    modified (reversed) version; other values use the generic power form
    with domain restricted to positive arguments.
    """

    family: str          # "chi2" | "kl" | "klm" | "power"
    gamma: float

    @property
    def a_phi(self) -> float:
        return -np.inf if self.family == "chi2" else 0.0

    @property
    def b_phi(self) -> float:
        return np.inf

    @property
    def psi_domain(self) -> tuple[float, float]:
        """Open interval on which the conjugate is finite and smooth."""
        if self.family == "chi2" or self.family == "kl":
            return (-np.inf, np.inf)
        if self.family == "klm":
            return (-np.inf, 1.0)
        g = self.gamma
        if g > 1.0:
            return (-1.0 / (g - 1.0), np.inf)
        return (-np.inf, 1.0 / (1.0 - g))

    # -- phi ------------------------------------------------------------

    def phi(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.full_like(x, np.inf)
        if self.family == "chi2":
            out = 0.5 * (x - 1.0) ** 2
        elif self.family == "kl":
            pos = x > 0.0
            out[pos] = x[pos] * np.log(x[pos]) - x[pos] + 1.0
            out[x == 0.0] = 1.0
        elif self.family == "klm":
            pos = x > 0.0
            out[pos] = -np.log(x[pos]) + x[pos] - 1.0
        else:
            g = self.gamma
            pos = x > 0.0
            out[pos] = (x[pos] ** g - g * x[pos] + g - 1.0) / (g * (g - 1.0))
            if g > 0.0:
                out[x == 0.0] = 1.0 / g
        return float(out[0]) if scalar else out

    def phi_prime(self, x) -> np.ndarray | float:
        """Derivative of phi, finite only strictly inside its domain."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if self.family == "chi2":
            out = x - 1.0
        elif self.family == "kl":
            out = np.log(x)
        elif self.family == "klm":
            out = 1.0 - 1.0 / x
        else:
            g = self.gamma
            out = (x ** (g - 1.0) - 1.0) / (g - 1.0)
        return float(out[0]) if scalar else out

    def phi_second(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if self.family == "chi2":
            out = np.ones_like(x)
        elif self.family == "kl":
            out = 1.0 / x
        elif self.family == "klm":
            out = 1.0 / (x * x)
        else:
            out = x ** (self.gamma - 2.0)
        return float(out[0]) if scalar else out

    # -- conjugate ------------------------------------------------------

    def _check_psi_domain(self, t: np.ndarray) -> None:
        lo, hi = self.psi_domain
        if np.any(t <= lo) or np.any(t >= hi):
            raise ConjugateDomainError(
                f"conjugate argument outside open domain ({lo}, {hi})"
            )

    def psi(self, t) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        self._check_psi_domain(t)
        if self.family == "chi2":
            out = 0.5 * t * t + t
        elif self.family == "kl":
            out = np.expm1(t)
        elif self.family == "klm":
            out = -np.log1p(-t)
        else:
            g = self.gamma
            out = ((1.0 + (g - 1.0) * t) ** (g / (g - 1.0)) - 1.0) / g
        return float(out[0]) if scalar else out

    def psi_prime(self, t) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        self._check_psi_domain(t)
        if self.family == "chi2":
            out = t + 1.0
        elif self.family == "kl":
            out = np.exp(t)
        elif self.family == "klm":
            out = 1.0 / (1.0 - t)
        else:
            g = self.gamma
            out = (1.0 + (g - 1.0) * t) ** (1.0 / (g - 1.0))
        return float(out[0]) if scalar else out

    def psi_second(self, t) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        self._check_psi_domain(t)
        if self.family == "chi2":
            out = np.ones_like(t)
        elif self.family == "kl":
            out = np.exp(t)
        elif self.family == "klm":
            out = 1.0 / (1.0 - t) ** 2
        else:
            g = self.gamma
            out = (1.0 + (g - 1.0) * t) ** ((2.0 - g) / (g - 1.0))
        return float(out[0]) if scalar else out


CHI2 = DivergenceSpec("chi2", 2.0)
KL = DivergenceSpec("kl", 1.0)
KLM = DivergenceSpec("klm", 0.0)


def power_divergence(gamma: float) -> DivergenceSpec:
    """Power-family member, dispatching to the limit branches near 0, 1, 2."""
    if abs(gamma - 2.0) < _GAMMA_EPS:
        return CHI2
    if abs(gamma - 1.0) < _GAMMA_EPS:
        return KL
    if abs(gamma) < _GAMMA_EPS:
        return KLM
    return DivergenceSpec("power", float(gamma))


def divergence_by_name(name: str) -> DivergenceSpec:
    """Parse a config-file divergence name: chi2, kl, klm or power:<gamma>."""
    name = name.strip().lower()
    if name == "chi2":
        return CHI2
    if name == "kl":
        return KL
    if name == "klm":
        return KLM
    if name.startswith("power:"):
        return power_divergence(float(name.split(":", 1)[1]))
    raise ValueError(f"unknown divergence {name!r}")
