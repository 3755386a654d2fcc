"""Shifted Legendre polynomials and their antiderivatives.

The polynomials are orthogonal on [0, 1] and every L-moment computation in
this package reduces to evaluating them or their integrals.  Coefficients
are computed exactly in integer arithmetic; evaluation uses Horner's rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

#: Largest supported polynomial order.  Coefficients grow combinatorially
#: and double precision degrades past this point.
MAX_ORDER = 20


class OrderLimitError(ValueError):
    """Requested polynomial order exceeds the supported range."""


def _check_order(r: int) -> None:
    if r > MAX_ORDER:
        raise OrderLimitError(
            f"order {r} exceeds the supported limit {MAX_ORDER}"
        )


def _check_unit_interval(t) -> None:
    t = np.asarray(t)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("argument must lie in [0, 1]")


def legendre_coefficients(r: int) -> np.ndarray:
    """Exact coefficients of the shifted Legendre polynomial of order ``r``.

    Returns the coefficients of ``sum_k (-1)**(r-k) C(r,k) C(r+k,k) t**k``
    in increasing degree, as floats.
    """
    if r < 0:
        raise ValueError("order must be >= 0")
    _check_order(r)
    return np.array(
        [(-1) ** (r - k) * comb(r, k) * comb(r + k, k) for k in range(r + 1)],
        dtype=float,
    )


def integrated_coefficients(r: int) -> np.ndarray:
    """Coefficients of the antiderivative of the order ``r - 1`` polynomial.

    The constant term is zero, so the result starts at degree 1.
    """
    if r < 2:
        raise ValueError(
            "integrated polynomials are only defined for order >= 2 "
            "(order-1 constraints are not shift invariant)"
        )
    _check_order(r)
    c = legendre_coefficients(r - 1)
    out = np.zeros(r + 1)
    out[1:r + 1] = c / np.arange(1, r + 1)
    return out


def _horner(coeffs: np.ndarray, t):
    """Evaluate a polynomial given coefficients in increasing degree."""
    t = np.asarray(t, dtype=float)
    acc = np.zeros_like(t)
    for c in coeffs[::-1]:
        acc = acc * t + c
    return acc


def shifted_legendre_eval(r: int, t):
    """Value of the shifted Legendre polynomial of order ``r`` at ``t``.

    ``t`` may be a scalar or an array with entries in [0, 1].
    """
    _check_unit_interval(t)
    c = legendre_coefficients(r)
    out = _horner(c, t)
    return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out


def integrated_legendre_eval(r: int, t):
    """Integral from 0 to ``t`` of the order ``r - 1`` shifted Legendre polynomial.

    Vanishes at both endpoints for every ``r >= 2``.
    """
    _check_unit_interval(t)
    c = integrated_coefficients(r)
    out = _horner(c, t)
    return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out


@dataclass(frozen=True)
class PolyBasis:
    """A fixed set of constraint orders with cached coefficient tables.

    Immutable after construction; safe for concurrent reads.
    """

    orders: tuple[int, ...]
    _tables: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __init__(self, orders):
        orders = tuple(int(r) for r in orders)
        if not orders:
            raise ValueError("at least one constraint order is required")
        for r in orders:
            if r < 2:
                raise ValueError(f"constraint order {r} must be >= 2")
            _check_order(r)
        object.__setattr__(self, "orders", orders)
        object.__setattr__(
            self, "_tables", tuple(integrated_coefficients(r) for r in orders)
        )

    @property
    def dim(self) -> int:
        return len(self.orders)

    def constraint_vector(self, t):
        """Stack of integrated-polynomial values at ``t``, one per order.

        For scalar ``t`` returns shape ``(dim,)``; for an array of shape
        ``(m,)`` returns shape ``(m, dim)``.
        """
        _check_unit_interval(t)
        cols = [_horner(tab, t) for tab in self._tables]
        if np.isscalar(t) or np.ndim(t) == 0:
            return np.array([float(c) for c in cols])
        return np.stack(cols, axis=-1)


def constraint_vector(basis: PolyBasis, t):
    """Functional alias for :meth:`PolyBasis.constraint_vector`."""
    return basis.constraint_vector(t)
