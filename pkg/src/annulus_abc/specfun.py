"""Bessel and Hankel functions of real argument.

Values of J0, J1, Y0, Y1 come from ``scipy.special`` (AMOS/Cephes), wrapped with
argument checks.  Radial derivatives of ``H0(k r)`` are built from the pair of
identities ``H0' = -H1`` and ``H1'(z) = H0(z) - H1(z) / z``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special


class DomainError(ValueError):
    pass


def _check_order(order: int) -> None:
    if order not in (0, 1):
        raise DomainError(f"only orders 0 and 1 are supported, got {order}")


def bessel_j(order: int, x):
    _check_order(order)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DomainError("bessel_j needs x >= 0")
    out = special.j0(x) if order == 0 else special.j1(x)
    return out[()] if out.ndim == 0 else out


def bessel_y(order: int, x):
    _check_order(order)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise DomainError("bessel_y needs x > 0")
    out = special.y0(x) if order == 0 else special.y1(x)
    return out[()] if out.ndim == 0 else out


def hankel1(order: int, x):
    """Hankel function of the first kind, ``J_n(x) + i Y_n(x)``."""
    return bessel_j(order, x) + 1j * bessel_y(order, x)


def hankel1_upto(nmax: int, x: np.ndarray) -> list[np.ndarray]:
    """``[H_0(x), ..., H_nmax(x)]`` by upward recurrence (stable for the Y part)."""
    x = np.asarray(x, dtype=float)
    h = [hankel1(0, x), hankel1(1, x)]
    for n in range(1, nmax):
        h.append((2 * n / x) * h[n] - h[n - 1])
    return h[: nmax + 1]


@lru_cache(maxsize=None)
def _derivative_coefficients(n: int):
    """Laurent coefficients with ``d^n/dz^n H0(z) = a(z) H0(z) + b(z) H1(z)``.

    ``a`` and ``b`` are dicts ``{p: c}`` meaning ``sum c z**-p``.
    """
    a, b = {0: 1.0}, {}
    for _ in range(n):
        da = {p + 1: -p * c for p, c in a.items() if p}
        db = {p + 1: -p * c for p, c in b.items() if p}
        new_a = dict(da)
        for p, c in b.items():
            new_a[p] = new_a.get(p, 0.0) + c
        new_b = dict(db)
        for p, c in a.items():
            new_b[p] = new_b.get(p, 0.0) - c
        for p, c in b.items():
            new_b[p + 1] = new_b.get(p + 1, 0.0) - c
        a, b = new_a, new_b
    return a, b


def _laurent(coeffs: dict, z):
    out = np.zeros_like(z, dtype=float)
    for p, c in coeffs.items():
        out = out + c * z ** (-p)
    return out


def radial_derivatives_h0(k: float, r, max_order: int = 4) -> list:
    """``[d^n/dr^n H0(k r) for n = 0..max_order]``."""
    if not k > 0:
        raise DomainError("wavenumber must be positive")
    if not 0 <= max_order <= 4:
        raise DomainError("max_order must be in 0..4")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("radial derivatives need r > 0")
    z = k * r
    h0, h1 = hankel1(0, z), hankel1(1, z)
    out = []
    for n in range(max_order + 1):
        a, b = _derivative_coefficients(n)
        out.append(k**n * (_laurent(a, z) * h0 + _laurent(b, z) * h1))
    return out
