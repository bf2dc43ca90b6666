"""Exponentially scaled modified Bessel functions of the first kind, orders 0 and 1.

Only the scaled forms ``exp(-x) * I_nu(x)``, the logarithm ``ln I0(x)`` and the
ratio ``I1(x) / I0(x)`` are exposed, so no caller ever needs the raw values
(``I0`` overflows a double just above ``x = 713``).

Evaluation uses the ascending power series for ``x <= SERIES_CROSSOVER`` and
the Hankel asymptotic expansion above it.  At the crossover the smallest
asymptotic term is below ``1e-17``, and the series has about 60 positive
terms, so both branches hold ~1e-15 relative accuracy there.
"""
from __future__ import annotations

import math

SERIES_CROSSOVER = 20.0

_EPS = 1e-17
_MAX_TERMS = 500


class BesselDomainError(ValueError):
    """Argument is negative or not finite."""


def _check(x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x < 0.0:
        raise BesselDomainError(f"argument must be finite and non-negative, got {x!r}")
    return x


def _series(nu: int, x: float) -> float:
    """Unscaled power series for I_nu(x), nu in {0, 1}."""
    half = 0.5 * x
    term = 1.0 if nu == 0 else half
    total = term
    q = half * half
    for k in range(1, _MAX_TERMS):
        term *= q / (k * (k + nu))
        total += term
        if term < _EPS * total:
            break
    return total


def _series_scaled(nu: int, x: float) -> float:
    return _series(nu, x) * math.exp(-x)


def _asymptotic_scaled(nu: int, x: float) -> float:
    """Hankel expansion of exp(-x) I_nu(x), truncated at its smallest term."""
    mu = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    eight_x = 8.0 * x
    prev = math.inf
    for k in range(1, _MAX_TERMS):
        term *= -(mu - (2 * k - 1) ** 2) / (k * eight_x)
        mag = abs(term)
        if mag >= prev:
            break
        total += term
        prev = mag
        if mag < _EPS * abs(total):
            break
    return total / math.sqrt(2.0 * math.pi * x)


def bessel_i0_scaled(x: float) -> float:
    """Return ``exp(-x) * I0(x)`` for ``x >= 0``; lies in (0, 1]."""
    x = _check(x)
    if x <= SERIES_CROSSOVER:
        return _series_scaled(0, x)
    return _asymptotic_scaled(0, x)


def bessel_i1_scaled(x: float) -> float:
    """Return ``exp(-x) * I1(x)`` for ``x >= 0``."""
    x = _check(x)
    if x == 0.0:
        return 0.0
    if x <= SERIES_CROSSOVER:
        return _series_scaled(1, x)
    return _asymptotic_scaled(1, x)


def bessel_ratio(x: float) -> float:
    """Return ``I1(x) / I0(x)``, increasing from 0 at the origin toward 1."""
    x = _check(x)
    if x == 0.0:
        return 0.0
    return bessel_i1_scaled(x) / bessel_i0_scaled(x)


def log_bessel_i0(x: float) -> float:
    """Return ``ln I0(x)``; finite for every finite ``x >= 0``."""
    x = _check(x)
    return x + math.log(bessel_i0_scaled(x))
