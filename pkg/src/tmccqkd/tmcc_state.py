"""Truncated Fock-space model of the two-mode coherently correlated (pair-coherent) state.

The state is ``|lam> = I0(2|lam|)^(-1/2) * sum_n lam^n / n! |n, n>``, so both
modes always carry the same photon number and that number follows

    P(n) = |lam|^(2n) / ((n!)^2 I0(2|lam|)).

Probabilities are kept as logarithms; the linear pmf is only formed on demand.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .special_fn import bessel_ratio, log_bessel_i0

DEFAULT_TAIL_EPSILON = 1e-12


class UndefinedCorrelationError(ValueError):
    """Relative correlation requested for a channel with zero variance."""


@dataclass(frozen=True)
class TMCCState:
    """Immutable truncated pair-coherent state.

    ``log_pmf[n]`` is ``ln P(n)`` for ``n = 0..n_max``; the probability mass
    beyond ``n_max`` is guaranteed to be at most ``tail_epsilon``.
    """

    lambda_mag: float
    lambda_phase: float
    n_max: int
    log_pmf: np.ndarray
    tail_epsilon: float

    @property
    def lam(self) -> complex:
        return cmath.rect(self.lambda_mag, self.lambda_phase)

    def pmf(self) -> np.ndarray:
        return np.exp(self.log_pmf)


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def new_state(
    lambda_mag: float,
    lambda_phase: float = 0.0,
    tail_epsilon: float = DEFAULT_TAIL_EPSILON,
) -> TMCCState:
    """Build the truncated state for beam-intensity parameter ``lambda_mag``.

    ``n_max`` is the smallest order for which the geometric tail bound
    ``P(n_max) * r / (1 - r)``, ``r = |lam|^2 / (n_max + 1)^2 < 1``, falls
    below ``tail_epsilon / 2``; the other half of the budget absorbs rounding
    in the stored probabilities.  Consecutive entries obey the exact recurrence
    ``P(n+1) / P(n) = |lam|^2 / (n+1)^2``.
    """
    lambda_mag = _check_finite("lambda_mag", lambda_mag)
    lambda_phase = _check_finite("lambda_phase", lambda_phase)
    tail_epsilon = _check_finite("tail_epsilon", tail_epsilon)
    if lambda_mag < 0.0:
        raise ValueError(f"lambda_mag must be non-negative, got {lambda_mag!r}")
    if not 0.0 < tail_epsilon < 1.0:
        raise ValueError(f"tail_epsilon must lie in (0, 1), got {tail_epsilon!r}")

    if lambda_mag == 0.0:
        log_pmf = np.zeros(1)
        log_pmf.flags.writeable = False
        return TMCCState(0.0, lambda_phase, 0, log_pmf, tail_epsilon)

    log_lam2 = 2.0 * math.log(lambda_mag)
    log_eps = math.log(0.5 * tail_epsilon)
    logs = [-log_bessel_i0(2.0 * lambda_mag)]
    n = 0
    while True:
        log_r = log_lam2 - 2.0 * math.log(n + 1)
        if log_r < 0.0 and logs[n] + log_r - math.log1p(-math.exp(log_r)) <= log_eps:
            break
        logs.append(logs[n] + log_r)
        n += 1

    log_pmf = np.array(logs)
    log_pmf.flags.writeable = False
    return TMCCState(lambda_mag, lambda_phase, n, log_pmf, tail_epsilon)


def mean_photon(state: TMCCState) -> float:
    """Mean photon number per mode, ``|lam| * I1(2|lam|) / I0(2|lam|)``."""
    return state.lambda_mag * bessel_ratio(2.0 * state.lambda_mag)


def second_moment(state: TMCCState) -> float:
    """``<N^2> = <N_A N_B> = |lam|^2``."""
    return state.lambda_mag * state.lambda_mag


def variance(state: TMCCState) -> float:
    """Photon-number variance ``|lam|^2 (1 - (I1/I0)^2)`` of either mode."""
    ratio = bessel_ratio(2.0 * state.lambda_mag)
    return state.lambda_mag * state.lambda_mag * (1.0 - ratio) * (1.0 + ratio)


def correlation_ab(state: TMCCState) -> tuple[float, float]:
    """Covariance and relative correlation of the two modes' photon numbers.

    Both modes share the same count, so the covariance equals the variance
    and the relative correlation is 1.
    """
    if state.lambda_mag == 0.0:
        raise UndefinedCorrelationError("vacuum state has zero photon-number variance")
    mean = mean_photon(state)
    g = second_moment(state) - mean * mean
    var_a = var_b = second_moment(state) - mean * mean
    return g, g / math.sqrt(var_a * var_b)


def expect_moment(state: TMCCState, j1: int, k1: int, j2: int, k2: int) -> complex:
    """Evaluate ``<lam| a1+^j1 a1^k1 a2+^j2 a2^k2 |lam>`` on the truncated state.

    The operator maps ``|n, n>`` to ``|n - d, n - d>`` with ``d = k1 - j1``
    only when ``k2 - j2`` equals the same ``d``; otherwise the result is 0.
    """
    for order in (j1, k1, j2, k2):
        if int(order) != order or order < 0:
            raise ValueError("operator orders must be non-negative integers")
    d = k1 - j1
    if k2 - j2 != d:
        return 0j

    lg = math.lgamma
    terms = []
    for n in range(max(k1, k2), state.n_max + 1):
        m = n - d
        if not 0 <= m <= state.n_max:
            continue
        log_coeff = 0.5 * (
            lg(n + 1) - 2.0 * lg(n - k1 + 1) + lg(n - k1 + j1 + 1)
            + lg(n + 1) - 2.0 * lg(n - k2 + 1) + lg(n - k2 + j2 + 1)
        )
        terms.append(math.exp(0.5 * (state.log_pmf[m] + state.log_pmf[n]) + log_coeff))
    return math.fsum(terms) * cmath.exp(1j * d * state.lambda_phase)
