"""Beamsplitter intercept attack on Bob's beam.

Eve taps Bob's mode with a splitter ``a2 = p a_B + q a_E`` (``p^2 + q^2 = 1``).
Acting on the pair-coherent state this sends each of the ``n`` photons of
Bob's beam to Bob with probability ``p^2`` and to Eve otherwise, so given
``n_A = n`` the count ``n_B`` is ``Binomial(n, p^2)`` and ``n_E = n - n_B``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .tmcc_state import TMCCState, mean_photon, new_state, second_moment

# cos(pi/2) is 6e-17, not 0; snap angle-derived fractions this close to an end
_ANGLE_SNAP = 1e-14


@dataclass(frozen=True)
class SplitterConfig:
    """Splitter intensity fractions: ``p2`` reaches Bob, ``q2`` is diverted to Eve.

    Both fractions are stored so that exchanging Bob and Eve (``swapped``)
    is exact in floating point.
    """

    p2: float
    q2: float

    def __post_init__(self):
        for name in ("p2", "q2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if abs(self.p2 + self.q2 - 1.0) > 1e-12:
            raise ValueError("splitter fractions must satisfy p^2 + q^2 = 1")

    @classmethod
    def from_p(cls, p: float) -> "SplitterConfig":
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p!r}")
        p2 = p * p
        return cls(p2, 1.0 - p2)

    @classmethod
    def from_q(cls, q: float) -> "SplitterConfig":
        q = float(q)
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {q!r}")
        q2 = q * q
        return cls(1.0 - q2, q2)

    @classmethod
    def from_p2(cls, p2: float) -> "SplitterConfig":
        return cls(float(p2), 1.0 - float(p2))

    @classmethod
    def from_psi(cls, psi: float) -> "SplitterConfig":
        """Parameterise by angle, ``p = cos(psi)`` with ``psi`` in [0, pi/2]."""
        psi = float(psi)
        if not 0.0 <= psi <= math.pi / 2 + _ANGLE_SNAP:
            raise ValueError(f"psi must lie in [0, pi/2], got {psi!r}")
        p2 = math.cos(psi) ** 2
        q2 = math.sin(psi) ** 2
        if p2 < _ANGLE_SNAP:
            p2, q2 = 0.0, 1.0
        elif q2 < _ANGLE_SNAP:
            p2, q2 = 1.0, 0.0
        return cls(p2, q2)

    @classmethod
    def no_eavesdropper(cls) -> "SplitterConfig":
        return cls(1.0, 0.0)

    @property
    def p(self) -> float:
        return math.sqrt(self.p2)

    @property
    def q(self) -> float:
        return math.sqrt(self.q2)

    @property
    def psi(self) -> float:
        return math.atan2(self.q, self.p)

    def swapped(self) -> "SplitterConfig":
        return SplitterConfig(self.q2, self.p2)


@dataclass(frozen=True)
class TripartiteMoments:
    """Photon-number statistics of Alice, Bob and Eve.

    ``rho_ab`` / ``rho_ae`` are ``None`` when either party's count has zero
    variance, which marks "no channel" as distinct from "uncorrelated".
    """

    mean_a: float
    mean_b: float
    mean_e: float
    m2_a: float
    m2_b: float
    m2_e: float
    cross_ab: float
    cross_ae: float
    g_ab: float
    g_ae: float
    rho_ab: Optional[float]
    rho_ae: Optional[float]

    @property
    def var_a(self) -> float:
        return self.m2_a - self.mean_a * self.mean_a

    @property
    def var_b(self) -> float:
        return self.m2_b - self.mean_b * self.mean_b

    @property
    def var_e(self) -> float:
        return self.m2_e - self.mean_e * self.mean_e


def _relative(cov: float, var_x: float, var_y: float) -> Optional[float]:
    if var_x <= 0.0 or var_y <= 0.0:
        return None
    return max(-1.0, min(1.0, cov / math.sqrt(var_x * var_y)))


def assemble_moments(
    mean_a: float,
    mean_b: float,
    mean_e: float,
    m2_a: float,
    m2_b: float,
    m2_e: float,
    cross_ab: float,
    cross_ae: float,
) -> TripartiteMoments:
    """Derive covariances and relative correlations from raw moments."""
    var_a = m2_a - mean_a * mean_a
    var_b = m2_b - mean_b * mean_b
    var_e = m2_e - mean_e * mean_e
    g_ab = cross_ab - mean_a * mean_b
    g_ae = cross_ae - mean_a * mean_e
    return TripartiteMoments(
        mean_a, mean_b, mean_e, m2_a, m2_b, m2_e, cross_ab, cross_ae,
        g_ab, g_ae, _relative(g_ab, var_a, var_b), _relative(g_ae, var_a, var_e),
    )


def split_moments(state: TMCCState, cfg: SplitterConfig) -> TripartiteMoments:
    """Closed-form moments of the three counts behind the splitter."""
    n = mean_photon(state)
    lam2 = second_moment(state)
    p2, q2 = cfg.p2, cfg.q2
    return assemble_moments(
        mean_a=n,
        mean_b=p2 * n,
        mean_e=q2 * n,
        m2_a=lam2,
        m2_b=p2 * p2 * lam2 + p2 * q2 * n,
        m2_e=q2 * q2 * lam2 + p2 * q2 * n,
        cross_ab=p2 * lam2,
        cross_ae=q2 * lam2,
    )


@dataclass(frozen=True)
class JointTable:
    """``prob[n_a, n_b]`` = P(n_A = n_a, n_B = n_b, n_E = n_a - n_b)."""

    prob: np.ndarray

    def entries(self) -> Iterator[tuple[int, int, int, float]]:
        for n_a, n_b in zip(*np.nonzero(self.prob)):
            yield int(n_a), int(n_b), int(n_a - n_b), float(self.prob[n_a, n_b])

    def expect(self, f) -> float:
        """Sum ``f(n_a, n_b, n_e) * P`` over the table; ``f`` takes arrays."""
        n_a, n_b = np.indices(self.prob.shape)
        return float(np.sum(f(n_a, n_b, n_a - n_b) * self.prob))

    def total(self) -> float:
        return float(self.prob.sum())


def _log_binomial_row(n: int, log_p2: float, log_q2: float) -> np.ndarray:
    k = np.arange(n + 1)
    log_comb = math.lgamma(n + 1) - np.array([math.lgamma(i + 1) + math.lgamma(n - i + 1) for i in k])
    with np.errstate(invalid="ignore"):
        # 0 * log(0) terms are defined as 0
        kp = np.where(k > 0, k * log_p2, 0.0)
        kq = np.where(n - k > 0, (n - k) * log_q2, 0.0)
    return log_comb + kp + kq


def joint_pmf(state: TMCCState, cfg: SplitterConfig) -> JointTable:
    """Exact tripartite photon-number law on ``n_A <= n_max``."""
    size = state.n_max + 1
    prob = np.zeros((size, size))
    log_p2 = math.log(cfg.p2) if cfg.p2 > 0 else -math.inf
    log_q2 = math.log(cfg.q2) if cfg.q2 > 0 else -math.inf
    for n in range(size):
        row = _log_binomial_row(n, log_p2, log_q2) + state.log_pmf[n]
        prob[n, : n + 1] = np.exp(row)
    return JointTable(prob)


def table_moments(table: JointTable) -> TripartiteMoments:
    """Brute-force moments by direct summation over a joint table."""
    e = table.expect
    return assemble_moments(
        mean_a=e(lambda a, b, c: a),
        mean_b=e(lambda a, b, c: b),
        mean_e=e(lambda a, b, c: c),
        m2_a=e(lambda a, b, c: a * a),
        m2_b=e(lambda a, b, c: b * b),
        m2_e=e(lambda a, b, c: c * c),
        cross_ab=e(lambda a, b, c: a * b),
        cross_ae=e(lambda a, b, c: a * c),
    )


class SurfaceRow(NamedTuple):
    lambda_mag: float
    psi: float
    p: float
    g_ab: float
    g_ae: float
    rho_ab: Optional[float]
    rho_ae: Optional[float]
    mean_b: float
    mean_e: float


def correlation_surface(
    lambda_grid: Sequence[float],
    psi_grid: Sequence[float],
    tail_epsilon: float = 1e-12,
) -> list[SurfaceRow]:
    """Correlation surfaces over beam intensity and splitter angle.

    Rows come out lambda-major, in the order of the given grids.
    """
    if len(lambda_grid) == 0 or len(psi_grid) == 0:
        raise ValueError("grids must be non-empty")
    configs = [(float(psi), SplitterConfig.from_psi(psi)) for psi in psi_grid]
    rows = []
    for lam in lambda_grid:
        if not lam > 0:
            raise ValueError(f"lambda grid values must be positive, got {lam!r}")
        state = new_state(lam, 0.0, tail_epsilon)
        for psi, cfg in configs:
            m = split_moments(state, cfg)
            rows.append(SurfaceRow(float(lam), psi, cfg.p, m.g_ab, m.g_ae,
                                   m.rho_ab, m.rho_ae, m.mean_b, m.mean_e))
    return rows
