"""Seeded Monte Carlo photon counts for Alice, Bob and Eve.

Each slot draws ``n_A`` from the truncated pair-coherent law by inverse CDF,
then splits Bob's identical count binomially between Bob and Eve.  Streams
are reproducible: the generator is numpy's counter-based Philox4x64 keyed by
``SeedSequence(seed)``; all ``n_A`` uniforms are drawn first, then the
binomial splits, both in slot order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, TextIO

import numpy as np

from .eavesdrop import SplitterConfig, TripartiteMoments, _relative
from .tmcc_state import TMCCState

RNG_ALGORITHM = "numpy.Philox4x64/SeedSequence; inverse-cdf n_a then Generator.binomial n_b"
SEED_MAX = 2**64 - 1


class SlotSample(NamedTuple):
    n_a: int
    n_b: int
    n_e: int


@dataclass(frozen=True)
class SampleStream:
    """Columnar per-slot counts plus the parameters that reproduce them."""

    n_a: np.ndarray
    n_b: np.ndarray
    n_e: np.ndarray
    seed: int
    lambda_mag: float
    p: float
    algorithm: str = RNG_ALGORITHM

    def __len__(self) -> int:
        return len(self.n_a)

    @property
    def samples(self) -> Iterator[SlotSample]:
        for a, b, e in zip(self.n_a.tolist(), self.n_b.tolist(), self.n_e.tolist()):
            yield SlotSample(a, b, e)

    def subset(self, index: np.ndarray) -> "SampleStream":
        return SampleStream(
            _frozen(self.n_a[index]), _frozen(self.n_b[index]), _frozen(self.n_e[index]),
            self.seed, self.lambda_mag, self.p, self.algorithm,
        )

    def write_columns(self, fh: TextIO) -> None:
        fh.write("# slot_index n_a n_b n_e\n")
        for i, (a, b, e) in enumerate(self.samples):
            fh.write(f"{i} {a} {b} {e}\n")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.int64)
    arr.flags.writeable = False
    return arr


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for ``seed``; extra integers select an independent sub-stream."""
    if int(seed) != seed or not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *stream])))


def sample_slots(state: TMCCState, cfg: SplitterConfig, count: int, seed: int) -> SampleStream:
    """Draw ``count`` i.i.d. slots ``(n_A, n_B, n_E)``."""
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count!r}")
    rng = make_rng(seed)
    cdf = np.cumsum(state.pmf())
    # renormalise the truncated law; the dropped tail is below tail_epsilon
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    u = rng.random(int(count))
    n_a = np.searchsorted(cdf, u, side="right").astype(np.int64)
    n_b = rng.binomial(n_a, cfg.p2).astype(np.int64)
    n_e = n_a - n_b
    return SampleStream(_frozen(n_a), _frozen(n_b), _frozen(n_e), int(seed),
                        state.lambda_mag, cfg.p)


def _pearson_exact(n: int, s_x: int, s_y: int, s_xx: int, s_yy: int, s_xy: int) -> tuple[float, float, float, float | None]:
    # integer numerators keep identical columns at rho == 1.0 exactly
    c_xy = n * s_xy - s_x * s_y
    c_xx = n * s_xx - s_x * s_x
    c_yy = n * s_yy - s_y * s_y
    n2 = n * n
    if c_xx == 0 or c_yy == 0:
        rho = None
    elif c_xy * c_xy == c_xx * c_yy:
        rho = math.copysign(1.0, c_xy)
    else:
        rho = _relative(float(c_xy), float(c_xx), float(c_yy))
    return c_xy / n2, c_xx / n2, c_yy / n2, rho


def pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    """Pearson correlation of two integer count columns; ``None`` if either is constant."""
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    s = [int(v) for v in (x.sum(), y.sum(), (x * x).sum(), (y * y).sum(), (x * y).sum())]
    return _pearson_exact(n, *s)[3]


def empirical_stats(stream: SampleStream) -> TripartiteMoments:
    """Sample estimates in the same layout as the analytic moments.

    Covariances are population (divide-by-n) estimates.
    """
    n = len(stream)
    if n == 0:
        raise ValueError("empty sample stream")
    a, b, e = stream.n_a, stream.n_b, stream.n_e
    s_a, s_b, s_e = int(a.sum()), int(b.sum()), int(e.sum())
    s_aa, s_bb, s_ee = int((a * a).sum()), int((b * b).sum()), int((e * e).sum())
    s_ab, s_ae = int((a * b).sum()), int((a * e).sum())
    g_ab, _, _, rho_ab = _pearson_exact(n, s_a, s_b, s_aa, s_bb, s_ab)
    g_ae, _, _, rho_ae = _pearson_exact(n, s_a, s_e, s_aa, s_ee, s_ae)
    return TripartiteMoments(
        mean_a=s_a / n, mean_b=s_b / n, mean_e=s_e / n,
        m2_a=s_aa / n, m2_b=s_bb / n, m2_e=s_ee / n,
        cross_ab=s_ab / n, cross_ae=s_ae / n,
        g_ab=g_ab, g_ae=g_ae, rho_ab=rho_ab, rho_ae=rho_ae,
    )
