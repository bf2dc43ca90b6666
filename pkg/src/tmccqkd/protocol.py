"""Threshold key extraction from shot noise, sifting, and intrusion detection.

Each party compares its per-slot photon count with the publicly known mean:
above gives bit 1, below gives bit 0, equal is sifted out.  A seed-derived
subset of slots is disclosed publicly; the Alice-Bob Pearson correlation
over it is compared with ``rho_min`` to flag an eavesdropper.  Disclosed
slots never enter a key.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .eavesdrop import SplitterConfig, TripartiteMoments
from .sampler import SampleStream, empirical_stats, make_rng, pearson, sample_slots
from .tmcc_state import DEFAULT_TAIL_EPSILON, TMCCState, mean_photon, new_state

logger = logging.getLogger(__name__)

DEFAULT_RHO_MIN = 0.9
DEFAULT_DISCLOSE_FRACTION = 0.1
MIN_DISCLOSED = 100

# SeedSequence sub-stream used to pick the disclosed slots
_DISCLOSURE_STREAM = 1


class NoOverlapError(ValueError):
    """Two keys share no kept slot, so agreement is undefined."""


@dataclass(frozen=True)
class ProtocolConfig:
    lambda_mag: float
    slot_count: int
    threshold: Optional[float] = None
    disclose_fraction: float = DEFAULT_DISCLOSE_FRACTION
    rho_min: float = DEFAULT_RHO_MIN
    tail_epsilon: float = DEFAULT_TAIL_EPSILON

    def __post_init__(self):
        if int(self.slot_count) != self.slot_count or self.slot_count < 1:
            raise ValueError(f"slot_count must be a positive integer, got {self.slot_count!r}")
        if not 0.0 < self.disclose_fraction < 1.0:
            raise ValueError("disclose_fraction must lie in (0, 1)")
        if not 0.0 < self.rho_min < 1.0:
            raise ValueError("rho_min must lie in (0, 1)")
        if self.threshold is not None and not (math.isfinite(self.threshold) and self.threshold >= 0):
            raise ValueError("threshold must be finite and non-negative")

    @property
    def n_disclosed(self) -> int:
        return int(round(self.disclose_fraction * self.slot_count))


@dataclass(frozen=True)
class KeyMaterial:
    bits: np.ndarray
    kept_slots: np.ndarray

    def __len__(self) -> int:
        return len(self.bits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KeyMaterial):
            return NotImplemented
        return (np.array_equal(self.bits, other.bits)
                and np.array_equal(self.kept_slots, other.kept_slots))

    __hash__ = None

    def to_hex(self) -> str:
        """Bits MSB-first, right-padded with zeros to whole hex digits."""
        bits = self.bits.astype(np.uint8)
        pad = (-len(bits)) % 4
        if pad:
            bits = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
        nibbles = bits.reshape(-1, 4) @ np.array([8, 4, 2, 1])
        return "".join("0123456789abcdef"[v] for v in nibbles)


@dataclass(frozen=True)
class SessionReport:
    alice_key: KeyMaterial
    bob_key: KeyMaterial
    eve_key: KeyMaterial
    agreement_ab: Optional[float]
    agreement_ae: Optional[float]
    disclosed_rho: Optional[float]
    eavesdropping_detected: Optional[bool]
    empirical: TripartiteMoments
    threshold: float
    disclosed_slots: np.ndarray
    stream: SampleStream = field(repr=False)


def extract_bits(
    counts: Sequence[int],
    threshold: float,
    slots: Optional[Sequence[int]] = None,
) -> KeyMaterial:
    """Turn counts into bits against ``threshold``; ties are sifted out.

    ``slots`` labels each count with its session slot index (default
    ``0..len(counts)-1``).
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    counts = np.asarray(counts)
    slots = np.arange(len(counts)) if slots is None else np.asarray(slots, dtype=np.int64)
    keep = counts != threshold
    bits = (counts[keep] > threshold).astype(np.uint8)
    return KeyMaterial(bits, slots[keep].astype(np.int64))


def agreement_rate(a: KeyMaterial, b: KeyMaterial) -> float:
    """Fraction of matching bits over the slots both keys kept."""
    _, ia, ib = np.intersect1d(a.kept_slots, b.kept_slots, assume_unique=True, return_indices=True)
    if len(ia) == 0:
        raise NoOverlapError("keys share no kept slots")
    return float(np.mean(a.bits[ia] == b.bits[ib]))


def bit_balance(state: TMCCState, threshold: float) -> tuple[float, float, float]:
    """Analytic probabilities of bit 0, bit 1 and a sifted slot."""
    n = np.arange(state.n_max + 1)
    pmf = state.pmf()
    p0 = math.fsum(pmf[n < threshold])
    p1 = math.fsum(pmf[n > threshold])
    p_discard = math.fsum(pmf[n == threshold])
    return p0, p1, p_discard


def _agreement_or_none(a: KeyMaterial, b: KeyMaterial) -> Optional[float]:
    try:
        return agreement_rate(a, b)
    except NoOverlapError:
        return None


def disclosed_subset(slot_count: int, n_disclosed: int, seed: int) -> np.ndarray:
    """Sorted slot indices opened for public comparison, derived from ``seed``."""
    rng = make_rng(seed, _DISCLOSURE_STREAM)
    return np.sort(rng.choice(slot_count, size=min(n_disclosed, slot_count), replace=False))


def run_session(cfg: ProtocolConfig, splitter: SplitterConfig, seed: int) -> SessionReport:
    """Simulate one key-exchange session with an optional tap on Bob's beam.

    An undefined disclosed correlation (a party saw a constant count) is
    treated as detection: the channel cannot be certified.  With fewer than
    two disclosed slots the verdict itself is undefined (``None``).
    """
    state = new_state(cfg.lambda_mag, 0.0, cfg.tail_epsilon)
    threshold = mean_photon(state) if cfg.threshold is None else float(cfg.threshold)
    stream = sample_slots(state, splitter, cfg.slot_count, seed)

    if cfg.n_disclosed < MIN_DISCLOSED:
        logger.warning("only %d disclosed slots; detection is statistically weak", cfg.n_disclosed)
    disclosed = disclosed_subset(cfg.slot_count, cfg.n_disclosed, seed)
    if len(disclosed) >= 2:
        disclosed_rho = pearson(stream.n_a[disclosed], stream.n_b[disclosed])
        detected = disclosed_rho is None or disclosed_rho < cfg.rho_min
    else:
        disclosed_rho, detected = None, None

    private = np.ones(cfg.slot_count, dtype=bool)
    private[disclosed] = False
    slots = np.flatnonzero(private)
    alice = extract_bits(stream.n_a[slots], threshold, slots)
    bob = extract_bits(stream.n_b[slots], threshold, slots)
    eve = extract_bits(stream.n_e[slots], threshold, slots)

    return SessionReport(
        alice_key=alice,
        bob_key=bob,
        eve_key=eve,
        agreement_ab=_agreement_or_none(alice, bob),
        agreement_ae=_agreement_or_none(alice, eve),
        disclosed_rho=disclosed_rho,
        eavesdropping_detected=detected,
        empirical=empirical_stats(stream),
        threshold=threshold,
        disclosed_slots=disclosed,
        stream=stream,
    )
