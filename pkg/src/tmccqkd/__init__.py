"""Simulator for key distribution with pair-coherent (TMCC) twin laser beams."""
from .eavesdrop import (
    JointTable,
    SplitterConfig,
    TripartiteMoments,
    correlation_surface,
    joint_pmf,
    split_moments,
    table_moments,
)
from .protocol import (
    KeyMaterial,
    NoOverlapError,
    ProtocolConfig,
    SessionReport,
    agreement_rate,
    bit_balance,
    extract_bits,
    run_session,
)
from .sampler import SampleStream, SlotSample, empirical_stats, sample_slots
from .special_fn import bessel_i0_scaled, bessel_i1_scaled, bessel_ratio, log_bessel_i0
from .tmcc_state import (
    TMCCState,
    UndefinedCorrelationError,
    correlation_ab,
    expect_moment,
    mean_photon,
    new_state,
    second_moment,
    variance,
)

__version__ = "0.1.0"
