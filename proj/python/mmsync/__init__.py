"""Joint timing, CFO, phase-noise and compressive channel estimation for hybrid MIMO-OFDM."""

from ._core import (
    PhaseNoiseModel,
    channel,
    golay_preamble,
    nmse,
    spectral_efficiency,
    sweep,
    zadoff_chu,
)

__all__ = [
    "PhaseNoiseModel",
    "channel",
    "golay_preamble",
    "nmse",
    "spectral_efficiency",
    "sweep",
    "zadoff_chu",
]
