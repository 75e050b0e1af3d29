"""Passive two-photon phase gate from chirally coupled V-type emitters."""

from chiralgate.model import (
    Direction,
    EmitterChain,
    FrequencyGrid,
    GateResult,
    PulseSpec,
    TwoPhotonState,
    validate_chain,
)

__version__ = "0.1.0"
