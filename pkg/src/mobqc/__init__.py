"""Simulator and verification suite for measurement-only verifiable blind
quantum computation with quantum-input verification."""

from .graphs import ProtocolGraph, StabilizerGeneratorSet, coupled_stabilizer_generators
from .protocol import (
    AliceSecret,
    ArbitraryState,
    ChannelOnInput,
    DecisionInstance,
    Honest,
    InputBlock,
    Protocol,
    ReplaceInput,
    WrongGraph,
    estimate_acceptance,
    exact_acceptance,
)
from .qsim import DensityOperator, PauliString, StateVector

__all__ = [
    "AliceSecret",
    "ArbitraryState",
    "ChannelOnInput",
    "DecisionInstance",
    "DensityOperator",
    "Honest",
    "InputBlock",
    "PauliString",
    "Protocol",
    "ProtocolGraph",
    "ReplaceInput",
    "StabilizerGeneratorSet",
    "StateVector",
    "WrongGraph",
    "coupled_stabilizer_generators",
    "estimate_acceptance",
    "exact_acceptance",
]

__version__ = "0.1.0"
