"""Quantum neural network training with classical side information."""
from .envgraph import EnvGraph, chain_graph, circuit_graph
from .errors import (
    DimensionError,
    InvalidInputError,
    InvalidObservableError,
    NotADAGError,
    NumericError,
    QnnForgeError,
    TraceError,
    UnknownVertexError,
)
from .qsim import Circuit, PauliString, StateVector, predicted_label

__all__ = [
    "Circuit",
    "DimensionError",
    "EnvGraph",
    "InvalidInputError",
    "InvalidObservableError",
    "NotADAGError",
    "NumericError",
    "PauliString",
    "QnnForgeError",
    "StateVector",
    "TraceError",
    "UnknownVertexError",
    "chain_graph",
    "circuit_graph",
    "predicted_label",
]
