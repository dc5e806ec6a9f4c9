"""Desk-scale simulation of multiqubit Mølmer–Sørensen gates on Kerr-cat qubits."""

__version__ = "0.1.0"

from . import cli, dynamics, gates, hilbert, model, noise, protocols, states

__all__ = [
    "__version__",
    "cli",
    "dynamics",
    "gates",
    "hilbert",
    "model",
    "noise",
    "protocols",
    "states",
]
