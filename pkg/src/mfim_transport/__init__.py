"""Simulation suite for infinite-temperature energy transport in the
mixed-field Ising chain: y-basis sampled correlators, Trotterized
dynamics with shot and relaxation noise, sum-rule renormalization, and
transport-exponent extraction, validated against exact diagonalization.
"""

__version__ = "0.1.0"

from .model import ModelParams, Variant  # noqa: F401
from .noise import NoiseParams  # noqa: F401
