"""Distribution estimation for numerical attributes under local differential privacy."""

from .core import ConfigError, DataError, DegenerateError, DomainError, NumldpError
from .wave import SwParams, WaveShape, optimal_b, sw_perturb
from .reconstruct import EmConfig, reconstruct

__version__ = "0.1.0"
