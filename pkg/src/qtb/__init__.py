"""Simulation and analysis of cavity-enhanced time-bin entangled photon pairs."""
from ._backend import BACKEND
from .errors import (ConfigError, DegenerateDataError, DomainError, FitError, NoDataError,
                     PreconditionError, QtbError)
from .histogram import Histogram
from .tagstream import TagStream

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConfigError", "DegenerateDataError", "DomainError", "FitError",
    "Histogram", "NoDataError", "PreconditionError", "QtbError", "TagStream",
]
