"""Heavy-trimmed L-statistics and moderate-deviation Monte Carlo checks."""

from ._backend import BACKEND
from .distributions import Distribution, WinsorizedDistribution, winsorized
from .lstat import Decomposer, DecompositionResult, TrimSpec, decompose
from .weights import CoefficientScheme, WeightSpec, extend_weight

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CoefficientScheme",
    "Decomposer",
    "DecompositionResult",
    "Distribution",
    "TrimSpec",
    "WeightSpec",
    "WinsorizedDistribution",
    "decompose",
    "extend_weight",
    "winsorized",
]
