"""Equilibrium diagnostics for the Ising model on free-group Cayley trees.

Subpackages by topic:

- `ising`:      closed-form observables of the one-parameter chain family
- `bp`:         scalar consistency equation, uniqueness/reconstruction thresholds
- `nn`:         general q-symbol nearest-neighbor chains and their pressures
- `bounds`:     edge-entropy upper bound, sufficient conditions, region maps
- `sim`:        permutation-model simulator (exact counts, Glauber dynamics)
- `cli`:        command-line frontend writing CSV tables and JSON manifests
"""

__version__ = "0.1.0"

from .ising import IsingParams, IsingChain, PressureReport, build_mu_t
from .bp import solve_fixed_points, uniqueness_threshold, reconstruction_threshold

__all__ = [
    "IsingParams",
    "IsingChain",
    "PressureReport",
    "build_mu_t",
    "solve_fixed_points",
    "uniqueness_threshold",
    "reconstruction_threshold",
    "__version__",
]
