"""Spectral-Galerkin simulator for a fourth-order stochastic magnetisation model.

Subpackages by responsibility: `spectral` (Neumann cosine basis, diagonal
operators), `fields` (magnetisation algebra, energies), `noise` (truncated
Wiener forcing with counter-based streams), `integrator` (exponential and
IMEX Euler on the stiff splitting), `diagnostics` (norm series, decay and
limit checks, ergodic averages), `config`/`experiment`/`cli` (experiment
driver and CSV outputs), `selftest` (identity suite).
"""

__version__ = "0.1.0"

from .fields import ModelParams, VectorField
from .integrator import SchemeConfig, TrajectoryState, integrate
from .noise import NoiseFamily, NoisePath, build_noise_family
from .spectral import BoxDomain, OperatorA, SpectralBasis, build_basis

__all__ = [
    "BoxDomain", "SpectralBasis", "OperatorA", "build_basis",
    "ModelParams", "VectorField",
    "NoiseFamily", "NoisePath", "build_noise_family",
    "SchemeConfig", "TrajectoryState", "integrate",
    "__version__",
]
