"""Spectral-analysis lab for two dissipative model systems.

Subpackages cover per-frequency symbols and propagators, explicit
resolvents with bound scans, frequency splitting on a periodic grid,
rearrangement-based function norms, parabolic-contour semigroup
quadrature, pseudo-spectral evolution with synthetic perturbation
profiles, and the bump-train norm counterexample.
"""

from .symbols import (
    ModelParams,
    DweParams,
    FreqVector,
    Spectrum,
    Projections,
    cns_symbol,
    cns_eigensystem,
    dwe_symbol,
    dwe_eigensystem,
    propagator,
    matexp,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "DweParams",
    "FreqVector",
    "Spectrum",
    "Projections",
    "cns_symbol",
    "cns_eigensystem",
    "dwe_symbol",
    "dwe_eigensystem",
    "propagator",
    "matexp",
    "__version__",
]
