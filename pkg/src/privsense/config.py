"""Numerical tolerances used across the package.

Every comparison threshold lives here so that behaviour at rank changes and
near-degenerate inputs is reproducible.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-9
    trace: float = 1e-9
    psd: float = 1e-10
    # metrics reject inputs whose negative eigenvalues are worse than this
    psd_metric: float = 1e-8
    completeness: float = 1e-9
    projector: float = 1e-9
    # eigenvalues below this are treated as exactly zero (SLD, matrix square roots)
    rank_cutoff: float = 1e-12
    sld_kernel: float = 1e-8
    unit_norm: float = 1e-12
    max_dim: int = 2**12
    max_branches: int = 2**16


DEFAULT_TOLERANCES = Tolerances()
