"""Numerical laboratory for quasi-periodic Schrodinger operators."""

from qplab.arithmetic import (
    BetaEstimate,
    Frequency,
    ResonanceRecord,
    beta_estimate,
    build_frequency_with_beta,
    continued_fraction,
    diophantine_check,
    find_resonances,
    frequency_from_quotients,
    preset_frequency,
    torus_distance,
)
from qplab.potential import PotentialSpec, eval_potential, make_amo, strip_norm

__all__ = [
    "BetaEstimate",
    "Frequency",
    "PotentialSpec",
    "ResonanceRecord",
    "beta_estimate",
    "build_frequency_with_beta",
    "continued_fraction",
    "diophantine_check",
    "eval_potential",
    "find_resonances",
    "frequency_from_quotients",
    "make_amo",
    "preset_frequency",
    "strip_norm",
    "torus_distance",
]
