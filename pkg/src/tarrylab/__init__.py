"""Numerical experiments around the singular integral of the two-dimensional
Tarry problem: oscillatory integrals, the moment map and its Gram
determinants, slab surface measures and dyadic tail shells."""

from .exponent import decay_fit, tail_shell, verdict
from .momentmap import gram_det, jacobian_A, jacobian_A0, selected_minor_det
from .oscquad import QuadratureConfig, unit_interval_integral, unit_square_integral
from .phasepoly import PhasePolynomial, canonical_tarry_basis, eval_phase

__all__ = [
    "PhasePolynomial",
    "QuadratureConfig",
    "canonical_tarry_basis",
    "decay_fit",
    "eval_phase",
    "gram_det",
    "jacobian_A",
    "jacobian_A0",
    "selected_minor_det",
    "tail_shell",
    "unit_interval_integral",
    "unit_square_integral",
    "verdict",
]
