"""Quantifier-free densities and finite approximation for unary mappings."""

from __future__ import annotations

__version__ = "0.1.0"

from .approx import ApproxParams, BlowResult, approximate, blow, error_bound, sample_structure, uniformize
from .density import converge, density, density_exact, density_mc, density_weighted, hoeffding_radius
from .errors import HypothesisError, ParseError, ResourceLimitError
from .interval import (
    IntervalMapping,
    check_cycle_preservation,
    cyclic_part,
    density_exact_interval,
    parse_interval,
    refine,
)
from .local import ball_canonical, ball_histogram, dispersion, residuality
from .logic import CycleShiftGroup, parse_formula, substitute
from .mapping import ColoredMapping, WeightedMapping, parse_mapping

__all__ = [
    "ApproxParams", "BlowResult", "approximate", "blow", "error_bound", "sample_structure",
    "uniformize", "converge", "density", "density_exact", "density_mc", "density_weighted",
    "hoeffding_radius", "HypothesisError", "ParseError", "ResourceLimitError",
    "IntervalMapping", "check_cycle_preservation", "cyclic_part", "density_exact_interval",
    "parse_interval", "refine", "ball_canonical", "ball_histogram", "dispersion",
    "residuality", "CycleShiftGroup", "parse_formula", "substitute", "ColoredMapping",
    "WeightedMapping", "parse_mapping",
]
