"""Weight optimization for loss-weighted decoding."""

from .ow import (ConstraintSelector, CpaIterationLimit, OwError, OwSolution, example_risks,
                 most_violated_selector, risk_of, selector_coefficients, solve_ow_cpa,
                 solve_ow_full)
from .simplex import LinearProgram, LPResult, SimplexError, simplex_solve

__all__ = [
    "ConstraintSelector", "CpaIterationLimit", "OwError", "OwSolution", "example_risks",
    "most_violated_selector", "risk_of", "selector_coefficients", "solve_ow_cpa",
    "solve_ow_full", "LinearProgram", "LPResult", "SimplexError", "simplex_solve",
]
