"""Lower bounds for Hausdorff measures of limsup sets of balls.

The pipeline runs a greedy disjoint selection of rescaled balls, builds local
measures on the selected balls, assembles them into a Cantor-type tree and
reads off a mass-distribution lower bound.  Box counts and covering sums
serve as independent checks.
"""
from .cantortree import build_tree, dimension_bisect, mass_distribution_bound, query_tree
from .covering import greedy_select
from .dimfn import DimensionFunction, check_dimension_function
from .geometry import Ball, Balls, CantorSpace, IntervalUnion, UnitInterval
from .localmeasure import build_local_measure, verify_star_hypothesis
from .sequences import BAdicSequence, ExplicitSequence, RandomSequence, RationalSequence

__version__ = "0.1.0"

__all__ = [
    "BAdicSequence",
    "Ball",
    "Balls",
    "CantorSpace",
    "DimensionFunction",
    "ExplicitSequence",
    "IntervalUnion",
    "RandomSequence",
    "RationalSequence",
    "UnitInterval",
    "build_local_measure",
    "build_tree",
    "check_dimension_function",
    "dimension_bisect",
    "greedy_select",
    "mass_distribution_bound",
    "query_tree",
    "verify_star_hypothesis",
]
