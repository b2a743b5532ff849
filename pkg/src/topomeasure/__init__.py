"""Deficient topological measures on finite grids.

Regions are cell sets of an ``n x n`` grid over the unit square, tagged open
or compact. Set functions are evaluators that can be checked against the
deficient, topological and measure axioms, integrated against grid
functions, arranged into sequences and compared with Prokhorov and
Kantorovich-Rubinstein distances.
"""

from .grid import COMPACT, OPEN, ContractError, GridSpace, Kind, PointRef, Region, ball
from .measures import (
    Budget,
    DTMEvaluator,
    classify,
    combine,
    evaluator_from_json,
    indicator_dtm,
    point_mass,
    radon_from_weights,
    uniform_radon,
    verify_dtm_axioms,
    verify_measure,
    verify_tm,
)
from .solid import extend, nvssf, two_point_area
from .integral import GridFunction, integrate, integrate_full
from .convergence import MeasureSequence, crosscheck, default_config
from .metrics import LipFamily, SetFamily, kr, prokhorov
from .families import MeasureFamily, tightness_witness, variation_bound

__version__ = "0.1.0"
