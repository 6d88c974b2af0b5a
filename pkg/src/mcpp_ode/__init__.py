"""Annealed softmax ODE heuristic for multiple choice polynomial programs."""

__version__ = "0.1.0"

from .core import (BooleanSolution, ExtendedRounding, InvalidInputError, MCPPObjective,
                   Partition, hardmax, rhs, softmax, softmax_blocks)
from .polynomial import (MultilinearPolynomial, PolynomialObjective, UnconstrainedObjective,
                         random_polynomial_objective, reformulate_unconstrained)
from .solver import (AnnealSchedule, SolveTrace, StepController, adjust_step, anneal,
                     error_estimate, fe_step, greedy_booleanize, integrate_to_equilibrium,
                     round_to_extended, sample_initial)
from .maxcut import Graph, MaxKCutObjective, cut_value, parse_gset, read_gset, solve_maxkcut
from .stardisc import (DeltaBarObjective, DeltaObjective, PointSet, eval_D, eval_Dbar,
                       exact_star_discrepancy, parse_pointset, preprocess, solve_stardisc)
