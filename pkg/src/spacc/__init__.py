"""Spatial convex clustering for region detection in genomic probe data."""

__version__ = "0.1.0"

from .core import (ProbeMatrix, RegionAssignment, SubproblemSpan, ValidationError,
                   ValidationReport, WeightChain, compute_weights,
                   split_subproblems, validate)
from .solver import (SolverConfig, SolverError, SolverState, ama_solve,
                     extract_regions, objective, solve_decomposed)
from .missing import MmConfig, missing_objective, mm_solve, surrogate
from .cv import (CvTable, FoldPlan, PipelineConfig, PipelineResult,
                 cross_validate, estimate_noise, make_folds, pipeline,
                 select_and_threshold)
from .metrics import (adjusted_rand, contingency, evaluate, jaccard, rand_index,
                      variation_of_information)
from .simulate import preset, simulate
from .estimator import SpatialConvexClustering
