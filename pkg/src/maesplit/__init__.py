"""Exact binary MAE splits of categorical features.

The split reduces to a unimodal-cost 2-median problem over piecewise-linear
functions, solved by divide and conquer on a totally monotone matrix.
"""

from .baselines import (EncodingCounterexample, exhaustive_split, gen_adversarial_median,
                        gen_encoding_counterexample, gen_synthetic, median_heuristic_split)
from .mae_split import (Instance, SplitResult, binary_mae_split, group_by_category,
                        recover_partition, split_cost)
from .pwl_core import (DaggerFn, FnView, PiecewiseLinearFn, build_abs_sum, dagger, evaluate,
                       mae, median, restrict, sum_functions)
from .sweep_eval import SweepEvaluator
from .uc2m_solver import Uc2mProblem, naive_grid_min, row_min_indices, unimodal_2median

__all__ = [
    "EncodingCounterexample", "exhaustive_split", "gen_adversarial_median",
    "gen_encoding_counterexample", "gen_synthetic", "median_heuristic_split",
    "Instance", "SplitResult", "binary_mae_split", "group_by_category",
    "recover_partition", "split_cost",
    "DaggerFn", "FnView", "PiecewiseLinearFn", "build_abs_sum", "dagger", "evaluate",
    "mae", "median", "restrict", "sum_functions",
    "SweepEvaluator",
    "Uc2mProblem", "naive_grid_min", "row_min_indices", "unimodal_2median",
]
