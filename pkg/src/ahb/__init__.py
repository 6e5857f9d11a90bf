"""Adaptive hyper-box matching for observational causal inference."""

from ahb.boxes import HyperBox, MatchedGroup, contains, mmg
from ahb.data import Dataset, SplitSpec, binarize_categoricals, load_dataset, split
from ahb.errors import (
    AHBError,
    ConfigError,
    InfeasibleError,
    MethodUnavailableError,
    ParseError,
    SchemaError,
    ValidationError,
)
from ahb.estimation import EffectEstimate, att, cate_by_value, estimate_all, ite, mutual_membership_rate
from ahb.inference import IntervalEstimate, ResamplingConfig, interval
from ahb.predictor import BaggedTrees, ExternalModel, OracleModel, fit_builtin
from ahb.simulation import DgpConfig, HarnessConfig, generate, make_oracle, run_scenario
from ahb.solver_fast import FastParams, fast_all, fast_box
from ahb.solver_mip import BoxSolution, Preprocess, SolverParams, solve_all, solve_exact
from ahb.tuning import tune

__version__ = "0.1.0"

__all__ = [
    "AHBError",
    "BaggedTrees",
    "BoxSolution",
    "ConfigError",
    "Dataset",
    "DgpConfig",
    "EffectEstimate",
    "ExternalModel",
    "FastParams",
    "HarnessConfig",
    "HyperBox",
    "InfeasibleError",
    "IntervalEstimate",
    "MatchedGroup",
    "MethodUnavailableError",
    "OracleModel",
    "ParseError",
    "Preprocess",
    "ResamplingConfig",
    "SchemaError",
    "SolverParams",
    "SplitSpec",
    "ValidationError",
    "att",
    "binarize_categoricals",
    "cate_by_value",
    "contains",
    "estimate_all",
    "fast_all",
    "fast_box",
    "fit_builtin",
    "generate",
    "interval",
    "ite",
    "load_dataset",
    "make_oracle",
    "mmg",
    "mutual_membership_rate",
    "run_scenario",
    "solve_all",
    "solve_exact",
    "split",
    "tune",
]
