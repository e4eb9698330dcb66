"""Hybrid evolutionary and pattern-search engine for multi-objective black-box tuning."""
from .constraints import LinearSystem, PenaltyConfig, project_to_feasible
from .dominance import ParetoArchive, dominates, select_centers
from .errors import ConfigError, InputDomainError, NoFeasibleFrontError, ParetoTuneError, UndefinedMetricError
from .expressions import parse_constraint
from .manager import RunConfig, RunResult, run_optimization
from .metrics import FrontSample, averaged_hausdorff, gd, igd
from .problem import (
    ConfusionCounts,
    Evaluation,
    LinearConstraint,
    NonlinearConstraint,
    ProblemSpec,
    VariableSpec,
    builtin_problem,
    confusion_metrics,
    true_front,
    zdt1,
    zdt3,
    zdt_problem,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConfusionCounts",
    "Evaluation",
    "FrontSample",
    "InputDomainError",
    "LinearConstraint",
    "LinearSystem",
    "NoFeasibleFrontError",
    "NonlinearConstraint",
    "ParetoArchive",
    "ParetoTuneError",
    "PenaltyConfig",
    "ProblemSpec",
    "RunConfig",
    "RunResult",
    "UndefinedMetricError",
    "VariableSpec",
    "averaged_hausdorff",
    "builtin_problem",
    "confusion_metrics",
    "dominates",
    "gd",
    "igd",
    "parse_constraint",
    "project_to_feasible",
    "run_optimization",
    "select_centers",
    "true_front",
    "zdt1",
    "zdt3",
    "zdt_problem",
]
