"""Latin hypercube sampling over mixed variable types."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .problem import CATEGORICAL, INTEGER, VariableSpec


@dataclass(frozen=True)
class LhsPlan:
    sample_count: int
    dimension: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sample_count < 2 or self.dimension < 1:
            raise ConfigError("LHS needs sample_count >= 2 and dimension >= 1")


def stratum_indices(values: np.ndarray, lower: float, upper: float, n: int) -> np.ndarray:
    """Index of the equal-width stratum of ``[lower, upper]`` holding each value."""
    if upper == lower:
        return np.arange(n)
    idx = np.floor((values - lower) / (upper - lower) * n).astype(int)
    return np.clip(idx, 0, n - 1)


def latin_hypercube(plan: LhsPlan, variables: Sequence[VariableSpec]) -> list[np.ndarray]:
    """One sample per stratum per dimension, strata independently shuffled.

    Integer dimensions are stratified over ``[lower - 0.5, upper + 0.5]`` and
    rounded, so every integer value is equally likely.  Categorical dimensions
    cycle through the levels and are then shuffled.
    """
    if len(variables) != plan.dimension:
        raise ConfigError("plan dimension does not match the variable count")
    n = plan.sample_count
    rng = np.random.default_rng(plan.seed)
    out = np.empty((n, plan.dimension))
    for j, var in enumerate(variables):
        if var.kind == CATEGORICAL:
            out[:, j] = rng.permutation(np.arange(n) % len(var.levels))
            continue
        lo, hi = var.lower, var.upper
        if var.kind == INTEGER:
            lo, hi = lo - 0.5, hi + 0.5
        strata = rng.permutation(n)
        u = (strata + rng.random(n)) / n
        col = lo + u * (hi - lo)
        if var.kind == INTEGER:
            col = np.clip(np.round(col), var.lower, var.upper)
        else:
            col = np.clip(col, var.lower, var.upper)
        out[:, j] = col
    return [row.copy() for row in out]
