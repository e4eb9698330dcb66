"""Search spaces, problem definitions, benchmark problems and classifier metrics.

Points are plain 1-D ``float64`` arrays with one entry per variable.  Integer
variables hold whole numbers and categorical variables hold the level index.
All objectives are minimized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, InputDomainError, UndefinedMetricError

CONTINUOUS = "continuous"
INTEGER = "integer"
CATEGORICAL = "categorical"
KINDS = (CONTINUOUS, INTEGER, CATEGORICAL)

DEFAULT_EPSILON = 1e-6

ZDT_DIMENSION = 30
ZDT3_GRID_SIZE = 100_001


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str = CONTINUOUS
    lower: float | None = None
    upper: float | None = None
    levels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            levels = tuple(str(v) for v in self.levels)
            if not levels:
                raise ConfigError(f"variable {self.name!r}: categorical needs levels")
            if len(set(levels)) != len(levels):
                raise ConfigError(f"variable {self.name!r}: levels must be distinct")
            object.__setattr__(self, "levels", levels)
            object.__setattr__(self, "lower", 0.0)
            object.__setattr__(self, "upper", float(len(levels) - 1))
            return
        if self.lower is None or self.upper is None:
            raise ConfigError(f"variable {self.name!r}: bounds required")
        lo, hi = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise ConfigError(f"variable {self.name!r}: need finite lower <= upper")
        if self.kind == INTEGER and (lo != round(lo) or hi != round(hi)):
            raise ConfigError(f"variable {self.name!r}: integer bounds must be whole")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def continuous(cls, name: str, lower: float, upper: float) -> VariableSpec:
        return cls(name, CONTINUOUS, lower, upper)

    @classmethod
    def integer(cls, name: str, lower: int, upper: int) -> VariableSpec:
        return cls(name, INTEGER, lower, upper)

    @classmethod
    def categorical(cls, name: str, levels: Sequence[str]) -> VariableSpec:
        return cls(name, CATEGORICAL, levels=tuple(levels))

    @property
    def span(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        if not (self.lower <= value <= self.upper):
            return False
        return self.kind == CONTINUOUS or value == round(value)

    def decode(self, value: float):
        if self.kind == CATEGORICAL:
            return self.levels[int(round(value))]
        if self.kind == INTEGER:
            return int(round(value))
        return float(value)


@dataclass(frozen=True)
class Evaluation:
    """Result of evaluating one point: objectives plus constraint violations."""

    objectives: tuple[float, ...]
    violations: tuple[float, ...] = ()
    theta: float = 0.0
    feasible: bool = True
    failed: bool = False

    @classmethod
    def from_raw(
        cls,
        objectives: Sequence[float],
        violations: Sequence[float] = (),
        epsilon: float = DEFAULT_EPSILON,
    ) -> Evaluation:
        viol = tuple(max(0.0, float(v)) for v in violations)
        theta = max(viol) if viol else 0.0
        return cls(
            objectives=tuple(float(f) for f in objectives),
            violations=viol,
            theta=theta,
            feasible=theta <= epsilon,
        )

    @classmethod
    def failure(cls, num_objectives: int) -> Evaluation:
        return cls(
            objectives=(math.nan,) * num_objectives,
            theta=math.inf,
            feasible=False,
            failed=True,
        )


@dataclass(frozen=True)
class LinearConstraint:
    """``coeffs . x <= rhs`` over the full variable vector (categoricals carry 0)."""

    coeffs: tuple[float, ...]
    rhs: float


@dataclass(frozen=True)
class NonlinearConstraint:
    """Black-box constraint ``fn(x, f) <= 0``; ``f`` is the objective vector."""

    fn: Callable[[np.ndarray, np.ndarray], float]
    label: str = ""
    uses_variables: bool = True

    def __call__(self, x: np.ndarray, f: np.ndarray) -> float:
        return float(self.fn(x, f))


@dataclass(frozen=True)
class ProblemSpec:
    variables: tuple[VariableSpec, ...]
    num_objectives: int
    objective_fn: Callable[[np.ndarray], Sequence[float]] | None = None
    linear_constraints: tuple[LinearConstraint, ...] = ()
    nonlinear_constraints: tuple[NonlinearConstraint, ...] = ()
    name: str = "problem"
    objective_names: tuple[str, ...] = ()
    # Reference front used by the CLI for metrics, when one is known analytically.
    reference_front: Callable[[int], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        variables = tuple(self.variables)
        object.__setattr__(self, "variables", variables)
        if not variables:
            raise ConfigError("problem needs at least one variable")
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise ConfigError("variable names must be unique")
        if self.num_objectives < 1:
            raise ConfigError("num_objectives must be >= 1")
        if not self.objective_names:
            object.__setattr__(
                self,
                "objective_names",
                tuple(f"f{i + 1}" for i in range(self.num_objectives)),
            )
        elif len(self.objective_names) != self.num_objectives:
            raise ConfigError("objective_names length must equal num_objectives")
        rows = []
        for row in self.linear_constraints:
            rows.append(_expand_linear_row(row, variables))
        object.__setattr__(self, "linear_constraints", tuple(rows))
        object.__setattr__(self, "nonlinear_constraints", tuple(self.nonlinear_constraints))

    @property
    def dim(self) -> int:
        return len(self.variables)

    @property
    def lower(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables], dtype=float)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(v.kind for v in self.variables)

    def indices(self, *kinds: str) -> np.ndarray:
        return np.array([i for i, v in enumerate(self.variables) if v.kind in kinds], dtype=int)

    @property
    def is_mixed(self) -> bool:
        kinds = set(self.kinds)
        return CONTINUOUS in kinds and bool(kinds & {INTEGER, CATEGORICAL})

    @property
    def num_constraints(self) -> int:
        return len(self.linear_constraints) + len(self.nonlinear_constraints)

    def check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise InputDomainError(f"expected {self.dim} values, got shape {x.shape}")
        for value, spec in zip(x, self.variables):
            if not spec.contains(float(value)):
                raise InputDomainError(f"{spec.name}={value!r} outside its domain")
        return x

    def objectives(self, x: np.ndarray) -> np.ndarray:
        if self.objective_fn is None:
            raise ConfigError(f"problem {self.name!r} has no objective function attached")
        f = np.asarray(self.objective_fn(x), dtype=float).reshape(-1)
        if f.shape != (self.num_objectives,):
            raise ConfigError(
                f"objective returned {f.size} values, expected {self.num_objectives}"
            )
        return f

    def evaluate(self, x: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> Evaluation:
        """Evaluate objectives and every constraint at ``x``."""
        x = np.asarray(x, dtype=float)
        f = self.objectives(x)
        violations = [float(np.dot(row.coeffs, x) - row.rhs) for row in self.linear_constraints]
        violations.extend(c(x, f) for c in self.nonlinear_constraints)
        return Evaluation.from_raw(f, violations, epsilon)

    def decode(self, x: np.ndarray) -> dict:
        return {v.name: v.decode(val) for v, val in zip(self.variables, x)}

    def with_constraints(
        self,
        linear: Sequence[LinearConstraint] = (),
        nonlinear: Sequence[NonlinearConstraint] = (),
    ) -> ProblemSpec:
        return replace(
            self,
            linear_constraints=self.linear_constraints + tuple(linear),
            nonlinear_constraints=self.nonlinear_constraints + tuple(nonlinear),
        )

    def with_directions(self, directions: Sequence[str]) -> ProblemSpec:
        """Negate every objective marked ``"max"`` so the engine can minimize it."""
        if len(directions) != self.num_objectives:
            raise ConfigError("need one direction per objective")
        signs = []
        for d in directions:
            if d not in ("min", "max"):
                raise ConfigError(f"direction must be 'min' or 'max', got {d!r}")
            signs.append(-1.0 if d == "max" else 1.0)
        if all(s == 1.0 for s in signs):
            return self
        sign = np.array(signs)
        inner = self.objective_fn

        def negated(x):
            return sign * np.asarray(inner(x), dtype=float)

        # Constraints keep seeing objective values in the caller's orientation.
        constraints = tuple(
            replace(c, fn=lambda x, f, _c=c: _c.fn(x, sign * np.asarray(f, dtype=float)))
            for c in self.nonlinear_constraints
        )
        return replace(self, objective_fn=negated, nonlinear_constraints=constraints)


def _expand_linear_row(row: LinearConstraint, variables: Sequence[VariableSpec]) -> LinearConstraint:
    coeffs = [float(c) for c in row.coeffs]
    metric = [i for i, v in enumerate(variables) if v.kind != CATEGORICAL]
    if len(coeffs) == len(variables):
        for i, v in enumerate(variables):
            if v.kind == CATEGORICAL and coeffs[i] != 0.0:
                raise ConfigError("linear constraints cannot involve categorical variables")
        full = coeffs
    elif len(coeffs) == len(metric):
        full = [0.0] * len(variables)
        for i, c in zip(metric, coeffs):
            full[i] = c
    else:
        raise ConfigError(
            f"linear constraint has {len(coeffs)} coefficients; expected {len(metric)}"
        )
    return LinearConstraint(tuple(full), float(row.rhs))


# ---------------------------------------------------------------------------
# ZDT benchmarks

def _zdt_check(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (ZDT_DIMENSION,):
        raise InputDomainError(f"ZDT problems take {ZDT_DIMENSION} values, got shape {x.shape}")
    if np.any(x < 0.0) or np.any(x > 1.0) or not np.all(np.isfinite(x)):
        raise InputDomainError("ZDT coordinates must lie in [0, 1]")
    return x


def _zdt_g(x: np.ndarray) -> float:
    n = x.size
    return 1.0 + 9.0 / (n - 1) * float(np.sum(x[1:]))


def zdt1(x) -> tuple[float, float]:
    x = _zdt_check(x)
    f1 = float(x[0])
    g = _zdt_g(x)
    return f1, g * (1.0 - math.sqrt(f1 / g))


def zdt3(x) -> tuple[float, float]:
    x = _zdt_check(x)
    f1 = float(x[0])
    g = _zdt_g(x)
    r = f1 / g
    return f1, g * (1.0 - math.sqrt(r) - r * math.sin(10.0 * math.pi * f1))


def _zdt1_curve(t: np.ndarray) -> np.ndarray:
    return np.column_stack([t, 1.0 - np.sqrt(t)])


def _zdt3_curve(t: np.ndarray) -> np.ndarray:
    return np.column_stack([t, 1.0 - np.sqrt(t) - t * np.sin(10.0 * np.pi * t)])


def nondominated_2d(points: np.ndarray) -> np.ndarray:
    """Nondominated subset of 2-objective points, sorted by f1."""
    order = np.lexsort((points[:, 1], points[:, 0]))
    pts = points[order]
    # Strict running minimum of f2 along increasing f1.
    prev_min = np.concatenate([[np.inf], np.minimum.accumulate(pts[:, 1])[:-1]])
    return pts[pts[:, 1] < prev_min]


def true_front(problem: str, count: int) -> np.ndarray:
    """Analytic Pareto front (g = 1) sampled with about ``count`` points."""
    if count < 2:
        raise ConfigError("count must be >= 2")
    if problem == "zdt1":
        return _zdt1_curve(np.linspace(0.0, 1.0, count))
    if problem == "zdt3":
        front = nondominated_2d(_zdt3_curve(np.linspace(0.0, 1.0, ZDT3_GRID_SIZE)))
        if count >= len(front):
            return front
        idx = np.unique(np.round(np.linspace(0, len(front) - 1, count)).astype(int))
        return front[idx]
    raise ConfigError(f"no analytic front for problem {problem!r}")


def zdt_problem(which: str) -> ProblemSpec:
    fn = {"zdt1": zdt1, "zdt3": zdt3}[which]
    variables = tuple(VariableSpec.continuous(f"x{i + 1}", 0.0, 1.0) for i in range(ZDT_DIMENSION))
    return ProblemSpec(
        variables=variables,
        num_objectives=2,
        objective_fn=fn,
        name=which,
        reference_front=lambda count: true_front(which, count),
    )


# ---------------------------------------------------------------------------
# Confusion-matrix metrics

@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            value = getattr(self, name)
            if value < 0 or value != int(value):
                raise ValueError(f"{name} must be a nonnegative integer")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ConfusionMetrics:
    acc: float
    mcc: float
    fpr: float
    fnr: float


def confusion_metrics(c: ConfusionCounts) -> ConfusionMetrics:
    """Accuracy, Matthews correlation, false positive and false negative rates.

    MCC is defined as 0 when any factor of its denominator is zero.
    """
    if c.total == 0:
        raise UndefinedMetricError("confusion counts are all zero")
    if c.fp + c.tn == 0:
        raise UndefinedMetricError("FPR undefined: no actual negatives")
    if c.fn + c.tp == 0:
        raise UndefinedMetricError("FNR undefined: no actual positives")
    tp, fp, fn, tn = (float(v) for v in (c.tp, c.fp, c.fn, c.tn))
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = 0.0 if denom == 0 else (tp * tn - fp * fn) / math.sqrt(denom)
    return ConfusionMetrics(
        acc=(tp + tn) / c.total,
        mcc=mcc,
        fpr=fp / (fp + tn),
        fnr=fn / (fn + tp),
    )


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def confusion_demo_problem(positives: int = 1000, negatives: int = 9000) -> ProblemSpec:
    """Synthetic classifier trade-off: minimize (1 - MCC, FPR).

    Scores of negatives follow N(0, 1) and positives N(mu, 1) with
    ``mu = 0.5 + 0.25 * capacity``.  The decision threshold is
    ``-2 + 6 * threshold``.  Counts are the rounded expected counts, so the
    problem is deterministic.
    """
    variables = (
        VariableSpec.continuous("threshold", 0.0, 1.0),
        VariableSpec.integer("capacity", 1, 10),
    )

    def objective(x):
        cut = -2.0 + 6.0 * float(x[0])
        mu = 0.5 + 0.25 * float(x[1])
        tp = int(round(positives * _normal_sf(cut - mu)))
        fp = int(round(negatives * _normal_sf(cut)))
        m = confusion_metrics(ConfusionCounts(tp, fp, positives - tp, negatives - fp))
        return 1.0 - m.mcc, m.fpr

    return ProblemSpec(
        variables=variables,
        num_objectives=2,
        objective_fn=objective,
        name="confusion-demo",
        objective_names=("one_minus_mcc", "fpr"),
    )


# ---------------------------------------------------------------------------
# Gradient boosted tree search space with a synthetic surrogate

# (name, kind, lower, upper, surrogate optimum in normalized units, curvature)
_GBT_SPACE = (
    ("num_trees", INTEGER, 100, 500, 0.6, 0.05),
    ("num_vars_to_try", INTEGER, 1, None, 0.5, 0.04),
    ("learning_rate", CONTINUOUS, 0.01, 1.0, 0.15, 0.20),
    ("sampling_rate", CONTINUOUS, 0.1, 1.0, 0.7, 0.05),
    ("lasso", CONTINUOUS, 0.0, 10.0, 0.1, 0.03),
    ("ridge", CONTINUOUS, 0.0, 10.0, 0.2, 0.03),
    ("num_bins", INTEGER, 20, 50, 0.5, 0.01),
    ("max_levels", INTEGER, 2, 7, 0.8, 0.06),
)
GBT_INTERACTION = 0.1


def table2_search_space(feature_count: int) -> tuple[VariableSpec, ...]:
    """Gradient boosted tree hyperparameter ranges; "all" means ``feature_count``."""
    if feature_count < 1:
        raise ConfigError("feature_count must be >= 1")
    specs = []
    for name, kind, lo, hi, _, _ in _GBT_SPACE:
        specs.append(VariableSpec(name, kind, lo, feature_count if hi is None else hi))
    return tuple(specs)


def table2_surrogate_problem(feature_count: int = 24) -> ProblemSpec:
    """Mixed-variable two-objective problem over the GBT space.

    Objective 1 (error surrogate) is ``0.1 + sum_j w_j (u_j - c_j)^2`` plus
    ``0.1 (u_lr - c_lr)(u_trees - c_trees)`` over normalized hyperparameters
    ``u``; its minimum 0.1 sits at ``u = c``.  Objective 2 (model size) is
    ``(num_trees / 500) * 2**(max_levels - 7)``.
    """
    variables = table2_search_space(feature_count)
    lower = np.array([v.lower for v in variables])
    span = np.array([max(v.span, 1.0) for v in variables])
    centre = np.array([row[4] for row in _GBT_SPACE])
    weight = np.array([row[5] for row in _GBT_SPACE])

    def objective(x):
        x = np.asarray(x, dtype=float)
        d = (x - lower) / span - centre
        error = 0.1 + float(np.dot(weight, d * d)) + GBT_INTERACTION * d[2] * d[0]
        size = (x[0] / 500.0) * 2.0 ** (x[7] - 7.0)
        return error, size

    return ProblemSpec(
        variables=variables,
        num_objectives=2,
        objective_fn=objective,
        name="table2-surrogate",
        objective_names=("error", "model_size"),
    )


BUILTIN_PROBLEMS = ("zdt1", "zdt3", "table2-surrogate", "confusion-demo")


def builtin_problem(tag: str) -> ProblemSpec:
    if tag in ("zdt1", "zdt3"):
        return zdt_problem(tag)
    if tag == "table2-surrogate":
        return table2_surrogate_problem()
    if tag == "confusion-demo":
        return confusion_demo_problem()
    raise ConfigError(f"unknown builtin problem {tag!r}; choose from {', '.join(BUILTIN_PROBLEMS)}")
