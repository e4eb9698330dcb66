"""Genetic algorithm over mixed variables, with the growth-step hand-off."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .dominance import crowding_distances, dominance_matrix, nondominated_ranks
from .errors import ConfigError
from .problem import CATEGORICAL, CONTINUOUS, DEFAULT_EPSILON, INTEGER, Evaluation, ProblemSpec


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None means 1 / dimension
    growth_fraction: float = 0.05
    growth_per_iteration: int = 2
    sbx_eta: float = 10.0
    mutation_eta: float = 20.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ConfigError("crossover_rate must lie in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must lie in [0, 1]")
        if not 0.0 <= self.growth_fraction <= 0.5:
            raise ConfigError("growth_fraction must lie in [0, 0.5]")

    def mutation_probability(self, dim: int) -> float:
        return 1.0 / dim if self.mutation_rate is None else self.mutation_rate


@dataclass
class Generation:
    points: list[np.ndarray]
    evals: list[Evaluation]
    index: int = 0
    ranks: np.ndarray = field(default=None, repr=False)
    crowding: np.ndarray = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.points)

    def objective_matrix(self) -> np.ndarray:
        return np.array([e.objectives for e in self.evals], dtype=float)

    def theta_vector(self) -> np.ndarray:
        return np.array([e.theta for e in self.evals], dtype=float)

    def rank(self, epsilon: float = DEFAULT_EPSILON) -> None:
        """Fill ``ranks`` and per-front ``crowding``."""
        obj, theta = self.objective_matrix(), self.theta_vector()
        self.ranks, self.crowding = rank_and_crowd(obj, theta, epsilon)


def rank_and_crowd(obj: np.ndarray, theta: np.ndarray, epsilon: float):
    ranks = nondominated_ranks(obj, theta, epsilon)
    crowd = np.zeros(len(obj))
    for r in np.unique(ranks):
        idx = np.flatnonzero(ranks == r)
        crowd[idx] = crowding_distances(obj[idx])
    return ranks, crowd


def _tournament(gen: Generation, dom: np.ndarray, rng: np.random.Generator) -> int:
    i, j = (int(v) for v in rng.integers(len(gen), size=2))
    if dom[i, j]:
        return i
    if dom[j, i]:
        return j
    if gen.crowding[i] != gen.crowding[j]:
        return i if gen.crowding[i] > gen.crowding[j] else j
    return i if gen.evals[i].objectives <= gen.evals[j].objectives else j


def _sbx(y1: float, y2: float, lo: float, hi: float, eta: float, rng) -> tuple[float, float]:
    """Bounded simulated binary crossover of one coordinate."""
    if abs(y1 - y2) <= 1e-14 or hi <= lo:
        return y1, y2
    a, b = min(y1, y2), max(y1, y2)
    r = rng.random()
    children = []
    for beta in (1.0 + 2.0 * (a - lo) / (b - a), 1.0 + 2.0 * (hi - b) / (b - a)):
        alpha = 2.0 - beta ** -(eta + 1.0)
        if r <= 1.0 / alpha:
            betaq = (r * alpha) ** (1.0 / (eta + 1.0))
        else:
            betaq = (1.0 / (2.0 - r * alpha)) ** (1.0 / (eta + 1.0))
        children.append(betaq)
    c1 = 0.5 * ((a + b) - children[0] * (b - a))
    c2 = 0.5 * ((a + b) + children[1] * (b - a))
    c1, c2 = min(max(c1, lo), hi), min(max(c2, lo), hi)
    if rng.random() < 0.5:
        c1, c2 = c2, c1
    return c1, c2


def _polynomial_mutation(y: float, lo: float, hi: float, eta: float, rng) -> float:
    if hi <= lo:
        return y
    d1, d2 = (y - lo) / (hi - lo), (hi - y) / (hi - lo)
    r = rng.random()
    power = 1.0 / (eta + 1.0)
    if r < 0.5:
        val = 2.0 * r + (1.0 - 2.0 * r) * (1.0 - d1) ** (eta + 1.0)
        dq = val**power - 1.0
    else:
        val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * (1.0 - d2) ** (eta + 1.0)
        dq = 1.0 - val**power
    return min(max(y + dq * (hi - lo), lo), hi)


def crossover(p1: np.ndarray, p2: np.ndarray, problem: ProblemSpec, cfg: GaConfig, rng):
    """SBX on continuous coordinates, single-point exchange on the discrete block."""
    c1, c2 = p1.copy(), p2.copy()
    for i in problem.indices(CONTINUOUS):
        if rng.random() < 0.5:
            v = problem.variables[i]
            c1[i], c2[i] = _sbx(p1[i], p2[i], v.lower, v.upper, cfg.sbx_eta, rng)
    discrete = problem.indices(INTEGER, CATEGORICAL)
    if discrete.size >= 2:
        cut = int(rng.integers(1, discrete.size))
        tail = discrete[cut:]
        c1[tail], c2[tail] = p2[tail], p1[tail]
    elif discrete.size == 1 and rng.random() < 0.5:
        j = discrete[0]
        c1[j], c2[j] = p2[j], p1[j]
    return c1, c2


def mutate(x: np.ndarray, problem: ProblemSpec, rate: float, cfg: GaConfig, rng) -> np.ndarray:
    y = x.copy()
    for i, v in enumerate(problem.variables):
        if rng.random() >= rate:
            continue
        if v.kind == CONTINUOUS:
            y[i] = _polynomial_mutation(y[i], v.lower, v.upper, cfg.mutation_eta, rng)
        elif v.kind == INTEGER:
            if v.upper > v.lower:
                step = 1.0 if rng.random() < 0.5 else -1.0
                if not v.lower <= y[i] + step <= v.upper:
                    step = -step
                y[i] += step
        elif len(v.levels) > 1:
            current = int(round(y[i]))
            others = [k for k in range(len(v.levels)) if k != current]
            y[i] = float(others[int(rng.integers(len(others)))])
    return y


def produce_children(
    gen: Generation,
    cfg: GaConfig,
    problem: ProblemSpec,
    rng: np.random.Generator,
    epsilon: float = DEFAULT_EPSILON,
) -> list[np.ndarray]:
    """``population_size`` children from binary tournaments, crossover and mutation."""
    if gen.ranks is None:
        gen.rank(epsilon)
    dom = dominance_matrix(
        gen.objective_matrix(), gen.theta_vector(), gen.objective_matrix(), gen.theta_vector(), epsilon
    )
    lower, upper = problem.lower, problem.upper
    rate = cfg.mutation_probability(problem.dim)
    children: list[np.ndarray] = []
    while len(children) < cfg.population_size:
        a = gen.points[_tournament(gen, dom, rng)]
        b = gen.points[_tournament(gen, dom, rng)]
        if rng.random() < cfg.crossover_rate:
            c1, c2 = crossover(a, b, problem, cfg, rng)
        else:
            c1, c2 = a.copy(), b.copy()
        for c in (c1, c2):
            c = np.clip(mutate(c, problem, rate, cfg, rng), lower, upper)
            children.append(c)
    return children[: cfg.population_size]


def replace_population(
    gen: Generation,
    evaluated: Sequence[tuple[np.ndarray, Evaluation]],
    size: int,
    key_fn: Callable[[np.ndarray], Hashable],
    epsilon: float = DEFAULT_EPSILON,
) -> Generation:
    """Elitist truncation of parents plus ``evaluated`` to ``size`` members.

    Members are ordered by nondominated rank, then crowding distance within
    the rank (descending), then lexicographic objectives.
    """
    pool_pts: list[np.ndarray] = []
    pool_evs: list[Evaluation] = []
    pool_keys: list = []
    seen: set = set()
    for p, ev in list(zip(gen.points, gen.evals)) + list(evaluated):
        if ev.failed:
            continue
        k = key_fn(p)
        if k in seen:
            continue
        seen.add(k)
        pool_pts.append(np.asarray(p, dtype=float))
        pool_evs.append(ev)
        pool_keys.append(k)
    if not pool_pts:
        return gen  # nothing usable yet: keep breeding from the current members
    obj = np.array([e.objectives for e in pool_evs], dtype=float)
    theta = np.array([e.theta for e in pool_evs], dtype=float)
    ranks, crowd = rank_and_crowd(obj, theta, epsilon)
    order = sorted(
        range(len(pool_pts)),
        key=lambda i: (ranks[i], -crowd[i], pool_evs[i].objectives, pool_keys[i]),
    )[:size]
    # Crowding is recomputed inside the surviving population for later tournaments.
    new = Generation([pool_pts[i] for i in order], [pool_evs[i] for i in order], gen.index + 1)
    new.rank(epsilon)
    return new


@dataclass(frozen=True)
class GrowthCandidate:
    point: np.ndarray
    evaluation: Evaluation
    free: np.ndarray  # continuous coordinates refined; the rest stay frozen


def growth_allotment(problem: ProblemSpec) -> int:
    """Evaluations per growth candidate: one compass poll of the continuous block."""
    return 2 * len(problem.indices(CONTINUOUS))


def growth_candidates(
    gen: Generation,
    remaining_budget: int,
    problem: ProblemSpec,
    allotment: int | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> list[GrowthCandidate]:
    """Best-ranked members to refine over their continuous coordinates."""
    if not problem.is_mixed or remaining_budget <= 0:
        return []
    allotment = growth_allotment(problem) if allotment is None else allotment
    count = min(remaining_budget // max(allotment, 1), len(gen))
    if count <= 0:
        return []
    if gen.ranks is None:
        gen.rank(epsilon)
    order = sorted(
        range(len(gen)),
        key=lambda i: (gen.ranks[i], -gen.crowding[i], gen.evals[i].objectives, tuple(gen.points[i])),
    )
    free = problem.indices(CONTINUOUS)
    out: list[GrowthCandidate] = []
    seen: set = set()
    for i in order:
        key = tuple(gen.points[i])
        if key in seen:
            continue
        seen.add(key)
        out.append(GrowthCandidate(gen.points[i].copy(), gen.evals[i], free))
        if len(out) == count:
            break
    return out
