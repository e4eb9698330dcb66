"""Search manager: runs the hybrid LHS + GA + GSS loop over a shared cache and archive."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Hashable, Protocol, Sequence

import numpy as np

from .cache import EvaluationCache, PointKey
from .constraints import LinearSystem, PenaltyConfig, check_linear_feasibility, merit_objectives, project_to_feasible
from .dominance import ParetoArchive
from .errors import ConfigError, NoFeasibleFrontError
from .ga import GaConfig, Generation, growth_allotment, growth_candidates, produce_children, replace_population
from .gss import CenterState, GssConfig, gss_refine_single, poll_set, refresh_centers, update_centers
from .metrics import DEFAULT_P, FrontSample, all_metrics, averaged_hausdorff
from .problem import DEFAULT_EPSILON, Evaluation, ProblemSpec
from .sampling import LhsPlan, latin_hypercube

log = logging.getLogger(__name__)

LHS, GA, GSS, GROWTH = "lhs", "ga", "gss", "growth"
# With uncharged failures, total evaluations (failed included) stop at this multiple of the budget.
UNCHARGED_CAP = 2


@dataclass(frozen=True)
class RunConfig:
    budget: int = 25_000
    population_size: int = 50
    num_centers: int = 10
    initial_step: float = 1.0
    min_step: float = 1e-6
    alpha: float = 0.01
    epsilon: float = DEFAULT_EPSILON
    rho: float = 10.0
    seed: int = 0
    max_concurrent: int = 1
    stall_tolerance: float = 1e-4
    stall_window: int = 10  # 0 disables stall termination
    charge_failed: bool = True  # failed evaluations count against the budget
    metric_p: float = DEFAULT_P
    crossover_rate: float = 0.9
    mutation_rate: float | None = None
    growth_fraction: float = 0.05
    growth_per_iteration: int = 2

    def __post_init__(self) -> None:
        if not 1 <= self.num_centers < self.population_size <= self.budget:
            raise ConfigError("need 1 <= num_centers < population_size <= budget")
        for name in ("initial_step", "min_step", "epsilon", "rho", "stall_tolerance"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_concurrent < 1:
            raise ConfigError("max_concurrent must be >= 1")
        if self.stall_window < 0:
            raise ConfigError("stall_window must be >= 0")
        self.ga_config()
        self.gss_config()

    def ga_config(self) -> GaConfig:
        return GaConfig(
            population_size=self.population_size,
            crossover_rate=self.crossover_rate,
            mutation_rate=self.mutation_rate,
            growth_fraction=self.growth_fraction,
            growth_per_iteration=self.growth_per_iteration,
            seed=self.seed,
        )

    def gss_config(self) -> GssConfig:
        return GssConfig(self.initial_step, self.min_step, self.alpha, self.num_centers)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LogRecord:
    iteration: int
    solver: str
    point: np.ndarray
    evaluation: Evaluation
    cache_hit: bool


@dataclass
class BatchItem:
    solver: str
    point: np.ndarray
    evaluation: Evaluation
    key: Hashable
    cache_hit: bool


@dataclass
class RunResult:
    archive: ParetoArchive
    log: list[LogRecord]
    counters: dict
    termination: str
    metrics: dict | None = None
    rho: float = math.nan
    config: RunConfig | None = None

    @property
    def unique_evaluations(self) -> int:
        return self.counters["unique_evaluations"]


@dataclass
class ExchangeContext:
    archive: ParetoArchive
    entered: set
    iteration: int


class Solver(Protocol):
    name: str

    def receive(self, batch: Sequence[BatchItem], ctx: ExchangeContext) -> None: ...

    def propose(self, ctx: ExchangeContext) -> list[np.ndarray]: ...


class GaSolver:
    name = GA

    def __init__(self, problem: ProblemSpec, cfg: GaConfig, gen: Generation, rng, key_fn, epsilon):
        self.problem = problem
        self.cfg = cfg
        self.gen = gen
        self.rng = rng
        self.key_fn = key_fn
        self.epsilon = epsilon
        self.gen.rank(epsilon)

    def receive(self, batch, ctx) -> None:
        evaluated = [(b.point, b.evaluation) for b in batch]
        if evaluated:
            self.gen = replace_population(
                self.gen, evaluated, self.cfg.population_size, self.key_fn, self.epsilon
            )

    def propose(self, ctx) -> list[np.ndarray]:
        return produce_children(self.gen, self.cfg, self.problem, self.rng, self.epsilon)


class GssSolver:
    name = GSS

    def __init__(self, cfg: GssConfig, sys: LinearSystem, key_fn):
        self.cfg = cfg
        self.sys = sys
        self.key_fn = key_fn
        self.states: list[CenterState] = []
        self.retired: set = set()
        self._poll_keys: list[list] = []

    def receive(self, batch, ctx) -> None:
        if self.states:
            self.states = update_centers(
                self.states, self._poll_keys, ctx.entered, ctx.archive, self.cfg, self.retired
            )
        self._poll_keys = []

    def propose(self, ctx) -> list[np.ndarray]:
        self.states = refresh_centers(self.states, ctx.archive, self.cfg, self.retired)
        points: list[np.ndarray] = []
        self._poll_keys = []
        for state in self.states:
            polls = poll_set(state.center, state.step, self.sys, self.key_fn)
            self._poll_keys.append([self.key_fn(p) for p in polls])
            points.extend(polls)
        return points


def exchange_points(
    solvers: Sequence[Solver], batch: Sequence[BatchItem], ctx: ExchangeContext
) -> list[tuple[str, np.ndarray]]:
    """Hand the whole evaluated batch to every solver and gather their proposals."""
    for solver in solvers:
        solver.receive(batch, ctx)
    proposals: list[tuple[str, np.ndarray]] = []
    for solver in solvers:
        proposals.extend((solver.name, p) for p in solver.propose(ctx))
    return proposals


class _Engine:
    def __init__(self, problem: ProblemSpec, cfg: RunConfig, executor):
        self.problem = problem
        self.cfg = cfg
        self.executor = executor
        self.key_fn = PointKey(problem.variables)
        self.cache = EvaluationCache(self.key_fn)
        self.sys = LinearSystem.from_problem(problem)
        self.log: list[LogRecord] = []
        self.cache_hits = 0
        self.failed = 0
        self.skipped = 0
        self.errors: list[str] = []

    def _evaluate_one(self, x: np.ndarray) -> Evaluation:
        try:
            return self.problem.evaluate(x, self.cfg.epsilon)
        except Exception as exc:  # black box failures are recorded, never raised
            self.errors.append(f"{type(exc).__name__}: {exc}")
            return Evaluation.failure(self.problem.num_objectives)

    @property
    def charged(self) -> int:
        """Unique evaluations counted against the budget."""
        if self.cfg.charge_failed:
            return self.cache.unique_count
        return self.cache.unique_count - self.failed

    @property
    def remaining(self) -> int:
        return self.cfg.budget - self.charged

    def evaluate(self, proposals: Sequence[tuple[str, np.ndarray]], iteration: int) -> list[BatchItem]:
        """Answer cached points, project and evaluate the rest within budget."""
        items: list[BatchItem | None] = []
        pending: dict = {}
        order: list = []
        for solver, raw in proposals:
            key = self.key_fn(raw)
            ev = self.cache.lookup_key(key)
            point = np.asarray(raw, dtype=float)
            if ev is None:
                point = project_to_feasible(point, self.sys)
                key = self.key_fn(point)
                ev = self.cache.lookup_key(key)
            if ev is not None:
                items.append(BatchItem(solver, point, ev, key, True))
            elif key in pending:
                items.append(BatchItem(solver, point, None, key, True))
            elif len(order) < self.remaining:
                pending[key] = len(items)
                order.append(key)
                items.append(BatchItem(solver, point, None, key, False))
            else:
                self.skipped += 1

        points = [items[pending[k]].point for k in order]
        if self.executor is None or len(points) <= 1:
            results = [self._evaluate_one(p) for p in points]
        else:
            results = list(self.executor.map(self._evaluate_one, points))
        fresh = dict(zip(order, results))

        out: list[BatchItem] = []
        for item in items:
            if item.evaluation is None:
                item.evaluation = fresh[item.key]
            if item.cache_hit:
                self.cache_hits += 1
            else:
                self.cache.insert(item.point, item.evaluation, item.key)
                if item.evaluation.failed:
                    self.failed += 1
            self.log.append(LogRecord(iteration, item.solver, item.point, item.evaluation, item.cache_hit))
            out.append(item)
        return out


def _fixed_rho(cfg: RunConfig, batch: Sequence[BatchItem]) -> float:
    values = [abs(f) for b in batch if not b.evaluation.failed for f in b.evaluation.objectives]
    scale = float(np.mean(values)) if values else 0.0
    return cfg.rho * scale if scale > 0 and math.isfinite(scale) else cfg.rho


def _feasible_objectives(archive: ParetoArchive) -> np.ndarray | None:
    entries = archive.feasible_entries()
    if not entries:
        return None
    return np.array([e.eval.objectives for e in entries], dtype=float)


def run_optimization(
    problem: ProblemSpec, cfg: RunConfig, reference: np.ndarray | None = None
) -> RunResult:
    """Run the hybrid search until the budget is spent or progress stalls."""
    sys = LinearSystem.from_problem(problem)
    check_linear_feasibility(sys)
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    ga_rng = np.random.default_rng(seeds[1])
    lhs_seed = int(seeds[0].generate_state(1, dtype=np.uint64)[0])

    executor = ThreadPoolExecutor(cfg.max_concurrent) if cfg.max_concurrent > 1 else None
    try:
        return _run(problem, cfg, reference, executor, ga_rng, lhs_seed)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)


def _run(problem, cfg, reference, executor, ga_rng, lhs_seed) -> RunResult:
    engine = _Engine(problem, cfg, executor)
    archive = ParetoArchive(cfg.epsilon, engine.key_fn)

    initial = latin_hypercube(LhsPlan(cfg.population_size, problem.dim, lhs_seed), problem.variables)
    batch = engine.evaluate([(LHS, p) for p in initial], 0)
    fresh = [b for b in batch if not b.cache_hit]
    report = archive.insert_batch([(b.point, b.evaluation) for b in fresh], [b.key for b in fresh])
    entered = {fresh[i].key for i in report.accepted}
    rho = _fixed_rho(cfg, batch)
    penalty = PenaltyConfig(rho, cfg.epsilon)

    ok = [b for b in batch if not b.evaluation.failed]
    gen = Generation([b.point for b in ok], [b.evaluation for b in ok], 0)
    if len(gen) < 2:
        gen = Generation([b.point for b in batch], [b.evaluation for b in batch], 0)
    ga = GaSolver(problem, cfg.ga_config(), gen, ga_rng, engine.key_fn, cfg.epsilon)
    gss = GssSolver(cfg.gss_config(), engine.sys, engine.key_fn)
    solvers = [ga, gss]

    growth_total = int(cfg.growth_fraction * cfg.budget) if problem.is_mixed else 0
    growth_used = 0
    allotment = growth_allotment(problem)

    iteration = 0
    termination = "budget"
    stall_count = 0
    snapshot = _feasible_objectives(archive)
    while True:
        if engine.remaining <= 0:
            termination = "budget"
            break
        if engine.cache.unique_count >= UNCHARGED_CAP * cfg.budget:
            termination = "failure cap"
            break
        iteration += 1
        ctx = ExchangeContext(archive, entered, iteration)
        proposals = exchange_points(solvers, batch, ctx)
        if not proposals:
            termination = "stalled: no proposals"
            break
        batch = engine.evaluate(proposals, iteration)
        fresh = [b for b in batch if not b.cache_hit]
        report = archive.insert_batch([(b.point, b.evaluation) for b in fresh], [b.key for b in fresh])
        entered = {fresh[i].key for i in report.accepted}

        budget = min(growth_total - growth_used, allotment * cfg.growth_per_iteration, engine.remaining)
        if budget > 0:
            # The GA sees the main batch before choosing growth candidates.
            ga.receive(batch, ctx)
            grown = _growth_step(engine, ga, archive, penalty, budget, iteration)
            growth_used += len([b for b in grown if not b.cache_hit])
            if grown:
                ga.receive(grown, ctx)
            batch = batch + grown
            fresh = [b for b in grown if not b.cache_hit]
            report = archive.insert_batch([(b.point, b.evaluation) for b in fresh], [b.key for b in fresh])
            entered |= {fresh[i].key for i in report.accepted}

        if cfg.stall_window:
            current = _feasible_objectives(archive)
            if current is not None and snapshot is not None:
                moved = averaged_hausdorff(snapshot, current, cfg.metric_p)
                stall_count = stall_count + 1 if moved < cfg.stall_tolerance else 0
            else:
                # No feasible front to compare: progress means something entered the archive.
                stall_count = 0 if entered else stall_count + 1
            snapshot = current
            if stall_count >= cfg.stall_window:
                termination = "stalled: archive unchanged"
                break

    counters = {
        "unique_evaluations": engine.cache.unique_count,
        "charged_evaluations": engine.charged,
        "cache_hits": engine.cache_hits,
        "failed_evaluations": engine.failed,
        "skipped_over_budget": engine.skipped,
        "iterations": iteration,
        "archive_size": len(archive),
        "feasible_archive_size": len(archive.feasible_entries()),
        "growth_evaluations": growth_used,
    }
    metrics = None
    if reference is not None:
        try:
            metrics = all_metrics(FrontSample.from_archive(archive), reference, cfg.metric_p)
        except NoFeasibleFrontError as exc:
            metrics = {"error": str(exc), "p": cfg.metric_p}
    log.info("run finished: %s after %d iterations", termination, iteration)
    return RunResult(archive, engine.log, counters, termination, metrics, rho, cfg)


def _growth_step(engine: _Engine, ga: GaSolver, archive, penalty, budget: int, iteration: int):
    """Refine the continuous block of the best population members."""
    problem = engine.problem
    cands = growth_candidates(ga.gen, budget, problem, epsilon=engine.cfg.epsilon)
    if not cands:
        return []
    obj = archive.objective_matrix()
    ideal = obj.min(axis=0) if len(obj) else np.zeros(problem.num_objectives)
    grown: list[BatchItem] = []

    def scalar(ev: Evaluation) -> float:
        if ev.failed:
            return math.inf
        merit = merit_objectives(ev.objectives, ev.violations, penalty)
        return float(np.max(merit - ideal))

    allotment = growth_allotment(problem)
    for cand in cands:
        if engine.remaining <= 0:
            break

        def merit(points):
            items = engine.evaluate([(GROWTH, p) for p in points], iteration)
            grown.extend(items)
            by_key = {b.key: b.evaluation for b in items}
            return [scalar(by_key.get(engine.key_fn(p), Evaluation.failure(problem.num_objectives)))
                    for p in points]

        gss_refine_single(
            cand.point,
            cand.free,
            min(allotment, engine.remaining),
            merit,
            engine.sys,
            engine.cfg.gss_config(),
            start_value=scalar(cand.evaluation),
            key_fn=engine.key_fn,
        )
    return grown
