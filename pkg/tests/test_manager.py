import numpy as np
import pytest

from pareto_tune.dominance import dominates
from pareto_tune.errors import ConfigError
from pareto_tune.manager import (
    BatchItem,
    ExchangeContext,
    RunConfig,
    _Engine,
    exchange_points,
    run_optimization,
)
from pareto_tune.problem import (
    LinearConstraint,
    NonlinearConstraint,
    ProblemSpec,
    VariableSpec,
    table2_surrogate_problem,
    zdt_problem,
)


def small_problem(**kw):
    variables = tuple(VariableSpec.continuous(f"x{i}", 0, 1) for i in range(4))

    def objective(x):
        g = 1 + x[1:].sum()
        return x[0], g * (1 - np.sqrt(x[0] / g))

    return ProblemSpec(variables, 2, objective, **kw)


def assert_archive_nondominated(result):
    entries = list(result.archive)
    for a in entries:
        for b in entries:
            if a is not b:
                assert not dominates(a.eval, b.eval)


def check_log_invariants(result, cfg):
    fresh = [r for r in result.log if not r.cache_hit]
    assert len(fresh) == result.unique_evaluations <= cfg.budget + cfg.max_concurrent - 1
    keyfn = result.archive.key_fn
    keys = [keyfn(r.point) for r in fresh]
    assert len(set(keys)) == len(keys)  # each evaluation logged exactly once
    logged = set(keys)
    assert all(e.key in logged for e in result.archive)
    # no iteration starts once the budget is spent
    count = 0
    by_iter: dict = {}
    for r in fresh:
        by_iter.setdefault(r.iteration, []).append(r)
    for it in sorted(by_iter):
        assert count < cfg.budget
        count += len(by_iter[it])


class TestRunConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            RunConfig(num_centers=50, population_size=50)
        with pytest.raises(ConfigError):
            RunConfig(budget=10, population_size=50)
        with pytest.raises(ConfigError):
            RunConfig(epsilon=0)
        with pytest.raises(ConfigError):
            RunConfig(max_concurrent=0)
        with pytest.raises(ConfigError):
            RunConfig(alpha=1.5)

    def test_defaults(self):
        cfg = RunConfig()
        assert (cfg.population_size, cfg.num_centers, cfg.budget) == (50, 10, 25_000)


class TestRun:
    def test_budget_equals_population(self):
        cfg = RunConfig(budget=50, population_size=50, num_centers=5, seed=1)
        res = run_optimization(small_problem(), cfg)
        assert res.counters["iterations"] == 0
        assert res.unique_evaluations == 50
        assert {r.solver for r in res.log} == {"lhs"}

    @pytest.mark.parametrize("budget", [51, 137, 600, 1001])
    def test_budget_discipline(self, budget):
        cfg = RunConfig(budget=budget, population_size=20, num_centers=3, seed=budget, max_concurrent=3)
        res = run_optimization(small_problem(), cfg)
        check_log_invariants(res, cfg)
        assert res.unique_evaluations <= budget
        assert_archive_nondominated(res)

    def test_determinism_across_concurrency(self):
        a = run_optimization(small_problem(), RunConfig(budget=800, population_size=20, num_centers=4, seed=3))
        b = run_optimization(
            small_problem(), RunConfig(budget=800, population_size=20, num_centers=4, seed=3, max_concurrent=8)
        )
        assert [e.key for e in a.archive] == [e.key for e in b.archive]
        assert [(r.iteration, r.solver, tuple(r.point)) for r in a.log] == [
            (r.iteration, r.solver, tuple(r.point)) for r in b.log
        ]

    def test_failures_charged_and_excluded(self):
        def objective(x):
            if x[0] > 0.7:
                raise RuntimeError("simulated crash")
            return x[0], 1 - x[0] + x[1]

        p = ProblemSpec(tuple(VariableSpec.continuous(f"x{i}", 0, 1) for i in range(2)), 2, objective)
        res = run_optimization(p, RunConfig(budget=300, population_size=20, num_centers=3, seed=2))
        assert res.counters["failed_evaluations"] > 0
        assert res.unique_evaluations <= 300
        assert all(not e.eval.failed and e.point[0] <= 0.7 for e in res.archive)

    def test_linear_constraints_always_hold(self):
        row = LinearConstraint((1.0, 1.0, 0.0, 0.0), 0.8)
        res = run_optimization(
            small_problem(linear_constraints=(row,)), RunConfig(budget=600, population_size=20, num_centers=3)
        )
        for r in res.log:
            assert r.point[0] + r.point[1] <= 0.8 + 1e-9
        assert all(e.eval.feasible for e in res.archive)

    def test_nonlinear_constraint_focuses_archive(self):
        p = small_problem().with_constraints(nonlinear=[NonlinearConstraint(lambda x, f: 0.5 - f[0])])
        res = run_optimization(p, RunConfig(budget=1500, population_size=20, num_centers=3, seed=4))
        feasible = res.archive.feasible_entries()
        assert feasible and all(e.objectives[0] >= 0.5 - 1e-6 for e in feasible)
        assert_archive_nondominated(res)

    def test_mixed_problem_uses_growth(self):
        p = table2_surrogate_problem()
        cfg = RunConfig(budget=1500, population_size=20, num_centers=3, seed=5)
        res = run_optimization(p, cfg)
        assert 0 < res.counters["growth_evaluations"] <= int(cfg.growth_fraction * cfg.budget)
        check_log_invariants(res, cfg)
        for r in res.log:
            n = r.point[p.indices("integer")]
            assert np.all(n == np.round(n))

    def test_stall_termination(self):
        variables = (VariableSpec.integer("n", 0, 2), VariableSpec.integer("m", 0, 2))
        p = ProblemSpec(variables, 2, lambda x: (x[0], 2 - x[0] + x[1]))
        res = run_optimization(p, RunConfig(budget=10_000, population_size=9, num_centers=2, stall_window=3))
        assert res.termination.startswith("stalled")
        assert res.unique_evaluations <= 9

    def test_reference_metrics(self):
        ref = np.column_stack([np.linspace(0, 1, 50), 1 - np.sqrt(np.linspace(0, 1, 50))])
        res = run_optimization(small_problem(), RunConfig(budget=400, population_size=20, num_centers=3), ref)
        assert set(res.metrics) == {"gd", "igd", "avg_hausdorff", "p"}


class TestEngine:
    def _engine(self, budget=100):
        cfg = RunConfig(budget=budget, population_size=3, num_centers=2)
        return _Engine(small_problem(), cfg, None)

    def test_duplicates_are_budget_neutral(self):
        eng = self._engine()
        x = np.full(4, 0.25)
        eng.evaluate([("ga", x)], 1)
        before = eng.cache.unique_count
        items = eng.evaluate([("ga", x.copy()), ("gss", x.copy())], 2)
        assert eng.cache.unique_count == before
        assert all(i.cache_hit for i in items)
        assert eng.cache_hits == 2

    def test_overlapping_proposals_evaluated_once(self):
        calls = []
        eng = self._engine()
        object.__setattr__(eng.problem, "objective_fn", lambda x: (calls.append(1), (x[0], x[1]))[1])
        x = np.full(4, 0.5)
        items = eng.evaluate([("ga", x), ("gss", x.copy())], 1)
        assert len(calls) == 1
        assert items[0].evaluation is items[1].evaluation
        assert [i.cache_hit for i in items] == [False, True]

    def test_strict_truncation(self):
        eng = self._engine(budget=5)
        pts = [("ga", np.full(4, v)) for v in np.linspace(0, 1, 9)]
        eng.evaluate(pts, 1)
        assert eng.cache.unique_count == 5 and eng.skipped == 4

    def test_out_of_bounds_proposals_projected(self):
        eng = self._engine()
        item = eng.evaluate([("ga", np.array([1.5, -0.2, 0.5, 0.5]))], 1)[0]
        assert item.point.tolist() == [1.0, 0.0, 0.5, 0.5]


class TestExchange:
    def test_every_solver_sees_full_batch(self):
        seen = {}

        class Spy:
            def __init__(self, name, out):
                self.name, self.out = name, out

            def receive(self, batch, ctx):
                seen[self.name] = [b.solver for b in batch]

            def propose(self, ctx):
                return self.out

        batch = [BatchItem("ga", np.zeros(1), None, (0,), False), BatchItem("gss", np.ones(1), None, (1,), False)]
        props = exchange_points([Spy("ga", [np.zeros(1)]), Spy("gss", [])], batch, ExchangeContext(None, set(), 1))
        assert seen == {"ga": ["ga", "gss"], "gss": ["ga", "gss"]}
        assert [p[0] for p in props] == ["ga"]

    def test_zero_proposals_stop_the_run(self, monkeypatch):
        import pareto_tune.manager as m

        monkeypatch.setattr(m, "exchange_points", lambda solvers, batch, ctx: [])
        res = m.run_optimization(small_problem(), RunConfig(budget=500, population_size=10, num_centers=2))
        assert res.termination == "stalled: no proposals"
        assert res.counters["iterations"] == 1


@pytest.mark.slow
def test_zdt1_short_run_nondominated():
    res = run_optimization(zdt_problem("zdt1"), RunConfig(budget=3000, seed=9))
    assert_archive_nondominated(res)
    check_log_invariants(res, res.config)


def test_uncharged_failures_extend_the_run():
    def objective(x):
        if x[0] > 0.5:
            raise RuntimeError("boom")
        return x[0], 1 - x[0]

    p = ProblemSpec((VariableSpec.continuous("a", 0, 1), VariableSpec.continuous("b", 0, 1)), 2, objective)
    res = run_optimization(p, RunConfig(budget=200, population_size=20, num_centers=2, charge_failed=False))
    c = res.counters
    assert c["charged_evaluations"] == c["unique_evaluations"] - c["failed_evaluations"] <= 200


def test_all_failures_uncharged_terminates():
    def objective(x):
        raise RuntimeError("always")

    p = ProblemSpec((VariableSpec.continuous("a", 0, 1),), 2, objective)
    res = run_optimization(p, RunConfig(budget=100, population_size=10, num_centers=2, charge_failed=False))
    assert res.counters["failed_evaluations"] == res.unique_evaluations <= 200
    assert len(res.archive) == 0
