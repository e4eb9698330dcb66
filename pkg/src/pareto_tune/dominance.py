"""Constrained dominance, nondominated sorting, crowding and the Pareto archive."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .problem import DEFAULT_EPSILON, Evaluation


def dominates(a: Evaluation, b: Evaluation, epsilon: float = DEFAULT_EPSILON) -> bool:
    """True when ``a`` dominates ``b`` (minimization, feasibility first)."""
    if len(a.objectives) != len(b.objectives):
        raise ValueError("objective vectors differ in length")
    if b.theta > epsilon and a.theta < b.theta:
        return True
    if a.theta > epsilon:
        return False
    # Both feasible from here on: plain Pareto dominance.
    strictly_better = False
    for fa, fb in zip(a.objectives, b.objectives):
        if fa > fb:
            return False
        if fa < fb:
            strictly_better = True
    return strictly_better


def dominance_matrix(
    obj_a: np.ndarray,
    theta_a: np.ndarray,
    obj_b: np.ndarray,
    theta_b: np.ndarray,
    epsilon: float = DEFAULT_EPSILON,
) -> np.ndarray:
    """``D[i, j]`` is True when row ``i`` of A dominates row ``j`` of B."""
    obj_a = np.asarray(obj_a, dtype=float)
    obj_b = np.asarray(obj_b, dtype=float)
    theta_a = np.asarray(theta_a, dtype=float)[:, None]
    theta_b = np.asarray(theta_b, dtype=float)[None, :]
    by_violation = (theta_b > epsilon) & (theta_a < theta_b)
    both_feasible = (theta_a <= epsilon) & (theta_b <= epsilon)
    no_worse = np.ones(by_violation.shape, dtype=bool)
    better = np.zeros(by_violation.shape, dtype=bool)
    for m in range(obj_a.shape[1]):
        fa = obj_a[:, m][:, None]
        fb = obj_b[:, m][None, :]
        no_worse &= fa <= fb
        better |= fa < fb
    return by_violation | (both_feasible & no_worse & better)


def nondominated_ranks(
    objectives: np.ndarray, theta: np.ndarray, epsilon: float = DEFAULT_EPSILON
) -> np.ndarray:
    """Front index (0 = nondominated) of every row, by repeated front peeling."""
    n = len(objectives)
    ranks = np.full(n, -1, dtype=int)
    if n == 0:
        return ranks
    dom = dominance_matrix(objectives, theta, objectives, theta, epsilon)
    counts = dom.sum(axis=0)
    current = np.flatnonzero(counts == 0)
    rank = 0
    while current.size:
        ranks[current] = rank
        counts = counts - dom[current].sum(axis=0)
        counts[ranks >= 0] = -1
        current = np.flatnonzero(counts == 0)
        rank += 1
    return ranks


def crowding_distances(objectives: np.ndarray) -> np.ndarray:
    """Cuboid crowding distance with per-objective range normalization.

    Copies of the same objective vector share one distance computation;
    interior copies get 0 since nothing separates them.
    """
    objectives = np.asarray(objectives, dtype=float)
    n = len(objectives)
    if n == 0:
        return np.zeros(0)
    unique, inverse, counts = np.unique(objectives, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    u = len(unique)
    dist = np.zeros(u)
    if u <= 2:
        dist[:] = math.inf
    else:
        for m in range(unique.shape[1]):
            values = unique[:, m]
            order = np.argsort(values, kind="stable")
            ordered = values[order]
            span = ordered[-1] - ordered[0]
            dist[order[0]] = math.inf
            dist[order[-1]] = math.inf
            if span > 0:
                dist[order[1:-1]] += (ordered[2:] - ordered[:-2]) / span
    dist[(counts > 1) & np.isfinite(dist)] = 0.0
    return dist[inverse]


def nondominated_mask(
    objectives: np.ndarray, theta: np.ndarray, epsilon: float = DEFAULT_EPSILON
) -> np.ndarray:
    objectives = np.asarray(objectives, dtype=float)
    if len(objectives) == 0:
        return np.zeros(0, dtype=bool)
    dom = dominance_matrix(objectives, theta, objectives, theta, epsilon)
    return ~dom.any(axis=0)


@dataclass
class ArchiveEntry:
    point: np.ndarray
    eval: Evaluation
    key: Hashable
    crowding: float = math.inf

    @property
    def objectives(self) -> tuple[float, ...]:
        return self.eval.objectives


@dataclass
class InsertReport:
    accepted: list[int] = field(default_factory=list)
    rejected: list[int] = field(default_factory=list)
    displaced: list[ArchiveEntry] = field(default_factory=list)


def _exact_key(point: np.ndarray) -> tuple:
    return tuple(float(v) for v in point)


class ParetoArchive:
    """Unbounded set of mutually nondominated points under constrained dominance.

    Entries are kept in canonical order (objectives, then key) so the archive
    content and iteration order do not depend on insertion order.
    """

    def __init__(
        self,
        epsilon: float = DEFAULT_EPSILON,
        key_fn: Callable[[np.ndarray], Hashable] | None = None,
    ) -> None:
        self.epsilon = epsilon
        self.key_fn = key_fn or _exact_key
        self.entries: list[ArchiveEntry] = []
        self._keys: set = set()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, key) -> bool:
        return key in self._keys

    def objective_matrix(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0))
        return np.array([e.eval.objectives for e in self.entries], dtype=float)

    def theta_vector(self) -> np.ndarray:
        return np.array([e.eval.theta for e in self.entries], dtype=float)

    def feasible_entries(self) -> list[ArchiveEntry]:
        return [e for e in self.entries if e.eval.theta <= self.epsilon]

    def insert_batch(
        self, batch: Sequence[tuple[np.ndarray, Evaluation]], keys: Sequence[Hashable] | None = None
    ) -> InsertReport:
        """Merge ``batch`` into the archive; the result is the nondominated union."""
        report = InsertReport()
        if keys is None:
            keys = [self.key_fn(np.asarray(p, dtype=float)) for p, _ in batch]
        candidates: list[int] = []
        seen: set = set()
        for i, ((_, ev), key) in enumerate(zip(batch, keys)):
            if ev.failed or key in self._keys or key in seen:
                report.rejected.append(i)
                continue
            seen.add(key)
            candidates.append(i)
        if not candidates:
            return report

        cand_obj = np.array([batch[i][1].objectives for i in candidates], dtype=float)
        cand_theta = np.array([batch[i][1].theta for i in candidates], dtype=float)
        survive = nondominated_mask(cand_obj, cand_theta, self.epsilon)
        if self.entries:
            arch_obj = self.objective_matrix()
            arch_theta = self.theta_vector()
            beaten = dominance_matrix(arch_obj, arch_theta, cand_obj, cand_theta, self.epsilon)
            survive &= ~beaten.any(axis=0)
            s_idx = np.flatnonzero(survive)
            displaced = dominance_matrix(
                cand_obj[s_idx], cand_theta[s_idx], arch_obj, arch_theta, self.epsilon
            ).any(axis=0)
        else:
            displaced = np.zeros(0, dtype=bool)

        kept: list[ArchiveEntry] = []
        for entry, gone in zip(self.entries, displaced):
            if gone:
                report.displaced.append(entry)
                self._keys.discard(entry.key)
            else:
                kept.append(entry)
        for ok, i in zip(survive, candidates):
            if ok:
                point, ev = batch[i]
                kept.append(ArchiveEntry(np.array(point, dtype=float), ev, keys[i]))
                self._keys.add(keys[i])
                report.accepted.append(i)
            else:
                report.rejected.append(i)
        report.rejected.sort()
        kept.sort(key=lambda e: (e.eval.objectives, e.key))
        self.entries = kept
        self._update_crowding()
        return report

    def _update_crowding(self) -> None:
        if not self.entries:
            return
        dist = crowding_distances(self.objective_matrix())
        for entry, d in zip(self.entries, dist):
            entry.crowding = float(d)


def center_order_key(entry: ArchiveEntry, epsilon: float):
    return (entry.eval.theta > epsilon, -entry.crowding, entry.eval.objectives, entry.key)


def select_centers(
    archive: ParetoArchive | Iterable[ArchiveEntry],
    n_c: int,
    exclude: Iterable[Hashable] = (),
    epsilon: float | None = None,
) -> list[ArchiveEntry]:
    """Pick up to ``n_c`` entries: feasible first, then largest crowding distance.

    Ties fall back to lexicographic objective order.
    """
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    if epsilon is None:
        epsilon = getattr(archive, "epsilon", DEFAULT_EPSILON)
    skip = set(exclude)
    pool = [e for e in archive if e.key not in skip]
    pool.sort(key=lambda e: center_order_key(e, epsilon))
    return pool[:n_c]
