"""Generating set search: compass polling around archive centers."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .constraints import LinearSystem, project_to_feasible, tangent_directions
from .dominance import ParetoArchive, select_centers
from .errors import ConfigError


@dataclass(frozen=True)
class GssConfig:
    initial_step: float = 1.0
    min_step: float = 1e-6
    alpha: float = 0.01
    num_centers: int = 10

    def __post_init__(self) -> None:
        if not 0 < self.min_step < self.initial_step:
            raise ConfigError("need 0 < min_step < initial_step")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.num_centers < 1:
            raise ConfigError("num_centers must be >= 1")


@dataclass
class CenterState:
    center: np.ndarray
    key: Hashable
    step: float
    failures_in_a_row: int = 0


def _exact_key(x: np.ndarray) -> tuple:
    return tuple(float(v) for v in x)


def poll_set(
    center: np.ndarray,
    step: float,
    sys: LinearSystem,
    key_fn: Callable[[np.ndarray], Hashable] = _exact_key,
) -> list[np.ndarray]:
    """Compass poll points ``center +/- step * span_i * e_i`` after projection.

    Categorical and fixed coordinates are not polled.  Near active linear
    rows the compass set is replaced by tangent directions.  Integer
    coordinates move by at least one unit.  Points that project back onto the
    center, or onto an earlier poll point, are dropped.
    """
    center = np.asarray(center, dtype=float)
    span = sys.upper - sys.lower
    metric = np.flatnonzero(~sys.categorical & (span > 0))
    m = metric.size
    if m == 0:
        return []
    base = []
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        base.extend([e, -e])
    directions = base
    if sys.num_rows:
        A_scaled = sys.A[:, metric] * span[metric]
        norms = np.linalg.norm(A_scaled, axis=1)
        norms[norms == 0] = 1.0
        A_u = A_scaled / norms[:, None]
        u = (center[metric] - sys.lower[metric]) / span[metric]
        residual = (sys.b - sys.A @ center) / norms
        directions = tangent_directions(u, A_u, A_u @ u + residual, step, base)

    is_int = sys.integer[metric]
    seen = {key_fn(center)}
    out: list[np.ndarray] = []
    for d in directions:
        delta = step * d * span[metric]
        moving_int = is_int & (d != 0)
        delta[moving_int] = np.sign(d[moving_int]) * np.maximum(1.0, np.round(np.abs(delta[moving_int])))
        y = center.copy()
        y[metric] += delta
        y = project_to_feasible(y, sys)
        k = key_fn(y)
        if k in seen:
            continue
        seen.add(k)
        out.append(y)
    return out


def refresh_centers(
    states: Sequence[CenterState],
    archive: ParetoArchive,
    cfg: GssConfig,
    retired: set,
) -> list[CenterState]:
    """Keep centers still in the archive and top up to ``num_centers``.

    New centers come from ``select_centers`` (largest crowding first) and
    start at the initial step.
    """
    kept: list[CenterState] = []
    keys: set = set()
    for s in states:
        if s.key in archive and s.key not in keys:
            kept.append(s)
            keys.add(s.key)
    missing = cfg.num_centers - len(kept)
    if missing > 0:
        for entry in select_centers(archive, missing, exclude=keys | retired):
            kept.append(CenterState(entry.point.copy(), entry.key, cfg.initial_step))
    return kept


def update_centers(
    states: Sequence[CenterState],
    poll_keys: Sequence[Iterable[Hashable]],
    entered: set,
    archive: ParetoArchive,
    cfg: GssConfig,
    retired: set,
) -> list[CenterState]:
    """Move successful centers, halve failed steps, retire exhausted centers.

    ``poll_keys[i]`` are the keys polled around ``states[i]``; ``entered``
    holds the keys accepted into the archive by this iteration's insert.
    """
    by_key = {e.key: e for e in archive}
    out: list[CenterState] = []
    for state, keys in zip(states, poll_keys):
        winners = [by_key[k] for k in keys if k in entered and k in by_key]
        if winners:
            pick = select_centers(winners, 1, epsilon=archive.epsilon)[0]
            out.append(CenterState(pick.point.copy(), pick.key, state.step, 0))
            continue
        state = replace(state, step=state.step / 2.0, failures_in_a_row=state.failures_in_a_row + 1)
        if state.step < cfg.min_step:
            retired.add(state.key)
            taken = {s.key for s in out} | {s.key for s in states} | retired
            fresh = select_centers(archive, 1, exclude=taken)
            if fresh:
                out.append(CenterState(fresh[0].point.copy(), fresh[0].key, cfg.initial_step))
            continue
        out.append(state)
    return out


def frozen_system(sys: LinearSystem, point: np.ndarray, free: np.ndarray) -> LinearSystem:
    """Copy of ``sys`` whose non-free coordinates are pinned at ``point``."""
    lower, upper = sys.lower.copy(), sys.upper.copy()
    pinned = np.ones(point.size, dtype=bool)
    pinned[np.asarray(free, dtype=int)] = False
    lower[pinned] = point[pinned]
    upper[pinned] = point[pinned]
    return replace(sys, lower=lower, upper=upper)


def gss_refine_single(
    start: np.ndarray,
    free: np.ndarray,
    allotment: int,
    merit: Callable[[list[np.ndarray]], Sequence[float]],
    sys: LinearSystem,
    cfg: GssConfig,
    start_value: float | None = None,
    key_fn: Callable[[np.ndarray], Hashable] = _exact_key,
) -> tuple[np.ndarray, float, int]:
    """Single-objective compass search over the ``free`` coordinates.

    ``merit`` maps a batch of points to scalar values.  A poll is accepted
    only when it lowers the best value by at least ``alpha * step**2``.
    Returns ``(best_point, best_value, evaluations_used)``.
    """
    x = np.array(start, dtype=float)
    used = 0
    if start_value is None:
        if allotment < 1:
            return x, float("nan"), 0
        start_value = float(merit([x])[0])
        used = 1
    fx = float(start_value)
    sub = frozen_system(sys, x, free)
    step = cfg.initial_step
    while step >= cfg.min_step:
        polls = poll_set(x, step, sub, key_fn)
        if not polls:
            step /= 2.0
            continue
        if used + len(polls) > allotment:
            break
        values = [float(v) for v in merit(polls)]
        used += len(polls)
        best = int(np.argmin(values))
        if fx - values[best] >= cfg.alpha * step * step:
            x, fx = polls[best], values[best]
        else:
            step /= 2.0
    return x, fx, used
