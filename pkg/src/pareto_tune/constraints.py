"""Constraint handling: violations, penalty merit, projection, tangent directions.

Linear constraints ``A x <= b`` (plus variable bounds) are enforced by
projecting trial points before evaluation.  Nonlinear constraints are black
boxes; they enter through violations, constrained dominance and the L2
penalty merit.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint as LinearRows, linprog, milp

from .errors import ConfigError
from .problem import CATEGORICAL, INTEGER, DEFAULT_EPSILON, ProblemSpec

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class PenaltyConfig:
    rho: float = 10.0
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if not (self.rho > 0 and self.epsilon > 0):
            raise ConfigError("rho and epsilon must be strictly positive")


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Rows ``A x <= b`` over the full point vector, plus per-variable bounds.

    Categorical columns of ``A`` are zero and categorical entries are never moved.
    """

    A: np.ndarray
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray
    categorical: np.ndarray

    @classmethod
    def from_problem(cls, problem: ProblemSpec) -> LinearSystem:
        d = problem.dim
        rows = problem.linear_constraints
        A = np.array([r.coeffs for r in rows], dtype=float).reshape(len(rows), d)
        b = np.array([r.rhs for r in rows], dtype=float)
        kinds = problem.kinds
        return cls(
            A=A,
            b=b,
            lower=problem.lower,
            upper=problem.upper,
            integer=np.array([k == INTEGER for k in kinds]),
            categorical=np.array([k == CATEGORICAL for k in kinds]),
        )

    @classmethod
    def box(cls, lower, upper, A=None, b=None) -> LinearSystem:
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        d = lower.size
        A = np.zeros((0, d)) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
        b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
        return cls(A, b, lower, upper, np.zeros(d, bool), np.zeros(d, bool))

    @property
    def num_rows(self) -> int:
        return len(self.b)

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """``b - A x``; negative entries are violated rows."""
        return self.b - self.A @ x

    def is_feasible(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        free = ~self.categorical
        xf = x[free]
        if np.any(xf < self.lower[free] - tol) or np.any(xf > self.upper[free] + tol):
            return False
        if np.any(self.integer) and np.any(x[self.integer] != np.round(x[self.integer])):
            return False
        return self.num_rows == 0 or bool(np.all(self.residuals(x) >= -tol))


def check_linear_feasibility(sys: LinearSystem) -> None:
    """Raise ConfigError when the linear region (LP relaxation) is empty."""
    if sys.num_rows == 0:
        return
    free = np.flatnonzero(~sys.categorical)
    res = linprog(
        np.zeros(free.size),
        A_ub=sys.A[:, free],
        b_ub=sys.b,
        bounds=list(zip(sys.lower[free], sys.upper[free])),
        method="highs",
    )
    if res.status == 2:
        raise ConfigError("linear constraints and bounds admit no feasible point")
    if res.status != 0:
        raise ConfigError(f"linear feasibility check failed: {res.message}")


def violation_vector(raw: Sequence[float]) -> tuple[np.ndarray, float]:
    """Per-constraint violations of values normalized to ``c(x) <= 0`` and their max."""
    v = np.maximum(0.0, np.asarray(raw, dtype=float))
    return v, float(v.max()) if v.size else 0.0


def merit_objectives(objectives, violations, cfg: PenaltyConfig) -> np.ndarray:
    """Each objective plus ``rho * ||violations||^2``."""
    f = np.asarray(objectives, dtype=float)
    v = np.asarray(violations, dtype=float)
    if v.size == 0 or not np.any(v):
        return f.copy()
    return f + cfg.rho * float(np.dot(v, v))


def _nnls(E: np.ndarray, f: np.ndarray, max_iter: int) -> np.ndarray:
    """Lawson-Hanson active-set solution of ``min ||E u - f||, u >= 0``."""
    n = E.shape[1]
    passive = np.zeros(n, dtype=bool)
    u = np.zeros(n)
    tol = 10 * np.finfo(float).eps * max(E.shape) * max(1.0, np.abs(E).sum(axis=0).max())
    w = E.T @ f
    for _ in range(max_iter):
        candidates = np.where(passive, -np.inf, w)
        j = int(np.argmax(candidates))
        if candidates[j] <= tol:
            break
        passive[j] = True
        for _ in range(n + 1):
            s = np.zeros(n)
            s[passive] = np.linalg.lstsq(E[:, passive], f, rcond=None)[0]
            if np.all(s[passive] > 0):
                break
            shrink = passive & (s <= 0)
            alpha = np.min(u[shrink] / (u[shrink] - s[shrink]))
            u = u + alpha * (s - u)
            passive &= u > tol
            u[~passive] = 0.0
        u = s
        w = E.T @ (f - E @ u)
    return u


def _least_distance(y: np.ndarray, G: np.ndarray, h: np.ndarray) -> np.ndarray | None:
    """Closest point to ``y`` with ``G x >= h``; None when the set is empty.

    Solved as a least-distance program through NNLS on the dual, then
    polished by an exact projection onto the detected active rows.
    """
    hz = h - G @ y
    if np.all(hz <= 0):
        return y.copy()
    n = y.size
    E = np.vstack([G.T, hz[None, :]])
    f = np.zeros(n + 1)
    f[n] = 1.0
    u = _nnls(E, f, max_iter=3 * E.shape[1] + 10)
    r = E @ u - f
    if abs(r[n]) < 1e-12:
        return None
    z = -r[:n] / r[n]
    active = u > 1e-12 * max(1.0, float(u.max()))
    if np.any(active):
        Ga = G[active]
        lam, *_ = np.linalg.lstsq(Ga @ Ga.T, hz[active], rcond=None)
        polished = Ga.T @ lam
        if np.all(G @ polished - hz >= -1e-12):
            z = polished
    return y + z


def _project_continuous(y: np.ndarray, A: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    n = y.size
    G = np.vstack([-A, np.eye(n), -np.eye(n)])
    h = np.concatenate([-b, lo, -hi])
    x = _least_distance(y, G, h)
    if x is None:
        return None
    return np.clip(x, lo, hi)


def project_to_feasible(point: np.ndarray, sys: LinearSystem) -> np.ndarray:
    """Closest point (Euclidean, non-categorical coordinates) satisfying ``sys``.

    Integer coordinates are clipped and rounded; when rows couple them, the
    nearby integer vectors are tried in order of distance.
    """
    x = np.array(point, dtype=float)
    if sys.is_feasible(x):
        return x
    free = ~sys.categorical
    if sys.num_rows == 0:
        x[free] = np.clip(x[free], sys.lower[free], sys.upper[free])
        x[sys.integer] = np.round(x[sys.integer])
        return x

    idx = np.flatnonzero(free)
    A = sys.A[:, idx]
    fixed_rhs = sys.b - sys.A[:, sys.categorical] @ x[sys.categorical]
    relaxed = _project_continuous(x[idx], A, fixed_rhs, sys.lower[idx], sys.upper[idx])
    if relaxed is None:
        raise ConfigError("linear constraints admit no feasible point")
    is_int = sys.integer[idx]
    if not np.any(is_int):
        x[idx] = relaxed
        return x

    cont = ~is_int
    int_cols = np.flatnonzero(is_int)
    coupled = [j for j in int_cols if np.any(A[:, j] != 0)]
    base = np.round(relaxed[int_cols])
    # Nearest lattice vectors first; only coupled integer coordinates vary.
    options = []
    for shifts in itertools.product((0, -1, 1), repeat=min(len(coupled), 8)):
        trial = relaxed.copy()
        trial[int_cols] = base
        for j, s in zip(coupled, shifts):
            trial[j] = np.clip(
                (np.floor(relaxed[j]) if s < 0 else np.ceil(relaxed[j])) if s else trial[j],
                sys.lower[idx][j],
                sys.upper[idx][j],
            )
        options.append(trial)
    options.sort(key=lambda t: float(np.sum((t[int_cols] - relaxed[int_cols]) ** 2)))
    for trial in options:
        rhs = fixed_rhs - A[:, int_cols] @ trial[int_cols]
        if np.any(cont):
            sol = _project_continuous(
                x[idx][cont], A[:, cont], rhs, sys.lower[idx][cont], sys.upper[idx][cont]
            )
            if sol is None:
                continue
            trial[cont] = sol
        elif np.any(rhs < -FEAS_TOL):
            continue
        candidate = x.copy()
        candidate[idx] = trial
        if sys.is_feasible(candidate):
            return candidate
    # No nearby lattice point works: take the L1-closest integer assignment
    # from a small MILP, then re-project the continuous block.
    trial = _closest_integer_assignment(x[idx], A, fixed_rhs, sys.lower[idx], sys.upper[idx], is_int)
    if trial is not None:
        rhs = fixed_rhs - A[:, int_cols] @ trial[int_cols]
        if np.any(cont):
            sol = _project_continuous(x[idx][cont], A[:, cont], rhs, sys.lower[idx][cont], sys.upper[idx][cont])
            if sol is not None:
                trial[cont] = sol
        candidate = x.copy()
        candidate[idx] = trial
        if sys.is_feasible(candidate):
            return candidate
    raise ConfigError("no integer-feasible point satisfies the linear constraints")


def _closest_integer_assignment(y, A, b, lo, hi, is_int) -> np.ndarray | None:
    """Minimize ``sum |x - y|`` subject to ``A x <= b``, bounds and integrality."""
    n = y.size
    eye = np.eye(n)
    rows = [
        LinearRows(np.hstack([A, np.zeros((len(b), n))]), -np.inf, b),
        LinearRows(np.hstack([eye, -eye]), -np.inf, y),  # x - t <= y
        LinearRows(np.hstack([-eye, -eye]), -np.inf, -y),  # -x - t <= -y
    ]
    res = milp(
        c=np.concatenate([np.zeros(n), np.ones(n)]),
        constraints=rows,
        integrality=np.concatenate([is_int.astype(int), np.zeros(n, dtype=int)]),
        bounds=Bounds(np.concatenate([lo, np.zeros(n)]), np.concatenate([hi, np.full(n, np.inf)])),
    )
    if res.x is None:
        return None
    x = res.x[:n].copy()
    x[is_int] = np.round(x[is_int])
    return x


def tangent_directions(
    point: np.ndarray,
    sys_A: np.ndarray,
    sys_b: np.ndarray,
    activation_tol: float,
    base_directions: Sequence[np.ndarray],
) -> list[np.ndarray]:
    """Poll directions adjusted to the constraint rows near ``point``.

    Rows with residual ``b - a.x <= activation_tol`` are active.  A base
    direction pointing into the feasible side of every active row is kept;
    otherwise it is projected onto the null space of the rows it would cross
    (repeating as new rows become crossed) and renormalized.  Zero
    projections are dropped.
    """
    base = [np.asarray(d, dtype=float) for d in base_directions]
    A = np.atleast_2d(np.asarray(sys_A, dtype=float))
    if A.size == 0:
        return base
    residual = np.asarray(sys_b, dtype=float) - A @ np.asarray(point, dtype=float)
    active = A[residual <= activation_tol]
    if len(active) == 0:
        return base

    out: list[np.ndarray] = []
    seen: set = set()
    for d in base:
        v = d.copy()
        blocking = np.zeros(len(active), dtype=bool)
        for _ in range(len(active) + 1):
            crossing = (active @ v > 1e-12) & ~blocking
            if not np.any(crossing):
                break
            blocking |= crossing
            N = active[blocking]
            coef, *_ = np.linalg.lstsq(N @ N.T, N @ d, rcond=None)
            v = d - N.T @ coef
        norm = np.linalg.norm(v)
        if norm < 1e-10:
            continue
        v = v / norm * np.linalg.norm(d)
        v[np.abs(v) < 1e-15] = 0.0
        if np.any(active @ v > 1e-12):
            continue
        key = tuple(np.round(v, 12))
        if key not in seen:
            seen.add(key)
            out.append(v)
    return out
