"""Evaluation cache keyed by quantized variable vectors."""
from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from .problem import CONTINUOUS, Evaluation, VariableSpec

QUANTUM = 1e-12


class PointKey:
    """Maps points to hashable, totally ordered cache keys.

    Continuous values snap to a grid of ``QUANTUM * span``; integer and
    categorical values are kept exactly.
    """

    def __init__(self, variables: Sequence[VariableSpec], quantum: float = QUANTUM) -> None:
        self.lower = np.array([v.lower for v in variables], dtype=float)
        span = np.array([v.span for v in variables], dtype=float)
        cont = np.array([v.kind == CONTINUOUS for v in variables])
        cell = np.where(cont, quantum * np.where(span > 0, span, 1.0), 1.0)
        self.cell = cell
        self.origin = np.where(cont, self.lower, 0.0)

    def __call__(self, point: np.ndarray) -> tuple[int, ...]:
        q = np.round((np.asarray(point, dtype=float) - self.origin) / self.cell)
        return tuple(int(v) for v in q)


class EvaluationCache:
    """All uniquely evaluated points and their evaluations.

    Lookups hash the quantized key, which answers in O(1) expected time;
    ``keys()`` yields entries in lexicographic key order.
    """

    def __init__(self, key_fn: PointKey) -> None:
        self.key_fn = key_fn
        self._store: dict[tuple, tuple[np.ndarray, Evaluation]] = {}

    def __len__(self) -> int:
        return len(self._store)

    @property
    def unique_count(self) -> int:
        return len(self._store)

    def __contains__(self, point) -> bool:
        return self.key_fn(point) in self._store

    def lookup(self, point: np.ndarray) -> Evaluation | None:
        hit = self._store.get(self.key_fn(point))
        return None if hit is None else hit[1]

    def lookup_key(self, key: tuple) -> Evaluation | None:
        hit = self._store.get(key)
        return None if hit is None else hit[1]

    def insert(self, point: np.ndarray, evaluation: Evaluation, key: tuple | None = None) -> bool:
        """Store ``evaluation``; returns False when the point was already cached."""
        key = self.key_fn(point) if key is None else key
        if key in self._store:
            return False
        self._store[key] = (np.array(point, dtype=float), evaluation)
        return True

    def keys(self) -> Iterator[tuple]:
        return iter(sorted(self._store))

    def items(self) -> Iterator[tuple[tuple, np.ndarray, Evaluation]]:
        for key in self.keys():
            point, ev = self._store[key]
            yield key, point, ev
