"""Coordinate-reading assignments on the lifted vertex set.

An assignment maps a lifted vertex (A, x, z) in V^R x {0,1}^R x {bot,top}^R
to a bit.  The planted-set dictator reads x at a selected index i*(A, z):

* If exactly one coordinate has (A(j), z(j)) in planted x {top}, that
  coordinate is selected (covariant under coordinate permutations).
* Otherwise the selected coordinate holds the smallest (A(j), z(j)) code
  among codes appearing exactly once in the vector.  Uniqueness makes the
  choice permutation-covariant as well; the rare vectors with no unique code
  fall back to the first occurrence of the minimum and are counted, since
  only there can permutation respect fail.

The selection never looks at x, so the assignment's analytic bias equals the
vertex-weighted mean bias exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import SseGraph
from .params import ReductionParams


def _as_batch(arr, dtype=np.int64) -> tuple[np.ndarray, bool]:
    a = np.asarray(arr, dtype=dtype)
    if a.ndim == 1:
        return a[None, :], True
    return a, False


class PlantedDictator:
    """f(A, x, z) = x(i*(A, z)) with the planted-set index rule."""

    def __init__(self, planted_mask: np.ndarray):
        self.mask = np.asarray(planted_mask, dtype=bool)
        if not self.mask.any():
            raise ValueError("planted set must be nonempty")
        self.fallback_count = 0
        self.query_count = 0

    def istar_batch(self, A: np.ndarray, z: np.ndarray) -> np.ndarray:
        A, _ = _as_batch(A)
        z, _ = _as_batch(z)
        m, R = A.shape
        marked = self.mask[A] & (z == 1)
        count = marked.sum(axis=1)
        out = np.empty(m, dtype=np.int64)
        single = count == 1
        if single.any():
            out[single] = np.argmax(marked[single], axis=1)
        rest = ~single
        if rest.any():
            out[rest] = self._tie_break(A[rest], z[rest])
        self.query_count += m
        return out

    def _tie_break(self, A: np.ndarray, z: np.ndarray) -> np.ndarray:
        code = A * 2 + z
        s = np.sort(code, axis=1)
        m, R = s.shape
        left = np.concatenate([np.full((m, 1), -1, dtype=s.dtype), s[:, :-1]], axis=1)
        right = np.concatenate([s[:, 1:], np.full((m, 1), -2, dtype=s.dtype)], axis=1)
        uniq = (s != left) & (s != right)
        has_uniq = uniq.any(axis=1)
        big = np.iinfo(s.dtype).max
        min_uniq = np.where(uniq, s, big).min(axis=1)
        target = np.where(has_uniq, min_uniq, s[:, 0])
        self.fallback_count += int((~has_uniq).sum())
        return np.argmax(code == target[:, None], axis=1)

    def evaluate_batch(self, A, x, z) -> np.ndarray:
        A, _ = _as_batch(A)
        x, _ = _as_batch(x)
        z, _ = _as_batch(z)
        idx = self.istar_batch(A, z)
        return x[np.arange(len(idx)), idx]


@dataclass
class LongCodeAssignment:
    """Boolean assignment on lifted vertices with a vectorized evaluator."""

    kind: str  # "dictator" | "table" | "callback"
    _eval: object = field(repr=False)
    dictator: PlantedDictator | None = None

    def evaluate_batch(self, A, x, z) -> np.ndarray:
        A, _ = _as_batch(A)
        x, _ = _as_batch(x)
        z, _ = _as_batch(z)
        return np.asarray(self._eval(A, x, z), dtype=np.int8)

    def evaluate(self, A, x, z) -> int:
        return int(self.evaluate_batch([list(A)], [list(x)], [list(z)])[0])

    @classmethod
    def from_callback(cls, fn) -> "LongCodeAssignment":
        return cls("callback", fn)

    @classmethod
    def from_table(cls, n: int, R: int, values) -> "LongCodeAssignment":
        """Explicit table over the full lifted vertex set (tiny R only)."""
        values = np.asarray(values, dtype=np.int8).reshape(-1)
        if values.size != n ** R * 4 ** R:
            raise ValueError("table size must be n^R * 4^R")

        def fn(A, x, z):
            idx = np.zeros(len(A), dtype=np.int64)
            for j in range(R):
                idx = idx * n + A[:, j]
            for j in range(R):
                idx = (idx << 1) | x[:, j]
            for j in range(R):
                idx = (idx << 1) | z[:, j]
            return values[idx]

        return cls("table", fn)


def dictator_assignment(planted, params: ReductionParams | None = None, graph: SseGraph | None = None) -> LongCodeAssignment:
    """Dictator assignment reading x at the planted-set-selected index.

    ``planted`` is a vertex list or a boolean mask; ``graph`` supplies the
    vertex count when a list is given.
    """
    planted = list(planted)
    if graph is not None:
        mask = np.zeros(graph.n, dtype=bool)
        mask[planted] = True
    else:
        mask = np.asarray(planted, dtype=bool)
    core = PlantedDictator(mask)
    lca = LongCodeAssignment("dictator", core.evaluate_batch, dictator=core)
    return lca


def analytic_bias(vertex_weights: dict[str, float], mus: dict[str, float]) -> float:
    """Exact relative weight of any coordinate-reading assignment."""
    return math.fsum(w * mus[v] for v, w in vertex_weights.items())
