"""Predicates, weighted constraint hypergraphs, and exhaustive constrained optima."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .polynomial import MultilinearPolynomial

WEIGHT_TOL = 1e-9
EXHAUSTIVE_CAP = 22


class IncompleteAssignmentError(KeyError):
    pass


class InstanceTooLargeError(ValueError):
    pass


def _as_bits(s) -> tuple[int, ...]:
    if isinstance(s, str):
        return tuple(int(c) for c in s)
    return tuple(int(b) for b in s)


@dataclass(frozen=True)
class Predicate:
    """Arity-r Boolean predicate given by its accepting set."""

    arity: int
    accepting: frozenset[tuple[int, ...]]

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError("arity must be >= 1")
        acc = frozenset(_as_bits(a) for a in self.accepting)
        for a in acc:
            if len(a) != self.arity or any(b not in (0, 1) for b in a):
                raise ValueError(f"bad accepting string {a}")
        object.__setattr__(self, "accepting", acc)

    def __call__(self, bits) -> int:
        return int(_as_bits(bits) in self.accepting)

    def table(self) -> np.ndarray:
        """Acceptance indicator indexed by packed bits (first argument = MSB)."""
        out = np.zeros(2 ** self.arity, dtype=np.int8)
        for a in self.accepting:
            idx = 0
            for b in a:
                idx = (idx << 1) | b
            out[idx] = 1
        return out

    @classmethod
    def from_strings(cls, arity: int, strings) -> "Predicate":
        return cls(arity, frozenset(_as_bits(s) for s in strings))

    @classmethod
    def xor(cls, arity: int = 2) -> "Predicate":
        acc = [a for a in itertools.product((0, 1), repeat=arity) if sum(a) % 2 == 1]
        return cls(arity, frozenset(acc))

    @classmethod
    def and_(cls, arity: int = 2) -> "Predicate":
        return cls(arity, frozenset([(1,) * arity]))


def predicate_multilinear(psi: Predicate) -> MultilinearPolynomial:
    """Multilinear representation: sum over accepting strings of the
    indicator product prod x_j (a_j=1) * prod (1 - x_j) (a_j=0)."""
    poly = MultilinearPolynomial.zero(psi.arity)
    for a in psi.accepting:
        t = np.array(1.0)
        for b in a:
            factor = np.array([0.0, 1.0]) if b == 1 else np.array([1.0, -1.0])
            t = np.multiply.outer(t, factor)
        poly = poly + MultilinearPolynomial(t)
    return poly


@dataclass
class ConstraintHypergraph:
    """Vertex-weighted, edge-weighted ordered r-uniform constraint hypergraph."""

    vertex_weights: dict[str, float]
    edges: list[tuple[tuple[str, ...], float]]
    predicate: Predicate

    def __post_init__(self):
        vw = {str(v): float(w) for v, w in self.vertex_weights.items()}
        if any(w < 0 for w in vw.values()):
            raise ValueError("negative vertex weight")
        if abs(math.fsum(vw.values()) - 1.0) > WEIGHT_TOL:
            raise ValueError("vertex weights must sum to 1")
        edges = []
        for vs, w in self.edges:
            vs = tuple(str(v) for v in vs)
            if len(vs) != self.predicate.arity:
                raise ValueError(f"edge {vs} has wrong arity")
            for v in vs:
                if v not in vw:
                    raise ValueError(f"edge vertex {v} unknown")
            if w < 0:
                raise ValueError("negative edge weight")
            edges.append((vs, float(w)))
        if abs(math.fsum(w for _, w in edges) - 1.0) > WEIGHT_TOL:
            raise ValueError("edge weights must sum to 1")
        self.vertex_weights = vw
        self.edges = edges

    @property
    def vertices(self) -> list[str]:
        return list(self.vertex_weights)

    def vertex_weight_vector(self, order: list[str] | None = None) -> np.ndarray:
        order = order or self.vertices
        return np.array([self.vertex_weights[v] for v in order])

    def to_json(self) -> dict:
        return {
            "predicate": {
                "arity": self.predicate.arity,
                "accepting": sorted("".join(map(str, a)) for a in self.predicate.accepting),
            },
            "vertices": [{"id": v, "weight": w} for v, w in self.vertex_weights.items()],
            "edges": [{"vs": list(vs), "weight": w} for vs, w in self.edges],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConstraintHypergraph":
        pred = Predicate.from_strings(obj["predicate"]["arity"], obj["predicate"]["accepting"])
        vw = {item["id"]: item["weight"] for item in obj["vertices"]}
        edges = [(tuple(item["vs"]), item["weight"]) for item in obj["edges"]]
        return cls(vw, edges, pred)

    @classmethod
    def load(cls, path) -> "ConstraintHypergraph":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class Assignment:
    """Total 0/1 labeling of the vertex set."""

    labels: dict[str, int] = field(default_factory=dict)

    def __getitem__(self, v: str) -> int:
        try:
            return self.labels[v]
        except KeyError as exc:
            raise IncompleteAssignmentError(f"vertex {v} unlabeled") from exc

    @classmethod
    def from_bits(cls, vertices: list[str], bits) -> "Assignment":
        return cls({v: int(b) for v, b in zip(vertices, bits)})


def assignment_value(g: ConstraintHypergraph, sigma: Assignment) -> float:
    """Weight of edges whose (edge-ordered) labels the predicate accepts."""
    total = 0.0
    for vs, w in g.edges:
        total += w * g.predicate([sigma[v] for v in vs])
    return total


def relative_weight(g: ConstraintHypergraph, sigma: Assignment) -> float:
    """Vertex-weighted fraction of ones."""
    return math.fsum(w * sigma[v] for v, w in g.vertex_weights.items())


def _all_values(g: ConstraintHypergraph):
    """Vectorized (relative weight, value) over all 2^n assignments."""
    verts = g.vertices
    n = len(verts)
    if n > EXHAUSTIVE_CAP:
        raise InstanceTooLargeError(f"{n} vertices exceeds exhaustive cap {EXHAUSTIVE_CAP}")
    masks = np.arange(2 ** n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int8)
    weights = bits @ g.vertex_weight_vector(verts)
    vindex = {v: i for i, v in enumerate(verts)}
    values = np.zeros(len(masks))
    table = g.predicate.table()
    for vs, w in g.edges:
        idx = np.zeros(len(masks), dtype=np.int64)
        for v in vs:
            idx = (idx << 1) | bits[:, vindex[v]]
        values += w * table[idx]
    return verts, bits, weights, values


def opt_constrained(g: ConstraintHypergraph, mu: float, tol: float | None = None):
    """Maximum assignment value subject to |relative weight - mu| <= tol.

    Default tol is half the minimum vertex weight.  Returns
    ``(value, witness, feasible)``; an empty window gives ``(0.0, None, False)``.
    """
    if tol is None:
        tol = 0.5 * min(g.vertex_weights.values())
    verts, bits, weights, values = _all_values(g)
    ok = np.abs(weights - mu) <= tol + WEIGHT_TOL
    if not ok.any():
        return 0.0, None, False
    vals = np.where(ok, values, -np.inf)
    best = int(np.argmax(vals))
    return float(values[best]), Assignment.from_bits(verts, bits[best]), True


def robust_opt(g: ConstraintHypergraph, mu: float, gamma: float):
    """Best constrained value over the window mu*(1 +- sqrt(gamma)),
    realized over relative weights achievable by actual assignments."""
    half = mu * math.sqrt(max(gamma, 0.0))
    verts, bits, weights, values = _all_values(g)
    ok = (weights >= mu - half - WEIGHT_TOL) & (weights <= mu + half + WEIGHT_TOL)
    if not ok.any():
        return 0.0, None, False
    vals = np.where(ok, values, -np.inf)
    best = int(np.argmax(vals))
    return float(values[best]), Assignment.from_bits(verts, bits[best]), True
