"""The lifted test distribution: one constraint tuple per draw.

For a sampled gap edge, each output position carries a triple
(vertex-vector, bit-vector, leak-vector).  Per coordinate: the bit values
across positions follow the edge's local distribution; the leak values are
either copied from a common draw (with the coupling probability) or fresh;
both are then re-randomized at the noise rate; finally the leakage fold
refreshes vertex and bit together wherever the leak symbol is bot, and each
position is independently coordinate-permuted.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..csp import ConstraintHypergraph
from ..pseudodist import LocalDistributionFamily
from .graphs import SseGraph
from .params import ReductionParams


def edge_block_probs(theta: LocalDistributionFamily, edge: tuple[str, ...]):
    """Per-coordinate distribution of the position bits of one edge.

    Returns (probs over 2^r outcomes, outcome -> per-position bit matrix).
    Outcome index packs position bits with position 0 most significant;
    duplicate vertices within the edge induce identical columns.
    """
    key = theta._key(edge)
    k = len(key)
    table = np.asarray(theta.local(key)).reshape(-1)
    r = len(edge)
    pos_of = {v: t for t, v in enumerate(key)}
    outcome_bits = ((np.arange(2 ** k)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.int8)
    probs = np.zeros(2 ** r)
    pos_bits = ((np.arange(2 ** r)[:, None] >> np.arange(r - 1, -1, -1)) & 1).astype(np.int8)
    for o in range(2 ** k):
        idx = 0
        for pos, v in enumerate(edge):
            idx = (idx << 1) | int(outcome_bits[o, pos_of[v]])
        probs[idx] += table[o]
    return probs, pos_bits


def leakage_apply(z, mu: float, point, graph: SseGraph, rng: np.random.Generator):
    """Fold (A, x): copy where the leak symbol is top, refresh both where bot."""
    a, x = point
    a = np.asarray(a, dtype=np.int64)
    x = np.asarray(x, dtype=np.int8)
    z = np.asarray(z, dtype=np.int8)
    keep = z == 1
    a_new = np.where(keep, a, rng.integers(0, graph.n, size=a.shape))
    x_new = np.where(keep, x, (rng.random(x.shape) < mu).astype(np.int8))
    return a_new, x_new


@dataclass
class TestSample:
    """One ordered constraint tuple of lifted vertices, with its trace."""

    edge: tuple[str, ...]
    parts: list[tuple[np.ndarray, np.ndarray, np.ndarray]]  # (B', x', z') per position
    perms: list[np.ndarray]
    trace: dict


def sample_test_tuple(
    gap: ConstraintHypergraph,
    theta: LocalDistributionFamily,
    graph: SseGraph,
    params: ReductionParams,
    rng: np.random.Generator,
    mus: dict[str, float] | None = None,
) -> TestSample:
    """Draw one ordered constraint tuple from the lifted test distribution."""
    R = params.R
    if R > 1 << 16:
        raise ValueError("lift dimension too large to sample explicitly")
    mus = mus or {v: theta.vertex_mean(v) for v in gap.vertices}
    weights = np.array([w for _, w in gap.edges])
    edge_idx = int(rng.choice(len(gap.edges), p=weights / weights.sum()))
    edge, _ = gap.edges[edge_idx]
    r = len(edge)
    probs, pos_bits = edge_block_probs(theta, edge)

    a_vec = rng.integers(0, graph.n, size=R)
    b_vecs = []
    for _ in range(r):
        nb = graph.adj[a_vec, rng.integers(0, graph.deg, size=R)]
        fresh = rng.integers(0, graph.n, size=R)
        b_vecs.append(np.where(rng.random(R) < params.eta, fresh, nb))

    z_common = (rng.random(R) < params.beta).astype(np.int8)
    xi = (rng.random(R) < params.rho_sq).astype(np.int8)

    outcomes = rng.choice(2 ** r, size=R, p=probs)
    x_vecs = [pos_bits[outcomes, pos].astype(np.int8) for pos in range(r)]
    z_vecs = []
    for _ in range(r):
        fresh = (rng.random(R) < params.beta).astype(np.int8)
        z_vecs.append(np.where(xi == 1, z_common, fresh))

    x_tilde, z_prime = [], []
    for pos, v in enumerate(edge):
        resample = rng.random(R) < params.eta
        fresh_x = (rng.random(R) < mus[v]).astype(np.int8)
        x_tilde.append(np.where(resample, fresh_x, x_vecs[pos]))
        resample_z = rng.random(R) < params.eta
        fresh_z = (rng.random(R) < params.beta).astype(np.int8)
        z_prime.append(np.where(resample_z, fresh_z, z_vecs[pos]))

    parts = []
    perms = []
    for pos, v in enumerate(edge):
        b_new, x_new = leakage_apply(z_prime[pos], mus[v], (b_vecs[pos], x_tilde[pos]), graph, rng)
        perm = rng.permutation(R)
        parts.append((b_new[perm], x_new[perm], z_prime[pos][perm]))
        perms.append(perm)

    trace = {
        "A": a_vec,
        "B": b_vecs,
        "z_common": z_common,
        "xi": xi,
        "x": x_vecs,
        "z": z_vecs,
        "x_tilde": x_tilde,
        "z_prime": z_prime,
    }
    return TestSample(edge=edge, parts=parts, perms=perms, trace=trace)


class BatchTestSampler:
    """Vectorized sampler for Monte Carlo estimates over the test distribution."""

    def __init__(
        self,
        gap: ConstraintHypergraph,
        theta: LocalDistributionFamily,
        graph: SseGraph,
        params: ReductionParams,
    ):
        self.gap = gap
        self.graph = graph
        self.params = params
        self.mus = {v: theta.vertex_mean(v) for v in gap.vertices}
        self.edge_weights = np.array([w for _, w in gap.edges])
        self.edge_weights = self.edge_weights / self.edge_weights.sum()
        self.blocks = [edge_block_probs(theta, e) for e, _ in gap.edges]

    def sample_parts(self, edge_index: int, m: int, rng: np.random.Generator):
        """m tuples for one fixed edge; returns list of (B', x', z') of shape (m, R)."""
        g, p = self.graph, self.params
        R = p.R
        edge, _ = self.gap.edges[edge_index]
        r = len(edge)
        probs, pos_bits = self.blocks[edge_index]
        a = rng.integers(0, g.n, size=(m, R))
        outcomes = rng.choice(2 ** r, size=(m, R), p=probs)
        z_common = (rng.random((m, R)) < p.beta).astype(np.int8)
        xi = rng.random((m, R)) < p.rho_sq
        parts = []
        for pos, v in enumerate(edge):
            nb = g.adj[a, rng.integers(0, g.deg, size=(m, R))]
            fresh_v = rng.integers(0, g.n, size=(m, R))
            b = np.where(rng.random((m, R)) < p.eta, fresh_v, nb)
            x = pos_bits[outcomes, pos]
            fresh_z = (rng.random((m, R)) < p.beta).astype(np.int8)
            z = np.where(xi, z_common, fresh_z)
            x = np.where(
                rng.random((m, R)) < p.eta,
                (rng.random((m, R)) < self.mus[v]).astype(np.int8),
                x,
            )
            z = np.where(
                rng.random((m, R)) < p.eta,
                (rng.random((m, R)) < p.beta).astype(np.int8),
                z,
            )
            keep = z == 1
            b = np.where(keep, b, rng.integers(0, g.n, size=(m, R)))
            x = np.where(keep, x, (rng.random((m, R)) < self.mus[v]).astype(np.int8))
            perm = np.argsort(rng.random((m, R)), axis=1)
            parts.append(
                (
                    np.take_along_axis(b, perm, axis=1),
                    np.take_along_axis(x, perm, axis=1),
                    np.take_along_axis(z, perm, axis=1),
                )
            )
        return parts

    def accept_indicators(self, f, m: int, rng: np.random.Generator) -> np.ndarray:
        """m draws of the 0/1 acceptance indicator under assignment f."""
        counts = rng.multinomial(m, self.edge_weights)
        table = self.gap.predicate.table()
        out = np.empty(m, dtype=np.int8)
        offset = 0
        for e_idx, cnt in enumerate(counts):
            if cnt == 0:
                continue
            parts = self.sample_parts(e_idx, cnt, rng)
            idx = np.zeros(cnt, dtype=np.int64)
            for b, x, z in parts:
                bits = f.evaluate_batch(b, x, z)
                idx = (idx << 1) | bits.astype(np.int64)
            out[offset : offset + cnt] = table[idx]
            offset += cnt
        return out
