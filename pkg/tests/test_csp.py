"""Predicates, hypergraphs, and exhaustive constrained optima."""
import itertools

import numpy as np
import pytest

from biascsp.csp import (
    Assignment,
    ConstraintHypergraph,
    IncompleteAssignmentError,
    InstanceTooLargeError,
    Predicate,
    assignment_value,
    opt_constrained,
    predicate_multilinear,
    relative_weight,
    robust_opt,
)


def cycle_graph(k, predicate):
    verts = {f"v{i}": 1.0 / k for i in range(k)}
    edges = [((f"v{i}", f"v{(i + 1) % k}"), 1.0 / k) for i in range(k)]
    return ConstraintHypergraph(verts, edges, predicate)


def brute_force_opt(g, mu, tol):
    """Independent exhaustive enumeration, dict-based."""
    best = None
    verts = g.vertices
    for bits in itertools.product((0, 1), repeat=len(verts)):
        sigma = Assignment.from_bits(verts, bits)
        if abs(relative_weight(g, sigma) - mu) <= tol + 1e-9:
            val = assignment_value(g, sigma)
            if best is None or val > best:
                best = val
    return best


class TestPredicate:
    def test_xor_corner(self):
        poly = predicate_multilinear(Predicate.xor(2))
        assert poly.evaluate([1.0, 0.0]) == pytest.approx(1.0)
        assert poly.evaluate([1.0, 1.0]) == pytest.approx(0.0)

    def test_and3_corner(self):
        poly = predicate_multilinear(Predicate.and_(3))
        assert poly.evaluate([1.0, 1.0, 1.0]) == pytest.approx(1.0)
        assert poly.evaluate([1.0, 1.0, 0.0]) == pytest.approx(0.0)

    def test_two_string_predicate_corner(self):
        psi = Predicate.from_strings(3, ["100", "011"])
        poly = predicate_multilinear(psi)
        assert poly.evaluate([0.0, 1.0, 1.0]) == pytest.approx(1.0)
        assert poly.evaluate([1.0, 0.0, 0.0]) == pytest.approx(1.0)
        assert poly.evaluate([1.0, 1.0, 1.0]) == pytest.approx(0.0)

    def test_multilinear_agrees_on_all_corners(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            r = int(rng.integers(1, 4))
            strings = [
                tuple(rng.integers(0, 2, size=r).tolist())
                for _ in range(int(rng.integers(1, 2 ** r + 1)))
            ]
            psi = Predicate(r, frozenset(strings))
            poly = predicate_multilinear(psi)
            for corner in itertools.product((0, 1), repeat=r):
                assert poly.evaluate(np.array(corner, float)) == pytest.approx(
                    psi(corner), abs=1e-12
                )


class TestValues:
    def test_xor_cycle_alternating(self):
        g = cycle_graph(4, Predicate.xor(2))
        sigma = Assignment({"v0": 1, "v1": 0, "v2": 1, "v3": 0})
        assert assignment_value(g, sigma) == pytest.approx(1.0)
        assert assignment_value(g, Assignment({v: 0 for v in g.vertices})) == 0.0

    def test_and_single_edge(self):
        g = ConstraintHypergraph(
            {"a": 0.5, "b": 0.5}, [(("a", "b"), 1.0)], Predicate.and_(2)
        )
        assert assignment_value(g, Assignment({"a": 1, "b": 1})) == pytest.approx(1.0)

    def test_incomplete_assignment(self):
        g = cycle_graph(3, Predicate.xor(2))
        with pytest.raises(IncompleteAssignmentError):
            assignment_value(g, Assignment({"v0": 1}))

    def test_relative_weight(self):
        g = cycle_graph(4, Predicate.xor(2))
        assert relative_weight(g, Assignment({v: 1 for v in g.vertices})) == pytest.approx(1.0)
        assert relative_weight(g, Assignment({v: 0 for v in g.vertices})) == pytest.approx(0.0)
        sigma = Assignment({"v0": 1, "v1": 1, "v2": 0, "v3": 0})
        assert relative_weight(g, sigma) == pytest.approx(0.5)

    def test_value_via_multilinear_matches_table(self):
        rng = np.random.default_rng(1)
        psi = Predicate.from_strings(3, ["110", "001", "111"])
        poly = predicate_multilinear(psi)
        verts = {f"v{i}": 1 / 5 for i in range(5)}
        edges = [(("v0", "v1", "v2"), 0.5), (("v2", "v3", "v4"), 0.5)]
        g = ConstraintHypergraph(verts, edges, psi)
        for _ in range(10):
            sigma = Assignment.from_bits(g.vertices, rng.integers(0, 2, size=5))
            via_poly = sum(
                w * float(poly.evaluate(np.array([sigma[v] for v in vs], float)))
                for vs, w in g.edges
            )
            assert assignment_value(g, sigma) == pytest.approx(via_poly, abs=1e-12)


class TestOpt:
    def test_xor_cycle_balanced(self):
        g = cycle_graph(4, Predicate.xor(2))
        value, witness, feasible = opt_constrained(g, 0.5, 0.0)
        assert feasible and value == pytest.approx(1.0)
        assert relative_weight(g, witness) == pytest.approx(0.5)

    def test_and3_forced_all_ones(self):
        g = ConstraintHypergraph(
            {"a": 1 / 3, "b": 1 / 3, "c": 1 / 3},
            [(("a", "b", "c"), 1.0)],
            Predicate.and_(3),
        )
        value, witness, feasible = opt_constrained(g, 1.0, 0.0)
        assert feasible and value == pytest.approx(1.0)
        assert all(witness[v] == 1 for v in g.vertices)

    def test_xor_triangle_third(self):
        g = cycle_graph(3, Predicate.xor(2))
        value, _, feasible = opt_constrained(g, 1 / 3, 1e-9)
        assert feasible and value == pytest.approx(2 / 3)

    def test_empty_window_flagged(self):
        g = cycle_graph(3, Predicate.xor(2))
        value, witness, feasible = opt_constrained(g, 0.5, 0.0)
        assert not feasible and witness is None and value == 0.0

    def test_matches_independent_enumeration(self):
        rng = np.random.default_rng(2)
        psi = Predicate.from_strings(2, ["10", "01", "11"])
        raw = rng.random(5)
        verts = {f"v{i}": float(w) for i, w in enumerate(raw / raw.sum())}
        pairs = [("v0", "v1"), ("v1", "v2"), ("v2", "v3"), ("v3", "v4"), ("v4", "v0")]
        edges = [(p, 0.2) for p in pairs]
        g = ConstraintHypergraph(verts, edges, psi)
        for mu in (0.2, 0.4, 0.6):
            ours, _, feasible = opt_constrained(g, mu, 0.1)
            expected = brute_force_opt(g, mu, 0.1)
            if expected is None:
                assert not feasible
            else:
                assert ours == pytest.approx(expected, abs=1e-12)

    def test_monotone_in_tol(self):
        g = cycle_graph(5, Predicate.xor(2))
        vals = [opt_constrained(g, 0.4, t)[0] for t in (0.0, 0.1, 0.2, 0.5)]
        assert all(vals[i] <= vals[i + 1] + 1e-12 for i in range(len(vals) - 1))

    def test_cap_enforced(self):
        n = 23
        verts = {f"v{i}": 1.0 / n for i in range(n)}
        edges = [((f"v{i}", f"v{(i + 1) % n}"), 1.0 / n) for i in range(n)]
        g = ConstraintHypergraph(verts, edges, Predicate.xor(2))
        with pytest.raises(InstanceTooLargeError):
            opt_constrained(g, 0.5, 0.1)


class TestRobustOpt:
    def test_gamma_zero_equals_exact(self):
        g = cycle_graph(4, Predicate.xor(2))
        assert robust_opt(g, 0.5, 0.0)[0] == pytest.approx(
            opt_constrained(g, 0.5, 0.0)[0]
        )

    def test_wide_window_is_unconstrained(self):
        g = cycle_graph(4, Predicate.xor(2))
        value, _, _ = robust_opt(g, 0.5, 4.0)  # window covers [−0.5, 1.5]
        best = max(
            assignment_value(g, Assignment.from_bits(g.vertices, bits))
            for bits in itertools.product((0, 1), repeat=4)
        )
        assert value == pytest.approx(best)

    def test_xor_cycle_small_window(self):
        g = cycle_graph(4, Predicate.xor(2))
        assert robust_opt(g, 0.5, 0.04)[0] == pytest.approx(1.0)

    def test_dominates_exact(self):
        g = cycle_graph(5, Predicate.xor(2))
        for mu in (0.2, 0.4):
            assert robust_opt(g, mu, 0.1)[0] >= opt_constrained(g, mu, 0.0)[0] - 1e-12


class TestStructuralProperties:
    def test_complement_symmetry_xor(self):
        g = cycle_graph(5, Predicate.xor(2))
        for mu in (0.2, 0.4):
            a = opt_constrained(g, mu, 1e-9)
            b = opt_constrained(g, 1 - mu, 1e-9)
            assert a[2] == b[2]
            if a[2]:
                assert a[0] == pytest.approx(b[0], abs=1e-12)

    def test_random_biased_assignment_lower_bound(self):
        # with the all-ones string accepted, conditioned random assignments
        # achieve at least mu^r in expectation; verified by enumeration
        psi = Predicate.from_strings(2, ["11", "10"])
        g = cycle_graph(4, psi)
        mu = 0.5
        value, _, feasible = opt_constrained(g, mu, 0.0)
        assert feasible
        assert value >= mu ** 2 - 1e-12

    def test_duplicate_vertices_in_edge(self):
        psi = Predicate.xor(2)
        g = ConstraintHypergraph(
            {"a": 0.5, "b": 0.5}, [(("a", "a"), 0.5), (("a", "b"), 0.5)], psi
        )
        sigma = Assignment({"a": 1, "b": 0})
        # the duplicated edge evaluates on the induced labels (1,1)
        assert assignment_value(g, sigma) == pytest.approx(0.5)

    def test_json_roundtrip(self):
        g = cycle_graph(4, Predicate.xor(2))
        back = ConstraintHypergraph.from_json(g.to_json())
        assert back.vertex_weights == g.vertex_weights
        assert back.edges == g.edges
        assert back.predicate.accepting == g.predicate.accepting

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            ConstraintHypergraph({"a": 0.7, "b": 0.7}, [(("a", "b"), 1.0)], Predicate.xor(2))
        with pytest.raises(ValueError):
            ConstraintHypergraph({"a": 0.5, "b": 0.5}, [(("a", "c"), 1.0)], Predicate.xor(2))
