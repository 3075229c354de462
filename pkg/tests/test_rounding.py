"""Gaussian-projection rounding: determinism, covariance/variance bounds, value."""
import itertools
import math

import numpy as np
import pytest

from biascsp.csp import Assignment, ConstraintHypergraph, Predicate
from biascsp.probspace import BiasedSpace, FunctionTable, domain_points
from biascsp.pseudodist import LocalDistributionFamily, vector_solution
from biascsp.rounding import (
    RoundingInput,
    bias_concentration_check,
    clip,
    covariance_bound_check,
    exact_test_value,
    round_once,
    value_check,
)


def host(n=4, predicate=None):
    predicate = predicate or Predicate.xor(2)
    verts = {f"v{i}": 1.0 / n for i in range(n)}
    edges = [((f"v{i}", f"v{(i + 1) % n}"), 1.0 / n) for i in range(n)]
    return ConstraintHypergraph(verts, edges, predicate)


def mixture_family(g, rng, k=6, level=6):
    n = len(g.vertices)
    probs = rng.dirichlet(np.ones(k))
    support = [
        (Assignment.from_bits(g.vertices, rng.integers(0, 2, size=n)), float(p))
        for p in probs
    ]
    return LocalDistributionFamily.from_distribution(support, level, g).smooth(0.1, 0.4)


def dictator_tables(g, family, r_dim, coord=0):
    pts = domain_points(r_dim)
    out = {}
    for v in g.vertices:
        mu_v = family.vertex_mean(v)
        out[v] = FunctionTable(
            BiasedSpace((mu_v,) * r_dim), pts[:, coord].astype(float), bounded=True
        )
    return out


def constant_tables(g, family, r_dim, c=None):
    out = {}
    for v in g.vertices:
        mu_v = family.vertex_mean(v)
        val = mu_v if c is None else c
        out[v] = FunctionTable(
            BiasedSpace((mu_v,) * r_dim), np.full(2 ** r_dim, val), bounded=True
        )
    return out


def oracle_test_value(inp):
    """Dict-based enumeration of the dictatorship-test value (independent path)."""
    family = inp.family
    total = 0.0
    R = inp.r_dim
    for edge, w_e in inp.host.edges:
        key = family._key(edge)
        table = family.local(key)
        outcomes = []
        for bits in itertools.product((0, 1), repeat=len(key)):
            outcomes.append((dict(zip(key, bits)), float(table[bits])))
        edge_sum = 0.0
        for a in inp.host.predicate.accepting:
            for combo in itertools.product(range(len(outcomes)), repeat=R):
                p = math.prod(outcomes[c][1] for c in combo)
                if p == 0.0:
                    continue
                prod = 1.0
                for pos, v in enumerate(edge):
                    x = [outcomes[c][0][v] for c in combo]
                    val = inp.noised[v].value_at(x)
                    prod *= val if a[pos] == 1 else 1.0 - val
                edge_sum += p * prod
        total += w_e * edge_sum
    return total


class TestClip:
    def test_values(self):
        assert clip(-0.3) == 0.0
        assert clip(0.4) == pytest.approx(0.4)
        assert clip(1.7) == 1.0
        np.testing.assert_allclose(clip(np.array([-1, 0.5, 2])), [0, 0.5, 1])


class TestRoundOnce:
    def test_constant_tables_give_constant_p(self):
        g = host()
        fam = mixture_family(g, np.random.default_rng(0))
        sol = vector_solution(fam)
        inp = RoundingInput(g, constant_tables(g, fam, 3, c=0.35), sol, eta=0.05, family=fam)
        for seed in (1, 2, 3):
            out = round_once(inp, seed)
            for v in g.vertices:
                assert out.p[v] == pytest.approx(0.35, abs=1e-9)

    def test_zero_fluctuation_reads_noised_mean(self):
        g = host()
        fam = mixture_family(g, np.random.default_rng(1))
        sol = vector_solution(fam)
        sol.w[:] = 0.0
        inp = RoundingInput(g, dictator_tables(g, fam, 3), sol, eta=0.2, family=fam)
        out = round_once(inp, 7)
        for v in g.vertices:
            # multilinearity at the mean: the table's expectation, exactly
            assert out.p[v] == pytest.approx(inp.g_tables[v].expectation(), abs=1e-9)

    def test_pure_function_of_seed(self):
        g = host()
        fam = mixture_family(g, np.random.default_rng(2))
        sol = vector_solution(fam)
        inp = RoundingInput(g, dictator_tables(g, fam, 4), sol, family=fam)
        a = round_once(inp, 11)
        b = round_once(inp, 11)
        assert a.p == b.p and a.sigma.labels == b.sigma.labels and a.value == b.value

    def test_outcome_shape(self):
        g = host()
        fam = mixture_family(g, np.random.default_rng(3))
        inp = RoundingInput(g, dictator_tables(g, fam, 4), vector_solution(fam), family=fam)
        out = round_once(inp, 5)
        assert set(out.p) == set(g.vertices)
        assert all(0.0 <= p <= 1.0 for p in out.p.values())
        assert 0.0 <= out.bias <= 1.0 and 0.0 <= out.value <= 1.0

    def test_polynomial_agrees_with_noised_table_on_corners(self):
        from biascsp.probspace import domain_points as dp

        g = host()
        fam = mixture_family(g, np.random.default_rng(13))
        inp = RoundingInput(g, dictator_tables(g, fam, 3), vector_solution(fam), eta=0.2, family=fam)
        corners = dp(3).astype(float)
        for v in g.vertices:
            np.testing.assert_allclose(
                inp.polys[v].evaluate(corners), inp.noised[v].values, atol=1e-9
            )
        assert inp.functional_bias() == pytest.approx(inp.mu, abs=1e-12)


def random_clipped_poly(rng, dim):
    c = rng.uniform(0.2, 0.8)
    lin = 0.3 * rng.standard_normal(dim)
    quad = 0.08 * rng.standard_normal((dim, dim))

    def fn(pts):
        vals = c + pts @ lin + ((pts @ quad) * pts).sum(axis=-1)
        return np.clip(vals, 0.0, 1.0)

    return fn


class TestCovarianceBound:
    def test_independent_inputs(self):
        rng = np.random.default_rng(4)
        f, gfun = random_clipped_poly(rng, 3), random_clipped_poly(rng, 3)
        rep = covariance_bound_check(f, gfun, 0.0, 3, 300000, 21)
        assert abs(rep.covariance) <= 3 * rep.sigma_total
        assert rep.holds

    def test_identical_inputs_variance(self):
        rng = np.random.default_rng(5)
        f = random_clipped_poly(rng, 3)
        rep = covariance_bound_check(f, f, 1.0, 3, 200000, 22)
        assert rep.covariance <= 0.25 + 3 * rep.sigma_total
        assert rep.holds

    def test_intermediate_correlation(self):
        rng = np.random.default_rng(6)
        for trial in range(5):
            f, gfun = random_clipped_poly(rng, 2), random_clipped_poly(rng, 2)
            rep = covariance_bound_check(f, gfun, 0.3, 2, 200000, 100 + trial)
            assert rep.holds


class TestBiasConcentration:
    def test_constant_tables_zero_variance(self):
        g = host()
        fam = mixture_family(g, np.random.default_rng(7))
        sol = vector_solution(fam)
        inp = RoundingInput(g, constant_tables(g, fam, 3, c=0.4), sol, family=fam)
        rep = bias_concentration_check(inp, 400, 31)
        assert rep.variance == pytest.approx(0.0, abs=1e-18)
        assert rep.variance_holds

    def test_variance_bound_random_pipelines(self):
        rng = np.random.default_rng(8)
        for trial in range(5):
            g = host()
            fam = mixture_family(g, rng)
            sol = vector_solution(fam)
            inp = RoundingInput(g, dictator_tables(g, fam, 3), sol, family=fam)
            rep = bias_concentration_check(inp, 1500, 200 + trial)
            assert rep.variance_holds, (rep.variance, rep.variance_bound)

    def test_planted_correlated_pair(self):
        g = host(2)
        fam = LocalDistributionFamily.from_distribution(
            [
                (Assignment({"v0": 0, "v1": 0}), 0.5),
                (Assignment({"v0": 1, "v1": 1}), 0.5),
            ],
            4,
            g,
        ).smooth(0.05, 0.5)
        sol = vector_solution(fam)
        inp = RoundingInput(g, dictator_tables(g, fam, 3), sol, family=fam)
        rep = bias_concentration_check(inp, 3000, 33)
        assert rep.variance_bound == pytest.approx(1.0, abs=0.1)  # near-perfect correlation
        assert rep.variance_holds


class TestValueCheck:
    def test_exact_value_matches_oracle(self):
        g = host()
        fam = mixture_family(g, np.random.default_rng(9))
        inp = RoundingInput(
            g, dictator_tables(g, fam, 3), vector_solution(fam), eta=0.1, family=fam
        )
        assert exact_test_value(inp) == pytest.approx(oracle_test_value(inp), abs=1e-10)

    def test_constant_tables_closed_form(self):
        g = host(predicate=Predicate.and_(2))
        fam = mixture_family(g, np.random.default_rng(10))
        c = 0.45
        inp = RoundingInput(g, constant_tables(g, fam, 3, c=c), vector_solution(fam), family=fam)
        assert exact_test_value(inp) == pytest.approx(c ** 2, abs=1e-10)
        rep = value_check(inp, 300, 41)
        assert rep.mc_value == pytest.approx(c ** 2, abs=1e-9)

    def test_dictator_true_distribution(self):
        # pre-processed family: near-symmetric biases and low correlations keep
        # the clipping (invariance) error inside the configured budget
        from biascsp.pseudodist import find_conditioning

        g = host()
        rng = np.random.default_rng(11)
        raw = mixture_family(g, rng)
        fam = find_conditioning(raw.smooth(0.8, 0.5), target=0.05, budget=4).family
        inp = RoundingInput(
            g, dictator_tables(g, fam, 4), vector_solution(fam), eta=0.01, family=fam
        )
        rep = value_check(inp, 40000, 42)
        assert abs(rep.mc_value - rep.exact_value) <= 3 * rep.mc_stderr + 0.02
        assert rep.holds

    def test_zero_variance_deterministic(self):
        g = host()
        fam = mixture_family(g, np.random.default_rng(12))
        sol = vector_solution(fam)
        sol.w[:] = 0.0
        inp = RoundingInput(g, dictator_tables(g, fam, 3), sol, family=fam)
        p1 = round_once(inp, 1).p
        p2 = round_once(inp, 2).p
        assert p1 == p2  # acceptance probabilities no longer depend on the draw
