"""End-to-end run management: smoothing, conditioning, vector solution, and
optional rounding / lifted-test experiments, emitting one verdict per stage."""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..csp import Assignment, ConstraintHypergraph
from ..probspace import BiasedSpace, FunctionTable, domain_points
from ..pseudodist import (
    LocalDistributionFamily,
    find_conditioning,
    moment_matrix,
    vector_solution,
    verify_feasible,
)


class ConfigError(ValueError):
    """Malformed or missing configuration input; exits with code 2."""


class StageError(RuntimeError):
    """A pipeline stage failed; the message carries the stage tag."""


def parse_number(text) -> float:
    """Accept decimals and exact 'p/q' rationals."""
    if isinstance(text, (int, float)):
        return float(text)
    text = str(text).strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def stage_entry(
    stage: str,
    verdict,
    value=None,
    bound=None,
    stderr=None,
    seed=None,
    samples=None,
    **extra,
) -> dict:
    entry = {
        "stage": stage,
        "verdict": verdict,
        "value": value,
        "bound": bound,
        "stderr": stderr,
        "seed": seed,
        "samples": samples,
    }
    if extra:
        entry["extra"] = extra
    return entry


def _load_obj(source, what: str) -> dict:
    if isinstance(source, str):
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"{what}: file {source} not found")
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{what}: invalid JSON in {source}: {exc}") from exc
    if isinstance(source, dict):
        return source
    raise ConfigError(f"{what}: expected a path or an inline object")


def load_instance(source) -> ConstraintHypergraph:
    obj = _load_obj(source, "instance")
    try:
        return ConstraintHypergraph.from_json(obj)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"instance: missing field {exc}") from exc


def load_family(source, host: ConstraintHypergraph) -> LocalDistributionFamily:
    obj = _load_obj(source, "pseudodistribution")
    kind = obj.get("kind", "file" if isinstance(source, str) else None)
    level = int(obj.get("level", 6))
    if kind == "product":
        mu = parse_number(obj.get("mu", 0.5))
        n = len(host.vertices)
        joint = np.ones((2,) * n)
        for axis in range(n):
            shape = [1] * n
            shape[axis] = 2
            joint = joint * np.array([1.0 - mu, mu]).reshape(shape)
        return LocalDistributionFamily(host, level, joint=joint)
    if kind == "mixture":
        support = []
        for item in obj.get("support", []):
            support.append((Assignment({k: int(v) for k, v in item["labels"].items()}), parse_number(item["prob"])))
        if not support:
            raise ConfigError("pseudodistribution: mixture needs a support")
        return LocalDistributionFamily.from_distribution(support, level, host)
    if "locals" in obj:
        return LocalDistributionFamily.from_json(obj, host)
    raise ConfigError("pseudodistribution: unknown kind")


def _vertex_space(mu_v: float, r_dim: int):
    """Conditioning can pin a vertex; a pinned vertex gets a constant table
    on a symmetric-bias space (its fluctuation vector is zero anyway)."""
    pinned = mu_v <= 1e-12 or mu_v >= 1.0 - 1e-12
    bias = 0.5 if pinned else mu_v
    return BiasedSpace((bias,) * r_dim, "bit"), pinned


def build_rounding_tables(source, host, family, r_dim: int) -> dict[str, FunctionTable]:
    obj = _load_obj(source, "rounding functions") if source is not None else {"kind": "dictator"}
    kind = obj.get("kind")
    tables = {}
    if kind == "dictator":
        coord = int(obj.get("coord", 0))
        pts = domain_points(r_dim)
        for v in host.vertices:
            mu_v = family.vertex_mean(v)
            space, pinned = _vertex_space(mu_v, r_dim)
            vals = np.full(2 ** r_dim, round(mu_v)) if pinned else pts[:, coord].astype(float)
            tables[v] = FunctionTable(space, vals, bounded=True)
        return tables
    if kind == "constant":
        for v in host.vertices:
            mu_v = family.vertex_mean(v)
            space, _ = _vertex_space(mu_v, r_dim)
            tables[v] = FunctionTable(space, np.full(2 ** r_dim, mu_v), bounded=True)
        return tables
    if "tables" in obj:
        for v in host.vertices:
            if v not in obj["tables"]:
                raise ConfigError(f"rounding functions: vertex {v} missing")
            mu_v = family.vertex_mean(v)
            space, _ = _vertex_space(mu_v, r_dim)
            tables[v] = FunctionTable(space, obj["tables"][v], bounded=True)
        return tables
    raise ConfigError("rounding functions: unknown kind")


def run_pipeline(config) -> dict:
    """Smooth, condition, factor, then run the configured experiments.

    Returns {"stages": [...], "ok": bool}; every stage carries the stable
    report keys {stage, verdict, value, bound, stderr, seed, samples}.
    Stage failures propagate as :class:`StageError` tagged with the stage.
    """
    cfg = _load_obj(config, "config")
    seed = int(cfg.get("seed", 0))
    stages: list[dict] = []
    current_stage = "load"

    def enter(name: str) -> None:
        nonlocal current_stage
        current_stage = name

    try:
        return _run_pipeline_stages(cfg, seed, stages, enter)
    except (ConfigError, StageError):
        raise
    except Exception as exc:
        raise StageError(f"[stage {current_stage}] {type(exc).__name__}: {exc}") from exc


def _run_pipeline_stages(cfg, seed, stages, enter) -> dict:
    enter("load")
    host = load_instance(cfg.get("instance"))
    family = load_family(cfg.get("pseudodistribution"), host)
    mu_target = parse_number(cfg.get("mu", family.bias()))

    enter("verify-input")
    report = verify_feasible(family, mu_target)
    stages.append(
        stage_entry(
            "verify-input",
            report.feasible,
            value=report.min_eigenvalue,
            bound=-1e-8,
            seed=seed,
            objective=report.objective,
            bias=report.bias,
            violations=len(report.consistency_violations),
        )
    )

    enter("smooth")
    smooth_cfg = cfg.get("smooth", {})
    eta_s = parse_number(smooth_cfg.get("eta", 0.1))
    bias_before = family.bias()
    resample_mu = parse_number(smooth_cfg.get("mu", bias_before))
    obj_before = family.objective()
    family = family.smooth(eta_s, resample_mu)
    r = host.predicate.arity
    obj_floor = (1.0 - eta_s) ** r * obj_before
    bias_after = family.bias()
    expected_bias = (1.0 - eta_s) * bias_before + eta_s * resample_mu
    stages.append(
        stage_entry(
            "smooth",
            abs(bias_after - expected_bias) <= 1e-9 and family.objective() >= obj_floor - 1e-9,
            value=family.objective(),
            bound=obj_floor,
            seed=seed,
            bias=bias_after,
            eta=eta_s,
        )
    )

    enter("condition")
    cond_cfg = cfg.get("condition", {})
    target = parse_number(cond_cfg.get("target", 0.05))
    budget = int(cond_cfg.get("budget", 6))
    result = find_conditioning(family, target, budget)
    family = result.family
    stages.append(
        stage_entry(
            "condition",
            result.success,
            value=family.statistics().avg_abs_corr,
            bound=target,
            seed=seed,
            trace=result.trace,
            subset=result.subset,
            values=result.values,
        )
    )

    enter("vector-solution")
    sol = vector_solution(family)
    index, m2 = moment_matrix(family, order=2)
    gram = np.vstack([sol.u_empty, sol.u]) @ np.vstack([sol.u_empty, sol.u]).T
    resid = float(np.abs(gram - m2).max())
    stages.append(
        stage_entry("vector-solution", resid <= 1e-7, value=resid, bound=1e-7, seed=seed)
    )

    enter("rounding")
    round_cfg = cfg.get("rounding")
    if round_cfg and round_cfg.get("enabled", True):
        from ..rounding import RoundingInput, bias_concentration_check, value_check

        r_dim = int(round_cfg.get("R", 4))
        tables = build_rounding_tables(round_cfg.get("functions"), host, family, r_dim)
        inp = RoundingInput(
            host,
            tables,
            sol,
            eta=parse_number(round_cfg.get("eta", 0.01)),
            mu=mu_target,
            family=family,
        )
        trials = int(round_cfg.get("trials", 2000))
        conc = bias_concentration_check(inp, trials, seed)
        stages.append(
            stage_entry(
                "rounding-variance",
                conc.variance_holds,
                value=conc.variance,
                bound=conc.variance_bound,
                stderr=conc.variance_stderr,
                seed=seed,
                samples=trials,
                deviation_fraction=conc.deviation_fraction,
                deviation_bound=conc.deviation_bound,
            )
        )
        vtrials = int(round_cfg.get("value_trials", 20000))
        vc = value_check(inp, vtrials, seed, budget=parse_number(round_cfg.get("budget", 0.02)))
        stages.append(
            stage_entry(
                "rounding-value",
                vc.holds,
                value=vc.mc_value,
                bound=vc.exact_value,
                stderr=vc.mc_stderr,
                seed=seed,
                samples=vtrials,
                sigma_value=vc.mc_sigma_value,
                max_influence=vc.max_influence,
            )
        )

    enter("reduction")
    red_cfg = cfg.get("reduction")
    if red_cfg and red_cfg.get("enabled", True):
        from ..reduction import (
            ReductionParams,
            SseGraph,
            acceptance_estimate,
            dictator_assignment,
            generate_sse,
            mixing_check,
        )

        graph_spec = red_cfg.get("graph")
        if isinstance(graph_spec, dict) and "kind" in graph_spec:
            graph = generate_sse(
                graph_spec["kind"],
                int(graph_spec.get("n", 32)),
                int(graph_spec.get("deg", 6)),
                parse_number(graph_spec.get("delta", 0.25)),
                seed=int(graph_spec.get("seed", seed)),
                eps=parse_number(graph_spec.get("eps", 0.05)),
            )
        else:
            graph = SseGraph.from_json(_load_obj(graph_spec, "graph"))
        pspec = red_cfg.get("params", {})
        params = ReductionParams.manual(
            mu=mu_target,
            r=host.predicate.arity,
            beta=parse_number(pspec.get("beta", 0.2)),
            rho_sq=parse_number(pspec.get("rho_sq", 0.25)),
            R=int(pspec.get("R", 10)),
            eta=parse_number(pspec.get("eta", 0.01)),
        )
        if graph.planted is None:
            raise ConfigError("reduction experiments need a planted graph")
        f = dictator_assignment(graph.planted, params, graph)
        trials = int(red_cfg.get("accept_trials", 100000))
        rep = acceptance_estimate(
            host, family, graph, params, f, trials, seed, assert_bound=True
        )
        stages.append(
            stage_entry(
                "reduction-acceptance",
                rep.holds,
                value=rep.estimate,
                bound=rep.completeness_bound,
                stderr=rep.stderr,
                seed=seed,
                samples=trials,
                objective=rep.objective,
            )
        )
        mix = mixing_check(
            host,
            family,
            graph,
            params,
            f,
            alpha=parse_number(red_cfg.get("alpha", 2.0)),
            a_samples=int(red_cfg.get("a_samples", 2000)),
            seed=seed,
            inner_samples=int(red_cfg.get("inner_samples", 512)),
        )
        stages.append(
            stage_entry(
                "mixing",
                mix.holds,
                value=mix.fraction,
                bound=mix.bound,
                stderr=mix.fraction_stderr,
                seed=seed,
                samples=mix.a_samples,
                threshold=mix.threshold,
            )
        )

    ok = all(s["verdict"] is not False for s in stages)
    return {"stages": stages, "ok": ok}
