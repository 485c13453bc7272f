"""Experiment orchestration: config in, :class:`ResultRecord` out."""

from __future__ import annotations

import copy
import math
import time
from dataclasses import dataclass
from typing import Callable

from . import analysis
from .config import ConfigError, ExperimentConfig, parse_config
from .protocol import (
    AcceptanceEstimate,
    AliceSecret,
    Protocol,
    estimate_acceptance,
    exact_acceptance,
    trial_rng,
)
from .records import ResultRecord


def build_protocol(cfg: ExperimentConfig) -> Protocol:
    proto = Protocol(cfg.instance, cfg.input_block, cfg.graph, cfg.strategy)
    if cfg.generators is not None:
        cfg.generators.check_commuting()
        cfg.generators.check_independent()
        proto.generators = cfg.generators
    return proto


def resolve_q(cfg: ExperimentConfig) -> float:
    if cfg.q != "optimal":
        return float(cfg.q)
    params = analysis.RateParams.amplified(float(cfg.epsilon), 0.5, cfg.r)
    qs = analysis.q_star(params)
    if math.isnan(qs) or not 0.0 <= qs <= 1.0:
        raise ConfigError("q", f"no valid optimal q at epsilon = {cfg.epsilon}, r = {cfg.r}")
    return qs


def simulate(cfg: ExperimentConfig, q: float,
             on_record: Callable[[dict], None] | None = None) -> AcceptanceEstimate:
    proto = build_protocol(cfg)
    if cfg.mode == "exact":
        if cfg.m == 1:
            return exact_acceptance(proto, q)
        # all (3m)! 4^{3m} secrets are out of reach; average exactly over sampled ones
        secrets = [AliceSecret.random(cfg.graph.v2_count, trial_rng(cfg.seed, i))
                   for i in range(cfg.trials)]
        return exact_acceptance(proto, q, secrets)
    return estimate_acceptance(proto, q, cfg.trials, cfg.seed, cfg.workers, on_record)


def _nan_min(*values: float) -> float:
    finite = [v for v in values if not math.isnan(v)]
    return min(finite) if finite else 1.0


def make_record(cfg: ExperimentConfig, q: float, est: AcceptanceEstimate,
                experiment_id: str | None = None, wall_time: float | None = None) -> ResultRecord:
    inst = cfg.instance
    if cfg.epsilon == "measured":
        low = _nan_min(est.p_gpass, est.p_psipass)
        eps = analysis.measured_epsilon(low, low)
        case = analysis.soundness_case(
            1.0 if math.isnan(est.p_gpass) else est.p_gpass,
            1.0 if math.isnan(est.p_psipass) else est.p_psipass, q, inst.a, inst.b)
    else:
        eps = float(cfg.epsilon)
        case = analysis.soundness_case(est.p_gpass, est.p_psipass, q, inst.a, inst.b, eps)
    bounds = analysis.bound_set(analysis.RateParams(eps, q, inst.a, inst.b, cfg.r))
    try:
        gap = analysis.gap_at_qstar(analysis.RateParams(eps, q, inst.a, inst.b, cfg.r))
    except analysis.NoVerifiableGap:
        gap = math.nan
    exact = est.mode == "exact"
    rec = ResultRecord(
        experiment_id=experiment_id or cfg.name, q=q, epsilon=eps, r=cfg.r,
        p_acc=est.p_acc, se_acc=est.se_acc, p_gpass=est.p_gpass, p_psipass=est.p_psipass,
        alpha=bounds.alpha, beta1=bounds.beta1, beta2=bounds.beta2, beta3=bounds.beta3,
        delta=bounds.delta, q_star=bounds.q_star, gap=gap,
        se_gpass=est.se_gpass, se_psipass=est.se_psipass,
        p_compute=est.p_compute, se_compute=est.se_compute,
        p_compute_oracle=inst.oracle_probability(cfg.input_block), a=inst.a, b=inst.b,
        delta1=bounds.delta1, delta2=bounds.delta2, delta3=bounds.delta3,
        soundness_case=case.case, bound_name=case.bound_name, bound=case.bound,
        mode=est.mode, trials=0 if exact else est.trials,
        secrets_averaged=est.trials if exact else 0, seed=cfg.seed,
        strategy=cfg.strategy.name, counts={} if exact else dict(est.counts),
        accepted={} if exact else dict(est.accepted), wall_time=wall_time)
    rec.validate()
    return rec


def run_experiment(cfg: ExperimentConfig, timing: bool = False,
                   on_record: Callable[[dict], None] | None = None) -> ResultRecord:
    start = time.perf_counter()
    q = resolve_q(cfg)
    est = simulate(cfg, q, on_record)
    wall = time.perf_counter() - start if timing else None
    return make_record(cfg, q, est, wall_time=wall)


@dataclass
class SweepResult:
    records: list
    crossover: float | None = None


def _format_value(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def run_sweep(cfg: ExperimentConfig, axis: str, values: list, timing: bool = False) -> SweepResult:
    """One record per grid value. Axes that only enter the bound algebra
    (``epsilon``, ``r``) reuse a single simulation."""
    if axis not in ("q", "epsilon", "r", "trials"):
        raise ConfigError("sweep.axis", f"unknown axis {axis!r}")
    if not values:
        raise ConfigError("sweep.values", "empty value grid")
    records = []
    shared: AcceptanceEstimate | None = None
    for value in values:
        raw = copy.deepcopy(cfg.raw)
        raw[axis] = value
        point = parse_config(raw)
        start = time.perf_counter()
        q = resolve_q(point)
        if axis in ("epsilon", "r") and point.q != "optimal":
            if shared is None:
                shared = simulate(point, q)
            est = shared
        else:
            est = simulate(point, q)
        wall = time.perf_counter() - start if timing else None
        exp_id = f"{cfg.name}[{axis}={_format_value(value)}]"
        records.append(make_record(point, q, est, exp_id, wall))
    crossover = None
    if axis == "epsilon":
        try:
            crossover = analysis.gap_crossover(cfg.r)
        except (analysis.NoVerifiableGap, ValueError):
            crossover = None
    return SweepResult(records, crossover)
