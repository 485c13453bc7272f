"""Acceptance criteria at their pinned tolerances.

Each test prints one ``PASS``/``FAIL`` line (visible without ``-s``) before
asserting. Run with ``pytest tests/test_acceptance.py -v``.
"""

import itertools
import math
import time

import numpy as np
import pytest

from mobqc import analysis, twirl
from mobqc.checks import random_generator_set, states_near_stabilized
from mobqc.config import load_config
from mobqc.graphs import ProtocolGraph, coupled_stabilizer_generators
from mobqc.protocol import (
    InputBlock,
    estimate_acceptance,
    exact_acceptance,
    pad_average,
)
from mobqc.qsim import (
    DensityOperator,
    StateVector,
    random_density,
    random_kraus,
    random_povm_element,
    trace_distance,
)
from mobqc.runner import build_protocol
from mobqc.stabtest import (
    closeness_envelope,
    exact_pass_probability,
    gentle_measurement_check,
    pass_probability_enumerated,
    pass_probability_projector,
    stabilized_state,
)

EXACT = 1e-10
ALGEBRA = 1e-12
N_SE = 5
TRIALS = 10_000


@pytest.fixture
def report(capsys):
    def emit(criterion: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
    return emit


def test_1_honest_completeness(report):
    start = time.perf_counter()
    # a rotation keeps the compute-branch oracle away from 0 and 1
    cfg = load_config(preset_name="honest", overrides={"pattern": {"preset": "ry", "angle": 1.0}})
    proto = build_protocol(cfg)
    exact = exact_acceptance(proto, 0.5)
    oracle = cfg.instance.oracle_probability(cfg.input_block)
    est = estimate_acceptance(proto, 1.0, TRIALS, seed=2024)
    elapsed = time.perf_counter() - start
    assert 0.1 < oracle < 0.9
    z = abs(est.p_compute - oracle) / est.se_compute
    ok = (abs(exact.p_gpass - 1) <= EXACT and abs(exact.p_psipass - 1) <= EXACT
          and z <= N_SE and elapsed < 10)
    report("1", ok, f"p_G={exact.p_gpass:.12f} p_psi={exact.p_psipass:.12f} "
                    f"compute={est.p_compute:.4f} oracle={oracle:.4f} z={z:.2f} t={elapsed:.1f}s")
    assert ok


def test_2_pass_identity(report):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        gens = random_generator_set(int(rng.integers(1, 5)), rng)
        rho = random_density(gens.n_qubits, rng)
        worst = max(worst, abs(pass_probability_enumerated(rho, gens)
                               - pass_probability_projector(rho, gens)))
    ok = worst <= EXACT
    report("2", ok, f"max |enumerated - (1+Tr(Lambda rho))/2| = {worst:.2e} over 50 pairs")
    assert ok


def test_3_closeness_envelope(report):
    rng = np.random.default_rng(3)
    gens = coupled_stabilizer_generators(ProtocolGraph.chain(3, 1))
    violations = 0
    worst_gentle = -math.inf
    for eps in (0.01, 0.05, 0.1):
        for rho in states_near_stabilized(gens, eps, 100, rng):
            assert exact_pass_probability(rho, gens) >= 1 - eps
            sigma = stabilized_state(rho, gens)
            m_el = random_povm_element(gens.n_qubits, rng)
            env = closeness_envelope(m_el, sigma, eps)
            if not env.contains(m_el.probability(rho)):
                violations += 1
            lhs, rhs = gentle_measurement_check(rho, gens)
            worst_gentle = max(worst_gentle, lhs - rhs)
    ok = violations == 0 and worst_gentle <= EXACT
    report("3", ok, f"envelope violations={violations}/300 "
                    f"max gentle lhs-rhs={worst_gentle:.3e}")
    assert ok


def test_4_appendix_suite(report):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    block = InputBlock(StateVector.from_label("1"))

    cross = 0.0
    rho = random_density(2, rng)
    for b, g in itertools.permutations(range(16), 2):
        cross = max(cross, twirl.verify_cross_term_cancellation(b, g, rho))

    channels = [random_kraus(3, int(rng.integers(1, 5)), rng) for _ in range(20)]
    weight_err = max(abs(sum(twirl.d_weights(k).values()) - 1) for k in channels)

    paulis = [k for _, k in twirl.single_pauli_channels(3)]
    assert len(paulis) == 63
    rho2 = max(twirl.verify_rho2_bound(k, block)[0] for k in channels + paulis)

    chain_worst = math.inf
    for k in channels + paulis:
        res = twirl.verify_psipass_bound(k, block)
        chain_worst = min(chain_worst, res.overlap - (1 / 3 - res.epsilon))
    elapsed = time.perf_counter() - start

    ok = (cross <= EXACT and weight_err <= EXACT and rho2 <= 2 / 3 + EXACT
          and chain_worst >= -EXACT and elapsed < 60)
    report("4", ok, f"cross={cross:.1e} |sum D - 1|={weight_err:.1e} max rho2={rho2:.6f} "
                    f"min overlap-(1/3-eps)={chain_worst:.4f} t={elapsed:.1f}s")
    assert ok


def test_5_oracle_equivalence(report):
    rng = np.random.default_rng(5)
    block = InputBlock(StateVector.from_label("1"))
    graph = ProtocolGraph.chain(3, 1)
    worst = 0.0
    for _ in range(5):
        k = random_kraus(3, int(rng.integers(1, 4)), rng)
        worst = max(worst, trace_distance(twirl.rho_before_exact(k, block),
                                          twirl.protocol_path_average(k, block, graph)))
    ok = worst <= EXACT
    report("5", ok, f"max trace distance = {worst:.2e} over 5 channels")
    assert ok


@pytest.mark.parametrize("preset", ["replace-input", "pauli-channel", "wrong-graph", "mixed-state"])
def test_6_soundness(preset, report):
    cfg = load_config(preset_name=preset)
    proto = build_protocol(cfg)
    exact = exact_acceptance(proto, cfg.q)
    case = analysis.soundness_case(exact.p_gpass, exact.p_psipass, cfg.q,
                                   cfg.instance.a, cfg.instance.b)
    est = estimate_acceptance(proto, cfg.q, TRIALS, seed=606)
    limit = case.bound + N_SE * est.se_acc
    ok = est.p_acc < limit
    report(f"6[{preset}]", ok, f"p_acc={est.p_acc:.4f}+-{est.se_acc:.4f} "
                               f"{case.bound_name}={case.bound:.4f} at eps={case.epsilon:.4f}")
    assert ok


def test_7_gap_algebra(report):
    worst_balance = worst_closed = 0.0
    for eps in np.geomspace(1e-4, 1e-2, 25):
        for r in range(4, 13):
            p = analysis.RateParams.amplified(float(eps), 0.5, r)
            qs = analysis.q_star(p)
            if math.isnan(qs) or not 0 <= qs <= 1:
                continue
            bs = analysis.bound_set(p.with_q(qs))
            d = analysis.delta_of(float(eps))
            closed = (eps / 2) * (p.a - p.b - d) / (1 + eps / 2 - p.b - d)
            worst_balance = max(worst_balance, abs(bs.delta1 - bs.delta3))
            worst_closed = max(worst_closed, abs(bs.delta3 - closed))
    rows = analysis.lower_bound_chain(np.geomspace(1e-4, 1e-2, 25), range(4, 13))
    chain_ok = all(row["holds"] for row in rows)
    applicable = sum(row["applicable"] for row in rows)
    d0 = abs(analysis.delta_of(0.0) - math.sqrt(2 / 3))
    ok = worst_balance <= ALGEBRA and worst_closed <= ALGEBRA and chain_ok and d0 <= EXACT
    report("7", ok, f"|D1-D3|={worst_balance:.1e} |D3-closed|={worst_closed:.1e} "
                    f"chain holds={chain_ok} ({applicable}/{len(rows)} points with positive bound) "
                    f"|delta(0)-sqrt(2/3)|={d0:.1e}")
    assert ok


def test_8_blindness(report):
    worst = 0.0
    mixed = DensityOperator.maximally_mixed(3)
    for label in ("0", "1", "+"):
        block = InputBlock(StateVector.from_label(label))
        for perm in itertools.permutations(range(3)):
            worst = max(worst, trace_distance(pad_average(block, perm), mixed))
    ok = worst <= EXACT
    report("8", ok, f"max trace distance to I/8 = {worst:.2e}")
    assert ok
