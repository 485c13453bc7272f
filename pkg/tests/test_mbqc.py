import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mobqc import mbqc
from mobqc.graphs import ProtocolGraph, attach_input
from mobqc.mbqc import (
    MeasurementPattern,
    PatternError,
    PatternStep,
    compile_wire_pattern,
    exact_output_probability,
    j_gate,
    oracle_output_probability,
    run_pattern,
    rx,
    rz,
    wire_angles,
    zxz_angles,
)
from mobqc.protocol import AliceSecret, InputBlock
from mobqc.qsim import H, X, StateVector, partial_trace, random_statevector, random_unitary

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def honest_state(graph, secret, psi):
    return attach_input(secret.apply(InputBlock(psi).block()), graph)


def equal_up_to_phase(a, b):
    k = np.argmax(np.abs(b))
    phase = a.flat[k] / b.flat[k]
    return abs(abs(phase) - 1) < 1e-9 and np.allclose(a, phase * b, atol=1e-9)


class TestGateSynthesis:
    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_zxz_decomposition(self, seed):
        u = random_unitary(2, np.random.default_rng(seed))
        gamma, a, b = zxz_angles(u)
        assert equal_up_to_phase(rz(gamma) @ rx(a) @ rz(b), u)

    @pytest.mark.parametrize("u", [np.eye(2), H, X, rx(0.3), rz(1.1) @ rx(0.4)])
    def test_zxz_special_cases(self, u):
        gamma, a, b = zxz_angles(u)
        assert equal_up_to_phase(rz(gamma) @ rx(a) @ rz(b), np.asarray(u, dtype=complex))

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(2, 6))
    def test_wire_angles_realize_unitary(self, seed, length):
        u = random_unitary(2, np.random.default_rng(seed))
        w = np.eye(2, dtype=complex)
        for th in wire_angles(u, length):
            w = j_gate(th) @ w
        # equal up to a Z rotation applied after u
        m = w @ u.conj().T
        assert abs(m[0, 1]) < 1e-9 and abs(m[1, 0]) < 1e-9

    def test_single_step_needs_xy_readout(self):
        assert len(wire_angles(H, 1)) == 1
        with pytest.raises(PatternError):
            wire_angles(np.eye(2), 1)

    def test_empty_wire(self):
        with pytest.raises(PatternError):
            wire_angles(np.eye(2), 0)


class TestPatternStructure:
    def test_every_qubit_measured_once(self, chain):
        secret = AliceSecret.trivial(3)
        pattern = compile_wire_pattern(chain, secret.permutation, secret.pad_x, secret.pad_z,
                                       np.eye(2))
        measured = sorted(s.vertex for s in pattern.steps)
        assert sorted(measured + [pattern.output_vertex]) == list(range(6))
        for i, step in enumerate(pattern.steps):
            assert all(d < i for d in step.x_deps | step.z_deps)

    def test_wire_starts_at_logical_qubit(self, chain):
        pattern = compile_wire_pattern(chain, (2, 0, 1), (0, 0, 0), (0, 0, 0), np.eye(2))
        assert pattern.wire[0] == 2
        assert pattern.wire[-1] == pattern.output_vertex

    def test_output_partner_extends_wire(self, chain):
        # logical qubit sits on V2 vertex 2 whose partner is the output vertex
        pattern = compile_wire_pattern(chain, (2, 0, 1), (0, 0, 0), (0, 0, 0), np.eye(2))
        assert len(pattern.wire) == 3

    def test_rejects_double_measurement(self):
        with pytest.raises(PatternError):
            MeasurementPattern(2, (PatternStep(0, "Z"), PatternStep(0, "Z")), 1)

    def test_rejects_forward_dependency(self):
        with pytest.raises(PatternError):
            MeasurementPattern(3, (PatternStep(0, "XY", 0.0, frozenset({1})), PatternStep(1, "Z")), 2)

    def test_rejects_missing_qubit(self):
        with pytest.raises(PatternError):
            MeasurementPattern(3, (PatternStep(0, "Z"),), 2)

    def test_size_mismatch(self, chain, rng):
        secret = AliceSecret.trivial(3)
        pattern = compile_wire_pattern(chain, secret.permutation, secret.pad_x, secret.pad_z,
                                       np.eye(2))
        with pytest.raises(PatternError):
            run_pattern(pattern, random_statevector(3, rng), rng)

    def test_isolated_vertex_rejected(self):
        g = ProtocolGraph.from_lists(3, 1, [], [(0, 0), (1, 1), (2, 2)], 2)
        with pytest.raises(PatternError):
            compile_wire_pattern(g, (2, 0, 1), (0, 0, 0), (0, 0, 0), np.eye(2))


class TestPatternSemantics:
    @pytest.mark.parametrize("label, expected", [("1", 1.0), ("0", 0.0), ("+", 0.5)])
    def test_identity_on_basis_inputs(self, chain, label, expected):
        psi = StateVector.from_label(label)
        for secret in list(AliceSecret.enumerate_all(3))[::7]:
            pattern = compile_wire_pattern(chain, secret.permutation, secret.pad_x,
                                           secret.pad_z, np.eye(2))
            p = exact_output_probability(pattern, honest_state(chain, secret, psi))
            assert p == pytest.approx(expected, abs=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.sampled_from([3, 4, 5]))
    def test_matches_oracle_for_any_secret(self, seed, n):
        rng = np.random.default_rng(seed)
        graph = ProtocolGraph.chain(n, 1)
        psi = random_statevector(1, rng)
        u = random_unitary(2, rng)
        secret = AliceSecret.random(3, rng)
        pattern = compile_wire_pattern(graph, secret.permutation, secret.pad_x, secret.pad_z, u)
        got = exact_output_probability(pattern, honest_state(graph, secret, psi))
        assert got == pytest.approx(oracle_output_probability(psi.to_density(), u), abs=1e-10)

    def test_hadamard_on_zero(self, chain):
        secret = AliceSecret((1, 2, 0), (1, 0, 1), (0, 1, 1))
        pattern = compile_wire_pattern(chain, secret.permutation, secret.pad_x, secret.pad_z, H)
        p = exact_output_probability(pattern, honest_state(chain, secret, StateVector.from_label("0")))
        assert p == pytest.approx(0.5, abs=1e-10)

    def test_sampling_matches_exact(self):
        rng = np.random.default_rng(2024)
        graph = ProtocolGraph.chain(4, 1)
        psi = random_statevector(1, rng)
        u = rx(0.9)
        secret = AliceSecret.random(3, rng)
        pattern = compile_wire_pattern(graph, secret.permutation, secret.pad_x, secret.pad_z, u)
        state = honest_state(graph, secret, psi)
        exact = exact_output_probability(pattern, state)
        n = 4000
        hits = sum(run_pattern(pattern, state, rng) for _ in range(n))
        assert abs(hits / n - exact) <= 5 * math.sqrt(exact * (1 - exact) / n) + 1e-12

    def test_vector_and_density_paths_agree(self, chain):
        secret = AliceSecret((0, 2, 1), (1, 1, 0), (0, 1, 0))
        pattern = compile_wire_pattern(chain, secret.permutation, secret.pad_x, secret.pad_z, H)
        state = honest_state(chain, secret, StateVector.from_label("+"))
        for seed in range(10):
            a = run_pattern(pattern, state, np.random.default_rng(seed))
            b = run_pattern(pattern, state.to_density(), np.random.default_rng(seed))
            assert a == b

    def test_oracle_on_reduced_state(self, rng):
        psi = random_statevector(1, rng)
        u = random_unitary(2, rng)
        direct = abs((u @ psi.data)[1]) ** 2
        assert oracle_output_probability(psi.to_density(), u) == pytest.approx(direct)

    def test_check_pattern_graph_passes_on_chain(self, chain):
        mbqc.check_pattern_graph(chain, H, 3)

    def test_partial_trace_helper_consistency(self, rng):
        # logical qubit 0 of the block is psi itself
        psi = random_statevector(1, rng)
        block = InputBlock(psi).block()
        assert np.allclose(partial_trace(block, [0]).data, psi.to_density().data, atol=1e-12)
