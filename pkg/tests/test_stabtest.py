import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mobqc.checks import random_generator_set, states_near_stabilized
from mobqc.graphs import (
    NonCommutingGenerators,
    ProtocolGraph,
    StabilizerGeneratorSet,
    attach_density,
    build_graph_state,
    coupled_stabilizer_generators,
)
from mobqc.qsim import (
    DensityOperator,
    PauliString,
    PovmElement,
    StateVector,
    apply_pauli_string,
    expectation_pauli,
    random_density,
    random_povm_element,
)
from mobqc.stabtest import (
    ClosenessEnvelope,
    ZeroAcceptance,
    closeness_envelope,
    exact_pass_probability,
    gentle_measurement_check,
    is_stabilized,
    lambda_projector,
    lambda_trace,
    pass_probability_enumerated,
    pass_probability_projector,
    run_stabilizer_test,
    stabilized_state,
)

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def two_vertex():
    g = ProtocolGraph.from_lists(2, 0, [(0, 1)], [], 0)
    return g, coupled_stabilizer_generators(g)


class TestRunStabilizerTest:
    def test_honest_always_passes(self, rng, chain):
        gens = coupled_stabilizer_generators(chain)
        rho = attach_density(StateVector.from_label("1+0"), chain)
        assert all(run_stabilizer_test(rho, gens, rng).passed for _ in range(100))

    def test_operator_is_subset_product(self, rng, chain):
        gens = coupled_stabilizer_generators(chain)
        rho = attach_density(StateVector.from_label("000"), chain)
        for _ in range(20):
            rec = run_stabilizer_test(rho, gens, rng)
            assert rec.measured_operator == gens.product(rec.subset_bits)
            assert rec.passed == (rec.outcome == 1)

    def test_identity_subset_passes_anything(self, rng):
        gens = StabilizerGeneratorSet([PauliString("Z")])
        rho = StateVector.from_label("1").to_density()
        recs = [run_stabilizer_test(rho, gens, rng) for _ in range(200)]
        assert all(r.passed == (r.subset_bits == (0,)) for r in recs)

    def test_x_error_sampling(self):
        g, gens = two_vertex()
        rho = apply_pauli_string(build_graph_state(g), PauliString("XI")).to_density()
        rng = np.random.default_rng(11)
        n = 20000
        passes = sum(run_stabilizer_test(rho, gens, rng).passed for _ in range(n))
        assert abs(passes / n - 0.5) <= 5 * 0.5 / math.sqrt(n)

    def test_non_commuting_rejected(self, rng):
        gens = StabilizerGeneratorSet([PauliString("X"), PauliString("Z")], check=False)
        with pytest.raises(NonCommutingGenerators):
            run_stabilizer_test(StateVector.from_label("0"), gens, rng)

    def test_sampling_consistency(self):
        rng = np.random.default_rng(99)
        gens = random_generator_set(3, rng)
        rho = random_density(3, rng)
        exact = exact_pass_probability(rho, gens)
        n = 10 ** 5
        bits = rng.integers(0, 2, size=(n, gens.n))
        # Born-rule pass probability of each drawn subset
        table = {row: (1 + expectation_pauli(rho, gens.product(row))) / 2
                 for row in {tuple(b) for b in bits}}
        probs = np.array([table[tuple(b)] for b in bits])
        hits = rng.random(n) < probs
        se = math.sqrt(exact * (1 - exact) / n)
        assert abs(hits.mean() - exact) <= 5 * se


class TestExactPassProbability:
    def test_honest_is_one(self, chain):
        gens = coupled_stabilizer_generators(chain)
        rho = attach_density(StateVector.from_label("+01"), chain)
        assert exact_pass_probability(rho, gens) == pytest.approx(1, abs=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_maximally_mixed(self, n):
        g = ProtocolGraph.chain(n, 0)
        gens = coupled_stabilizer_generators(g)
        rho = DensityOperator.maximally_mixed(n)
        assert exact_pass_probability(rho, gens) == pytest.approx((1 + 2 ** -n) / 2, abs=1e-10)

    def test_single_x_error(self):
        g, gens = two_vertex()
        rho = apply_pauli_string(build_graph_state(g), PauliString("XI"))
        assert exact_pass_probability(rho, gens) == pytest.approx(0.5, abs=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(1, 4))
    def test_enumeration_matches_projector(self, seed, n):
        rng = np.random.default_rng(seed)
        gens = random_generator_set(n, rng)
        rho = random_density(n, rng)
        enum = exact_pass_probability(rho, gens, method="enumerate")
        proj = exact_pass_probability(rho, gens, method="projector")
        assert enum == pytest.approx(proj, abs=1e-10)
        assert proj == pytest.approx((1 + lambda_trace(rho, gens)) / 2, abs=1e-12)

    def test_unknown_method(self, chain):
        gens = coupled_stabilizer_generators(chain)
        with pytest.raises(ValueError):
            exact_pass_probability(DensityOperator.maximally_mixed(6), gens, method="guess")

    def test_auto_switches_to_projector_beyond_limit(self, monkeypatch, chain):
        import mobqc.stabtest as stabtest
        monkeypatch.setattr(stabtest, "ENUMERATION_LIMIT", 2)
        gens = coupled_stabilizer_generators(chain)
        rho = DensityOperator.maximally_mixed(6)
        with pytest.raises(ValueError, match="enumeration limit"):
            pass_probability_enumerated(rho, gens)
        assert exact_pass_probability(rho, gens) == pytest.approx(
            pass_probability_projector(rho, gens), abs=1e-12)


class TestLambdaProjector:
    def test_single_z(self):
        proj = lambda_projector(StabilizerGeneratorSet([PauliString("Z")])).data
        assert np.allclose(proj, [[1, 0], [0, 0]])

    def test_two_z(self):
        proj = lambda_projector(StabilizerGeneratorSet([PauliString("ZI"), PauliString("IZ")])).data
        expected = np.zeros((4, 4))
        expected[0, 0] = 1
        assert np.allclose(proj, expected)

    def test_graph_state_rank_one(self):
        g = ProtocolGraph.chain(3, 0)
        proj = lambda_projector(coupled_stabilizer_generators(g)).data
        psi = build_graph_state(g).data
        assert np.allclose(proj, np.outer(psi, psi.conj()), atol=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.integers(1, 4))
    def test_projector_properties(self, seed, n):
        rng = np.random.default_rng(seed)
        gens = random_generator_set(n, rng)
        lam = lambda_projector(gens).data
        assert np.allclose(lam @ lam, lam, atol=1e-10)
        assert np.allclose(lam, lam.conj().T, atol=1e-10)
        for g in gens:
            assert np.allclose(lam @ g.matrix(), lam, atol=1e-10)

    def test_non_commuting(self):
        gens = StabilizerGeneratorSet([PauliString("X"), PauliString("Z")], check=False)
        with pytest.raises(NonCommutingGenerators):
            lambda_projector(gens)


class TestGentleMeasurement:
    def test_stabilized_state_is_tight(self, chain):
        gens = coupled_stabilizer_generators(chain)
        lhs, rhs = gentle_measurement_check(attach_density(StateVector.from_label("011"), chain), gens)
        assert lhs == pytest.approx(0, abs=1e-10)
        assert rhs == pytest.approx(0, abs=1e-6)

    def test_orthogonal_support(self):
        gens = StabilizerGeneratorSet([PauliString("Z")])
        lhs, rhs = gentle_measurement_check(StateVector.from_label("1"), gens)
        assert lhs == pytest.approx(0.5)
        assert rhs == pytest.approx(1)

    def test_twenty_random_states(self, rng):
        for _ in range(20):
            gens = random_generator_set(3, rng)
            gens = StabilizerGeneratorSet(gens.generators[:2])
            lhs, rhs = gentle_measurement_check(random_density(3, rng), gens)
            assert lhs <= rhs + 1e-10

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_inequality_property(self, seed):
        rng = np.random.default_rng(seed)
        gens = random_generator_set(3, rng)
        lhs, rhs = gentle_measurement_check(random_density(3, rng), gens)
        assert lhs <= rhs + 1e-10


class TestClosenessEnvelope:
    def test_zero_epsilon(self):
        env = closeness_envelope(random_povm_element(1, np.random.default_rng(0)),
                                 StateVector.from_label("0"), 0.0)
        assert env.lower == pytest.approx(env.upper)

    def test_clamping(self):
        env = closeness_envelope(PovmElement(np.eye(2)), StateVector.from_label("0"), 0.5)
        assert env.lower == pytest.approx(-1)
        assert env.upper == pytest.approx(2)
        assert env.clamped() == ClosenessEnvelope(0.5, 0.0, 1.0)

    def test_epsilon_out_of_range(self):
        with pytest.raises(ValueError):
            closeness_envelope(PovmElement(np.eye(2)), StateVector.from_label("0"), 1.5)

    @pytest.mark.parametrize("eps", [0.01, 0.05, 0.1])
    def test_random_states_inside(self, eps):
        rng = np.random.default_rng(int(eps * 1000))
        gens = random_generator_set(3, rng)
        for rho in states_near_stabilized(gens, eps, 30, rng):
            assert exact_pass_probability(rho, gens) >= 1 - eps - 1e-12
            sigma = stabilized_state(rho, gens)
            assert is_stabilized(sigma, gens)
            m = random_povm_element(3, rng)
            assert closeness_envelope(m, sigma, eps).contains(m.probability(rho))


class TestStabilizedState:
    def test_zero_acceptance(self):
        gens = StabilizerGeneratorSet([PauliString("Z")])
        with pytest.raises(ZeroAcceptance):
            stabilized_state(StateVector.from_label("1"), gens)

    def test_projection_is_stabilized(self, rng):
        gens = random_generator_set(3, rng)
        sigma = stabilized_state(random_density(3, rng), gens)
        sigma.validate()
        assert is_stabilized(sigma, gens)
