"""Randomized stabilizer test and its closeness guarantees."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .graphs import StabilizerGeneratorSet
from .qsim import (
    ATOL,
    DensityOperator,
    PauliString,
    PovmElement,
    QuantumStateError,
    State,
    apply_pauli_string,
    as_density,
    expectation_pauli,
    measure_pauli_string,
    pauli_left,
    trace_distance,
)

ENUMERATION_LIMIT = 12


class ZeroAcceptance(ValueError):
    """The stabilized projection of the state vanishes, so no renormalized state exists."""


@dataclass(frozen=True)
class StabilizerTestRecord:
    subset_bits: tuple[int, ...]
    measured_operator: PauliString
    outcome: int

    @property
    def passed(self) -> bool:
        return self.outcome == 1


@dataclass(frozen=True)
class ClosenessEnvelope:
    epsilon: float
    lower: float
    upper: float

    def contains(self, value: float, atol: float = ATOL) -> bool:
        return self.lower - atol <= value <= self.upper + atol

    def clamped(self) -> "ClosenessEnvelope":
        return ClosenessEnvelope(self.epsilon, min(max(self.lower, 0.0), 1.0),
                                 min(max(self.upper, 0.0), 1.0))


def _check(state: DensityOperator, gens: StabilizerGeneratorSet) -> None:
    if state.n_qubits != gens.n_qubits:
        raise QuantumStateError(
            f"state has {state.n_qubits} qubits, generators act on {gens.n_qubits}")
    gens.check_commuting()


def run_stabilizer_test(state: State, gens: StabilizerGeneratorSet,
                        rng: np.random.Generator) -> StabilizerTestRecord:
    """Draw ``k`` uniformly, measure ``s_k``, pass on outcome ``+1``."""
    rho = as_density(state)
    _check(rho, gens)
    bits = tuple(int(b) for b in rng.integers(0, 2, size=gens.n))
    s_k = gens.product(bits)
    if s_k.is_identity():
        outcome = 1 if s_k.sign == 1 else -1
    else:
        outcome, _ = measure_pauli_string(rho, s_k, rng)
    return StabilizerTestRecord(bits, s_k, outcome)


def pass_probability_enumerated(state: State, gens: StabilizerGeneratorSet) -> float:
    """Average of ``Tr((I + s_k)/2 rho)`` over all ``2^n`` subsets."""
    rho = as_density(state)
    _check(rho, gens)
    if gens.n > ENUMERATION_LIMIT:
        raise ValueError(f"{gens.n} generators exceed the enumeration limit {ENUMERATION_LIMIT}")
    total = 0.0
    for bits in itertools.product((0, 1), repeat=gens.n):
        total += (1.0 + expectation_pauli(rho, gens.product(bits))) / 2
    return total / 2 ** gens.n


def apply_lambda(gens: StabilizerGeneratorSet, matrix: np.ndarray) -> np.ndarray:
    """``Lambda @ matrix`` by successive ``(I + g)/2`` factors."""
    out = matrix
    for g in gens:
        out = (out + pauli_left(g, out)) / 2
    return out


def lambda_trace(state: State, gens: StabilizerGeneratorSet) -> float:
    rho = as_density(state)
    _check(rho, gens)
    return float(np.real(np.trace(apply_lambda(gens, rho.data))))


def pass_probability_projector(state: State, gens: StabilizerGeneratorSet) -> float:
    """``(1 + Tr(Lambda rho)) / 2``."""
    return (1.0 + lambda_trace(state, gens)) / 2


def exact_pass_probability(state: State, gens: StabilizerGeneratorSet,
                           method: str = "auto") -> float:
    """Exact stabilizer-test pass probability.

    ``method`` is ``"enumerate"``, ``"projector"`` or ``"auto"`` (enumeration
    up to 12 generators, the projector identity beyond).
    """
    if method == "enumerate" or (method == "auto" and gens.n <= ENUMERATION_LIMIT):
        return pass_probability_enumerated(state, gens)
    if method in ("projector", "auto"):
        return pass_probability_projector(state, gens)
    raise ValueError(f"unknown method {method!r}")


def lambda_projector(gens: StabilizerGeneratorSet) -> PovmElement:
    """``prod_j (I + g_j)/2`` as a dense matrix."""
    gens.check_commuting()
    dim = 1 << gens.n_qubits
    return PovmElement(apply_lambda(gens, np.eye(dim, dtype=complex)), validate=False)


def _lambda_sandwich(rho: DensityOperator, gens: StabilizerGeneratorSet) -> np.ndarray:
    left = apply_lambda(gens, rho.data)
    return apply_lambda(gens, left.conj().T).conj().T


def stabilized_state(state: State, gens: StabilizerGeneratorSet) -> DensityOperator:
    """``Lambda rho Lambda / Tr(Lambda rho)``."""
    rho = as_density(state)
    _check(rho, gens)
    sandwich = _lambda_sandwich(rho, gens)
    weight = float(np.real(np.trace(sandwich)))
    if weight < 1e-12:
        raise ZeroAcceptance("Tr(Lambda rho) = 0: the stabilized state is undefined")
    return DensityOperator(sandwich / weight, validate=False)


def gentle_measurement_check(state: State, gens: StabilizerGeneratorSet) -> tuple[float, float]:
    """``(lhs, rhs)`` of ``||rho - Lambda rho Lambda||_1 / 2 <= sqrt(1 - Tr(Lambda rho))``."""
    rho = as_density(state)
    _check(rho, gens)
    sandwich = _lambda_sandwich(rho, gens)
    diff = rho.data - sandwich
    lhs = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))
    weight = float(np.real(np.trace(sandwich)))
    rhs = math.sqrt(max(0.0, 1.0 - weight))
    return lhs, rhs


def closeness_envelope(m_element: PovmElement, sigma: State, epsilon: float) -> ClosenessEnvelope:
    """Interval ``[Tr(M sigma)(1-2e) - sqrt(2e), Tr(M sigma) + sqrt(2e)]``.

    Returned unclamped; use :meth:`ClosenessEnvelope.clamped` for reporting.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon {epsilon} outside [0, 1]")
    m_sigma = m_element.probability(as_density(sigma))
    slack = math.sqrt(2 * epsilon)
    return ClosenessEnvelope(epsilon, m_sigma * (1 - 2 * epsilon) - slack, m_sigma + slack)


def is_stabilized(state: State, gens: StabilizerGeneratorSet, atol: float = ATOL) -> bool:
    rho = as_density(state)
    return all(np.allclose(apply_pauli_string(rho, g).data, rho.data, atol=atol) for g in gens)


def stabilized_distance(state: State, gens: StabilizerGeneratorSet) -> float:
    """Trace distance between ``rho`` and its renormalized stabilized projection."""
    return trace_distance(state, stabilized_state(state, gens))
