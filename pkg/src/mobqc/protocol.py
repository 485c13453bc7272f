"""Alice/Bob protocol: padding, server strategies, the three test branches.

Alice pads ``|Psi> = |psi> (x) |0>^m (x) |+>^m`` with a secret qubit
permutation and a Pauli one-time pad, Bob returns a ``3m + N`` qubit state,
and Alice runs one of: the delegated computation, the stabilizer test, or
the input-state (trap) test.
"""

from __future__ import annotations

import enum
import hashlib
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from . import mbqc
from .graphs import (
    ProtocolGraph,
    StabilizerGeneratorSet,
    attach_density,
    coupled_stabilizer_generators,
)
from .qsim import (
    KET_0,
    KET_PLUS,
    DensityOperator,
    PauliString,
    PovmElement,
    QuantumStateError,
    State,
    StateVector,
    Z,
    apply_cz_layer,
    apply_kraus,
    apply_pauli_string,
    apply_single_qubit_gate,
    as_density,
    check_kraus,
    measure_qubit,
    partial_trace,
    permute_qubits,
    purify_if_pure,
)
from .stabtest import exact_pass_probability, run_stabilizer_test


class Branch(str, enum.Enum):
    COMPUTE = "compute"
    STAB_TEST = "stab_test"
    INPUT_TEST = "input_test"


# ---------------------------------------------------------------------------
# Alice's side


@dataclass(frozen=True)
class AliceSecret:
    """Permutation (logical qubit ``i`` -> physical ``permutation[i]``) and pad bits."""

    permutation: tuple
    pad_x: tuple
    pad_z: tuple

    def __post_init__(self):
        n = len(self.permutation)
        if sorted(self.permutation) != list(range(n)):
            raise ValueError(f"{self.permutation} is not a permutation")
        if len(self.pad_x) != n or len(self.pad_z) != n:
            raise ValueError("pad lengths must equal the permutation size")

    @property
    def size(self) -> int:
        return len(self.permutation)

    @classmethod
    def random(cls, size: int, rng: np.random.Generator) -> "AliceSecret":
        perm = tuple(int(p) for p in rng.permutation(size))
        bits = rng.integers(0, 2, size=2 * size)
        return cls(perm, tuple(int(b) for b in bits[:size]), tuple(int(b) for b in bits[size:]))

    @classmethod
    def trivial(cls, size: int) -> "AliceSecret":
        return cls(tuple(range(size)), (0,) * size, (0,) * size)

    @classmethod
    def enumerate_all(cls, size: int) -> Iterator["AliceSecret"]:
        for perm in itertools.permutations(range(size)):
            for bits in itertools.product((0, 1), repeat=2 * size):
                yield cls(perm, bits[:size], bits[size:])

    def pad_string(self) -> PauliString:
        """``(x)_j X_j^{x_j} Z_j^{z_j}`` as a (possibly complex-signed) Pauli string."""
        xs = PauliString("".join("X" if b else "I" for b in self.pad_x))
        zs = PauliString("".join("Z" if b else "I" for b in self.pad_z))
        return xs * zs

    def apply(self, state: State) -> State:
        """Permute then pad."""
        return apply_pauli_string(permute_qubits(state, self.permutation), self.pad_string())

    def undo(self, state: State) -> State:
        """Remove the pad, then the permutation."""
        unpadded = apply_pauli_string(state, self.pad_string().dagger())
        inv = [0] * self.size
        for i, p in enumerate(self.permutation):
            inv[p] = i
        return permute_qubits(unpadded, inv)

    def digest(self) -> str:
        raw = ",".join(map(str, self.permutation + self.pad_x + self.pad_z)).encode()
        return hashlib.sha256(raw).hexdigest()[:12]


@dataclass(frozen=True)
class InputBlock:
    """Alice's unknown ``m``-qubit input."""

    psi: StateVector

    @property
    def m(self) -> int:
        return self.psi.n_qubits

    def block(self) -> StateVector:
        """``|psi> (x) |0>^m (x) |+>^m``."""
        traps = np.array([1.0 + 0j])
        for ket in [KET_0] * self.m + [KET_PLUS] * self.m:
            traps = np.kron(traps, ket)
        return StateVector(np.kron(self.psi.data, traps), validate=False)

    def trap_projector(self) -> PovmElement:
        """``I^m (x) |0><0|^m (x) |+><+|^m`` on the ``3m`` block."""
        zero = np.outer(KET_0, KET_0.conj())
        plus = np.outer(KET_PLUS, KET_PLUS.conj())
        out = np.eye(1 << self.m, dtype=complex)
        for p in [zero] * self.m + [plus] * self.m:
            out = np.kron(out, p)
        return PovmElement(out, validate=False)

    def block_projector(self) -> PovmElement:
        b = self.block().data
        return PovmElement(np.outer(b, b.conj()), validate=False)

    def wrong_input_projector(self) -> PovmElement:
        """``(I - |psi><psi|) (x) |0><0|^m (x) |+><+|^m``."""
        return PovmElement(self.trap_projector().data - self.block_projector().data, validate=False)


def alice_prepare(input_block: InputBlock, rng: np.random.Generator,
                  secret: AliceSecret | None = None):
    """Return ``(padded_state, secret)`` with ``padded = pad . P |Psi>``."""
    if secret is None:
        secret = AliceSecret.random(3 * input_block.m, rng)
    return secret.apply(input_block.block()), secret


# ---------------------------------------------------------------------------
# Bob's side


class BobStrategy:
    """Server behaviour: maps Alice's padded block to the state Bob sends back."""

    name = "abstract"

    def respond(self, padded_input: DensityOperator, graph: ProtocolGraph) -> DensityOperator:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name}


@dataclass(frozen=True)
class Honest(BobStrategy):
    name = "honest"

    def respond(self, padded_input, graph):
        return attach_density(padded_input, graph)


@dataclass(frozen=True, eq=False)
class ReplaceInput(BobStrategy):
    """Discards Alice's block and couples ``substitute`` instead."""

    substitute: DensityOperator
    name = "replace-input"

    def respond(self, padded_input, graph):
        return attach_density(self.substitute, graph)


@dataclass(frozen=True, eq=False)
class ChannelOnInput(BobStrategy):
    """Applies a CPTP map to Alice's block before coupling it."""

    kraus_ops: tuple
    label: str = "channel"
    name = "channel"

    def __post_init__(self):
        ops = [np.asarray(k, dtype=complex) for k in self.kraus_ops]
        check_kraus(ops, ops[0].shape[0] if ops else 0)
        object.__setattr__(self, "kraus_ops", tuple(ops))

    @classmethod
    def pauli(cls, letters: str) -> "ChannelOnInput":
        return cls((PauliString(letters).matrix(),), label=f"pauli:{letters}")

    def respond(self, padded_input, graph):
        if self.kraus_ops[0].shape[0] != 1 << padded_input.n_qubits:
            raise QuantumStateError("Kraus operators do not match the input block size")
        return attach_density(apply_kraus(padded_input, self.kraus_ops), graph)

    def describe(self) -> dict:
        return {"name": self.name, "label": self.label, "n_kraus": len(self.kraus_ops)}


@dataclass(frozen=True)
class WrongGraph(BobStrategy):
    """Couples the honest block to a different graph of the same size."""

    alternative: ProtocolGraph
    name = "wrong-graph"

    def respond(self, padded_input, graph):
        if (self.alternative.v1_count, self.alternative.v2_count) != (graph.v1_count, graph.v2_count):
            raise QuantumStateError("alternative graph must have the same vertex counts")
        return attach_density(padded_input, self.alternative)


@dataclass(frozen=True, eq=False)
class ArbitraryState(BobStrategy):
    """Ignores Alice's block and sends ``rho`` verbatim."""

    rho: DensityOperator
    name = "arbitrary"

    def respond(self, padded_input, graph):
        if self.rho.n_qubits != graph.n_total:
            raise QuantumStateError(
                f"arbitrary state has {self.rho.n_qubits} qubits, protocol needs {graph.n_total}")
        return self.rho


def bob_respond(strategy: BobStrategy, padded_input: State, graph: ProtocolGraph) -> DensityOperator:
    padded = as_density(padded_input)
    if padded.n_qubits != graph.v2_count:
        raise QuantumStateError(
            f"padded block has {padded.n_qubits} qubits, V2 has {graph.v2_count}")
    return strategy.respond(padded, graph)


# ---------------------------------------------------------------------------
# The delegated computation


@dataclass(frozen=True, eq=False)
class DecisionInstance:
    """Single-qubit computation ``U`` on logical input qubit 0, accept on output 1.

    ``a`` and ``b`` are the declared yes/no acceptance thresholds; in amplified
    form ``a = 1 - 2^-r`` and ``b = 2^-r``.
    """

    unitary: np.ndarray
    a: float
    b: float
    r: int | None = None
    label: str = "custom"

    @classmethod
    def amplified(cls, unitary, r: int, label: str = "custom") -> "DecisionInstance":
        return cls(np.asarray(unitary, dtype=complex), 1 - 2.0 ** -r, 2.0 ** -r, r, label)

    def compile(self, graph: ProtocolGraph, secret: AliceSecret) -> mbqc.MeasurementPattern:
        return mbqc.compile_wire_pattern(graph, secret.permutation, secret.pad_x,
                                         secret.pad_z, self.unitary)

    def oracle_probability(self, input_block: InputBlock) -> float:
        """Direct statevector evaluation of ``Pr[output = 1]``."""
        out = apply_single_qubit_gate(input_block.psi, 0, self.unitary)
        amps = out.data.reshape(2, -1)
        return float(np.sum(np.abs(amps[1]) ** 2))


def branch_compute(state: DensityOperator, secret: AliceSecret, instance: DecisionInstance,
                   graph: ProtocolGraph, rng: np.random.Generator) -> bool:
    pattern = instance.compile(graph, secret)
    return mbqc.run_pattern(pattern, state, rng) == 1


def exact_compute_probability(state: DensityOperator, secret: AliceSecret,
                              instance: DecisionInstance, graph: ProtocolGraph) -> float:
    return mbqc.exact_output_probability(instance.compile(graph, secret), state)


# ---------------------------------------------------------------------------
# The input-state test


def _check_state(state: DensityOperator, graph: ProtocolGraph) -> None:
    if state.n_qubits != graph.n_total:
        raise QuantumStateError(f"state has {state.n_qubits} qubits, protocol needs {graph.n_total}")


def input_test_state(state: State, secret: AliceSecret, graph: ProtocolGraph) -> DensityOperator:
    """Exact V2 state right before the trap measurement.

    Z-measuring V1 and applying the conditional Z corrections equals undoing
    the connecting CZs and tracing V1 out.
    """
    rho = as_density(state)
    _check_state(rho, graph)
    for j in range(graph.v2_count):
        graph.match_of_v2(j)
    decoupled = apply_cz_layer(rho, graph.connect_pairs())
    return as_density(secret.undo(partial_trace(decoupled, graph.v2_vertices())))


def exact_input_pass_probability(state: State, secret: AliceSecret, graph: ProtocolGraph,
                                 input_block: InputBlock) -> float:
    before = input_test_state(state, secret, graph)
    return input_block.trap_projector().probability(before)


def branch_input_test(state: DensityOperator, secret: AliceSecret, graph: ProtocolGraph,
                      input_block: InputBlock, rng: np.random.Generator) -> bool:
    """Measure V1 in Z one qubit at a time, correct V2, undo the secret, test the traps."""
    rho = as_density(state)
    _check_state(rho, graph)
    alive = list(range(rho.n_qubits))
    bits = {}
    for q in graph.v1_vertices():
        pos = alive.index(q)
        bits[q], rho = measure_qubit(rho, pos, rng, discard=True)
        alive.pop(pos)
    for j in range(graph.v2_count):
        if bits[graph.v1_global(graph.match_of_v2(j))]:
            rho = apply_single_qubit_gate(rho, alive.index(j), Z)
    before = as_density(secret.undo(rho))
    p_pass = input_block.trap_projector().probability(before)
    return bool(rng.random() < p_pass)


# ---------------------------------------------------------------------------
# Trials


@dataclass
class TrialOutcome:
    branch: Branch
    accepted: bool
    secret_digest: str
    diagnostics: dict = field(default_factory=dict)

    def as_record(self, index: int) -> dict:
        return {"trial": index, "branch": self.branch.value, "accepted": self.accepted,
                "secret": self.secret_digest, **self.diagnostics}


def sample_branch(q: float, rng: np.random.Generator) -> Branch:
    u = rng.random()
    if u < q:
        return Branch.COMPUTE
    if u < q + (1 - q) / 2:
        return Branch.STAB_TEST
    return Branch.INPUT_TEST


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Counter-based stream keyed by ``(master_seed, trial_index)``."""
    key = np.array([master_seed & 0xFFFFFFFFFFFFFFFF, trial_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class Protocol:
    """Fixed protocol setting: instance, input, graph and server strategy."""

    def __init__(self, instance: DecisionInstance, input_block: InputBlock,
                 graph: ProtocolGraph, strategy: BobStrategy):
        if graph.v2_count != 3 * input_block.m:
            raise QuantumStateError(
                f"graph V2 has {graph.v2_count} qubits, input block needs {3 * input_block.m}")
        mbqc.check_pattern_graph(graph, instance.unitary, graph.v2_count)
        self.instance = instance
        self.input_block = input_block
        self.graph = graph
        self.strategy = strategy
        self.generators: StabilizerGeneratorSet = coupled_stabilizer_generators(graph)
        self._cache: dict = {}
        self._patterns: dict = {}
        self._sampling: dict = {}

    def server_state(self, secret: AliceSecret) -> DensityOperator:
        key = (secret.permutation, secret.pad_x, secret.pad_z)
        if key not in self._cache:
            padded, _ = alice_prepare(self.input_block, None, secret)
            self._cache[key] = bob_respond(self.strategy, padded, self.graph)
        return self._cache[key]

    def sampling_state(self, secret: AliceSecret):
        """Server state as a state vector when it is pure (cheaper to measure)."""
        key = (secret.permutation, secret.pad_x, secret.pad_z)
        if key not in self._sampling:
            self._sampling[key] = purify_if_pure(self.server_state(secret))
        return self._sampling[key]

    def pattern(self, secret: AliceSecret) -> mbqc.MeasurementPattern:
        key = (secret.permutation, secret.pad_x, secret.pad_z)
        if key not in self._patterns:
            self._patterns[key] = self.instance.compile(self.graph, secret)
        return self._patterns[key]

    def run_trial(self, q: float, rng: np.random.Generator,
                  secret: AliceSecret | None = None) -> TrialOutcome:
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"q = {q} outside [0, 1]")
        if secret is None:
            secret = AliceSecret.random(self.graph.v2_count, rng)
        # Bob's state is fixed before the branch is drawn.
        state = self.server_state(secret)
        branch = sample_branch(q, rng)
        diag: dict = {}
        if branch is Branch.COMPUTE:
            pure = self.sampling_state(secret)
            accepted = mbqc.run_pattern(self.pattern(secret), pure, rng) == 1
        elif branch is Branch.STAB_TEST:
            rec = run_stabilizer_test(state, self.generators, rng)
            accepted = rec.passed
            diag["subset"] = "".join(map(str, rec.subset_bits))
        else:
            accepted = branch_input_test(state, secret, self.graph, self.input_block, rng)
        return TrialOutcome(branch, accepted, secret.digest(), diag)

    def exact_branch_probabilities(self, secret: AliceSecret) -> tuple[float, float, float]:
        """``(Pr[compute accepts], p_Gpass, p_psipass)`` for one secret."""
        state = self.server_state(secret)
        p_c = mbqc.exact_output_probability(self.pattern(secret), state)
        p_g = exact_pass_probability(state, self.generators, method="projector")
        p_psi = exact_input_pass_probability(state, secret, self.graph, self.input_block)
        return p_c, p_g, p_psi


def run_trial(instance: DecisionInstance, input_block: InputBlock, graph: ProtocolGraph,
              strategy: BobStrategy, q: float, rng: np.random.Generator) -> TrialOutcome:
    return Protocol(instance, input_block, graph, strategy).run_trial(q, rng)


@dataclass
class AcceptanceEstimate:
    """Aggregated acceptance statistics (sample or exact)."""

    p_acc: float
    se_acc: float
    p_compute: float
    se_compute: float
    p_gpass: float
    se_gpass: float
    p_psipass: float
    se_psipass: float
    counts: dict
    accepted: dict
    trials: int
    mode: str = "sample"


def _se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n) if n else float("nan")


def _ratio(a: int, n: int) -> float:
    return a / n if n else float("nan")


def _run_chunk(args) -> tuple[dict, dict, list]:
    protocol, q, seed, indices, keep_records = args
    counts = {b: 0 for b in Branch}
    accepted = {b: 0 for b in Branch}
    records = []
    for i in indices:
        out = protocol.run_trial(q, trial_rng(seed, i))
        counts[out.branch] += 1
        accepted[out.branch] += int(out.accepted)
        if keep_records:
            records.append(out.as_record(i))
    return counts, accepted, records


def summarize_counts(counts: dict, accepted: dict, trials: int) -> AcceptanceEstimate:
    total_acc = sum(accepted.values())
    p_acc = total_acc / trials
    p_c = _ratio(accepted[Branch.COMPUTE], counts[Branch.COMPUTE])
    p_g = _ratio(accepted[Branch.STAB_TEST], counts[Branch.STAB_TEST])
    p_psi = _ratio(accepted[Branch.INPUT_TEST], counts[Branch.INPUT_TEST])
    return AcceptanceEstimate(
        p_acc, _se(p_acc, trials),
        p_c, _se(p_c, counts[Branch.COMPUTE]),
        p_g, _se(p_g, counts[Branch.STAB_TEST]),
        p_psi, _se(p_psi, counts[Branch.INPUT_TEST]),
        {b.value: counts[b] for b in Branch}, {b.value: accepted[b] for b in Branch},
        trials, "sample")


def estimate_acceptance(protocol: Protocol, q: float, trials: int, seed: int,
                        workers: int = 1,
                        on_record: Callable[[dict], None] | None = None) -> AcceptanceEstimate:
    """Monte-Carlo acceptance over ``trials`` independent trials.

    Trial ``i`` draws everything from ``trial_rng(seed, i)``, so the result
    does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    keep = on_record is not None
    if workers <= 1:
        chunks = [_run_chunk((protocol, q, seed, range(trials), keep))]
    else:
        bounds = np.linspace(0, trials, workers + 1).astype(int)
        jobs = [(protocol, q, seed, range(lo, hi), keep) for lo, hi in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_chunk, jobs))
    counts = {b: sum(c[0][b] for c in chunks) for b in Branch}
    accepted = {b: sum(c[1][b] for c in chunks) for b in Branch}
    if keep:
        for c in chunks:
            for rec in c[2]:
                on_record(rec)
    return summarize_counts(counts, accepted, trials)


def exact_acceptance(protocol: Protocol, q: float,
                     secrets: Iterable[AliceSecret] | None = None) -> AcceptanceEstimate:
    """Exact branch probabilities averaged uniformly over ``secrets``
    (all permutations and pads by default)."""
    if secrets is None:
        secrets = AliceSecret.enumerate_all(protocol.graph.v2_count)
    sums = np.zeros(3)
    n = 0
    for secret in secrets:
        sums += protocol.exact_branch_probabilities(secret)
        n += 1
    p_c, p_g, p_psi = sums / n
    p_acc = q * p_c + (1 - q) / 2 * (p_g + p_psi)
    zero = {b.value: 0 for b in Branch}
    return AcceptanceEstimate(p_acc, 0.0, p_c, 0.0, p_g, 0.0, p_psi, 0.0,
                              dict(zero), dict(zero), n, "exact")


def pad_average(input_block: InputBlock, permutation: Sequence[int]) -> DensityOperator:
    """Average of the transmitted block over all ``4^{3m}`` pads at fixed permutation."""
    size = 3 * input_block.m
    acc = None
    count = 0
    for bits in itertools.product((0, 1), repeat=2 * size):
        secret = AliceSecret(tuple(permutation), bits[:size], bits[size:])
        rho = as_density(secret.apply(input_block.block())).data
        acc = rho if acc is None else acc + rho
        count += 1
    return DensityOperator(acc / count, validate=False)
