"""Adaptive single-qubit measurement patterns on the protocol graph.

A pattern drives one logical qubit of the input block along a wire of the
graph. Every qubit off the wire is measured in ``Z`` and thereby cut out;
wire qubits are measured in the X-Y plane at angles adapted to the Pauli
byproducts accumulated so far; the final wire qubit is read out in ``Z``.

Measuring a wire qubit carrying ``X^x Z^z |phi>`` at angle
``(-1)^x theta + z pi`` with outcome ``s`` leaves ``X^s Z^x J(theta)|phi>``
on the next wire qubit, where ``J(theta) = H diag(1, e^{-i theta})``.
A ``Z`` outcome ``s`` on a cut neighbour adds ``Z^s`` to the wire qubit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graphs import GraphError, ProtocolGraph
from .qsim import (
    H,
    DensityOperator,
    StateVector,
    as_density,
    collapse_qubit,
    measure_qubit,
    qubit_outcome_probabilities,
    xy_basis,
)

PRUNE = 1e-14


class PatternError(ValueError):
    """Pattern inconsistent with the graph or the requested computation."""


def j_gate(theta: float) -> np.ndarray:
    return H @ np.diag([1.0, np.exp(-1j * theta)])


def rz(theta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(-1j * theta)]).astype(complex)


def rx(theta: float) -> np.ndarray:
    return H @ rz(theta) @ H


def zxz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """``(gamma, a, b)`` with ``u`` proportional to ``rz(gamma) rx(a) rz(b)``."""
    u = np.asarray(u, dtype=complex)
    u = u / np.sqrt(np.linalg.det(u))
    c = min(abs(u[0, 0]), 1.0)
    a = 2 * math.acos(c)
    if abs(u[0, 1]) < 1e-12:
        phase = np.angle(u[0, 0])
        b = 0.0
        gamma = phase - np.angle(u[1, 1])
    elif abs(u[0, 0]) < 1e-12:
        b = 0.0
        phase = np.angle(u[0, 1]) - math.pi / 2
        gamma = phase + math.pi / 2 - np.angle(u[1, 0])
    else:
        phase = np.angle(u[0, 0])
        b = phase + math.pi / 2 - np.angle(u[0, 1])
        gamma = phase + math.pi / 2 - np.angle(u[1, 0])
    return float(gamma), float(a), float(b)


def wire_angles(unitary: np.ndarray, length: int) -> list[float]:
    """Angles ``theta_1..theta_L`` whose ``J`` product equals ``unitary``
    up to a trailing ``Z`` rotation (invisible to the final ``Z`` readout)."""
    u = np.asarray(unitary, dtype=complex)
    if length < 1:
        raise PatternError("a wire needs at least one measured qubit")
    if length == 1:
        gamma, a, b = zxz_angles(u)
        if abs(a - math.pi / 2) > 1e-9:
            raise PatternError(
                "a single wire measurement realizes only X-Y plane readouts; "
                "route the wire through at least one more vertex")
        angles = [b - math.pi / 2]
    else:
        v = u @ np.linalg.matrix_power(H, length - 2)
        _, a, b = zxz_angles(v)
        angles = [0.0] * (length - 2) + [b, a]
    # self-check: realized product must match up to a left Z rotation
    w = np.eye(2, dtype=complex)
    for th in angles:
        w = j_gate(th) @ w
    lhs = w @ u.conj().T
    if abs(abs(lhs[0, 0]) - 1) > 1e-8:
        raise PatternError("wire angle synthesis failed")
    return [float(t) for t in angles]


@dataclass(frozen=True)
class PatternStep:
    """One measurement. ``plane`` is ``"XY"`` or ``"Z"``; dependencies are step indices."""

    vertex: int
    plane: str
    angle: float = 0.0
    x_deps: frozenset = frozenset()
    z_deps: frozenset = frozenset()
    x_const: int = 0
    z_const: int = 0

    def adapted_angle(self, outcomes: Sequence[int]) -> float:
        x = self.x_const ^ _xor(outcomes, self.x_deps)
        z = self.z_const ^ _xor(outcomes, self.z_deps)
        return (-1) ** x * self.angle + z * math.pi


def _xor(outcomes: Sequence[int], deps) -> int:
    out = 0
    for d in deps:
        out ^= outcomes[d]
    return out


@dataclass(frozen=True)
class MeasurementPattern:
    n_qubits: int
    steps: tuple
    output_vertex: int
    output_x_deps: frozenset = frozenset()
    output_x_const: int = 0
    wire: tuple = field(default=())

    def __post_init__(self):
        seen = set()
        for i, st in enumerate(self.steps):
            if st.vertex in seen or st.vertex == self.output_vertex:
                raise PatternError(f"vertex {st.vertex} measured twice")
            if any(d >= i for d in st.x_deps | st.z_deps):
                raise PatternError(f"step {i} depends on a later step")
            seen.add(st.vertex)
        if len(seen) + 1 != self.n_qubits:
            raise PatternError("pattern must measure every non-output qubit exactly once")

    def logical_bit(self, outcomes: Sequence[int], raw_output: int) -> int:
        return raw_output ^ self.output_x_const ^ _xor(outcomes, self.output_x_deps)


def compile_wire_pattern(graph: ProtocolGraph, permutation: Sequence[int],
                         pad_x: Sequence[int], pad_z: Sequence[int],
                         unitary: np.ndarray, logical_qubit: int = 0) -> MeasurementPattern:
    """Pattern applying ``unitary`` to one logical input qubit and reading it out.

    The permutation tells where the logical qubit physically sits in V2 and the
    pad bits seed its byproduct. If the qubit's V1 partner is the output vertex
    itself, the wire is extended to the partner's lowest-index neighbour.
    """
    w = permutation[logical_qubit]
    v = graph.match_of_v2(w)
    path = graph.v1_path(v, graph.output_vertex)
    if len(path) == 1:
        nbrs = graph.v1_neighbors(v)
        if not nbrs:
            raise PatternError(f"V1 vertex {v} is isolated; no wire can leave it")
        path = [v, nbrs[0]]
    wire = [graph.v2_global(w)] + [graph.v1_global(p) for p in path]
    on_wire = set(wire)
    angles = wire_angles(unitary, len(wire) - 1)

    steps: list[PatternStep] = []
    zacc = {q: set() for q in wire}
    for u in range(graph.n_total):
        if u in on_wire:
            continue
        t = len(steps)
        steps.append(PatternStep(u, "Z"))
        for nb in graph.global_neighbors(u):
            if nb in on_wire:
                zacc[nb] ^= {t}

    x_const, x_set = int(pad_x[w]), set()
    z_const, z_set = int(pad_z[w]), set(zacc[wire[0]])
    for i, q in enumerate(wire[:-1]):
        t = len(steps)
        steps.append(PatternStep(q, "XY", angles[i], frozenset(x_set), frozenset(z_set),
                                 x_const, z_const))
        nxt = wire[i + 1]
        z_const, z_set = x_const, set(x_set) ^ zacc[nxt]
        x_const, x_set = 0, {t}
    return MeasurementPattern(graph.n_total, tuple(steps), wire[-1],
                              frozenset(x_set), x_const, tuple(wire))


def _step_basis(step: PatternStep, outcomes: Sequence[int]):
    if step.plane == "Z":
        return None
    return xy_basis(step.adapted_angle(outcomes))


def run_pattern(pattern: MeasurementPattern, state, rng: np.random.Generator) -> int:
    """Execute the pattern with sampled outcomes; return the logical output bit."""
    rho = state if isinstance(state, StateVector) else as_density(state)
    if rho.n_qubits != pattern.n_qubits:
        raise PatternError(f"pattern is for {pattern.n_qubits} qubits, state has {rho.n_qubits}")
    alive = list(range(rho.n_qubits))
    outcomes: list[int] = []
    for step in pattern.steps:
        pos = alive.index(step.vertex)
        bit, rho = measure_qubit(rho, pos, rng, basis=_step_basis(step, outcomes), discard=True)
        alive.pop(pos)
        outcomes.append(bit)
    raw, _ = measure_qubit(rho, alive.index(pattern.output_vertex), rng)
    return pattern.logical_bit(outcomes, raw)


def exact_output_probability(pattern: MeasurementPattern, state) -> float:
    """Probability that the logical output bit is 1, by enumerating every branch."""
    rho = as_density(state)
    if rho.n_qubits != pattern.n_qubits:
        raise PatternError(f"pattern is for {pattern.n_qubits} qubits, state has {rho.n_qubits}")

    def recurse(sub: DensityOperator, alive: list[int], outcomes: list[int]) -> float:
        k = len(outcomes)
        if k == len(pattern.steps):
            pos = alive.index(pattern.output_vertex)
            probs = qubit_outcome_probabilities(sub, pos)
            flip = pattern.logical_bit(outcomes, 0)
            return float(probs[1 - flip])
        step = pattern.steps[k]
        pos = alive.index(step.vertex)
        basis = _step_basis(step, outcomes)
        rest = alive[:pos] + alive[pos + 1:]
        total = 0.0
        for bit in (0, 1):
            post = collapse_qubit(sub, pos, bit, basis, discard=True, normalize=False)
            if np.real(np.trace(post.data)) < PRUNE:
                continue
            total += recurse(post, rest, outcomes + [bit])
        return total

    return recurse(rho, list(range(rho.n_qubits)), [])


def oracle_output_probability(psi_reduced: DensityOperator, unitary: np.ndarray) -> float:
    """``<1| U rho U^dag |1>`` on a single logical qubit."""
    u = np.asarray(unitary, dtype=complex)
    out = u @ psi_reduced.data @ u.conj().T
    return float(np.real(out[1, 1]))


def check_pattern_graph(graph: ProtocolGraph, unitary: np.ndarray, three_m: int) -> None:
    """Raise if some placement of the logical qubit admits no valid wire."""
    zeros = [0] * three_m
    for w in range(three_m):
        perm = list(range(three_m))
        perm[0], perm[w] = perm[w], perm[0]
        try:
            compile_wire_pattern(graph, perm, zeros, zeros, unitary)
        except GraphError as exc:
            raise PatternError(str(exc)) from exc
