"""Protocol graph layout, graph states and coupled stabilizer generators.

Global qubit layout of the combined register: the input block ``V2``
occupies qubits ``0 .. 3m-1`` and the computation graph ``V1`` occupies
``3m .. 3m+N-1``, matching the tensor order ``|Psi'> (x) |G>``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .qsim import (
    DensityOperator,
    PauliString,
    QuantumStateError,
    State,
    StateVector,
    apply_cz_layer,
    as_density,
)


class GraphError(ValueError):
    """Malformed protocol graph."""


def _norm_edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class ProtocolGraph:
    """Computation graph ``G`` on ``V1`` plus the input block ``V2``.

    ``e_connect`` holds ``(v1, v2)`` pairs and must be a perfect matching of
    ``V2`` into distinct ``V1`` vertices.
    """

    v1_count: int
    v2_count: int
    edges_g: frozenset = field(default_factory=frozenset)
    e_connect: tuple = ()
    output_vertex: int = 0

    def __post_init__(self):
        edges = []
        for e in self.edges_g:
            a, b = (int(x) for x in e)
            if a == b:
                raise GraphError(f"self-loop on vertex {a}")
            if not (0 <= a < self.v1_count and 0 <= b < self.v1_count):
                raise GraphError(f"edge {e} leaves V1 (size {self.v1_count})")
            edges.append(_norm_edge(a, b))
        if len(set(edges)) != len(edges):
            raise GraphError("duplicate edges in edges_g")
        object.__setattr__(self, "edges_g", frozenset(edges))

        conn = tuple(sorted((int(v), int(w)) for v, w in self.e_connect))
        object.__setattr__(self, "e_connect", conn)
        if self.v1_count < 1:
            raise GraphError("V1 must be nonempty")
        if self.v2_count % 3:
            raise GraphError(f"V2 size {self.v2_count} is not a multiple of 3")
        if not 0 <= self.output_vertex < self.v1_count:
            raise GraphError(f"output vertex {self.output_vertex} not in V1")
        v1s = [v for v, _ in conn]
        v2s = [w for _, w in conn]
        if any(not 0 <= v < self.v1_count for v in v1s):
            raise GraphError("connecting edge endpoint outside V1")
        if sorted(v2s) != list(range(self.v2_count)):
            raise GraphError("e_connect must cover every V2 vertex exactly once")
        if len(set(v1s)) != len(v1s):
            raise GraphError("e_connect must match V2 into distinct V1 vertices")

    @classmethod
    def chain(cls, n: int, m: int = 1, output_vertex: int | None = None) -> "ProtocolGraph":
        """Linear chain on ``n`` vertices whose last ``3m`` vertices are matched to V2."""
        if n < 3 * m:
            raise GraphError(f"chain of {n} vertices cannot host {3 * m} input qubits")
        edges = frozenset((i, i + 1) for i in range(n - 1))
        start = n - 3 * m
        conn = tuple((start + j, j) for j in range(3 * m))
        out = n - 1 if output_vertex is None else output_vertex
        return cls(n, 3 * m, edges, conn, out)

    @classmethod
    def from_lists(cls, n: int, m: int, edges: Iterable[Sequence[int]],
                   matching: Iterable[Sequence[int]], output_vertex: int) -> "ProtocolGraph":
        return cls(n, 3 * m, frozenset(tuple(e) for e in edges),
                   tuple(tuple(e) for e in matching), output_vertex)

    @property
    def m(self) -> int:
        return self.v2_count // 3

    @property
    def n_total(self) -> int:
        return self.v1_count + self.v2_count

    def v1_global(self, v: int) -> int:
        return self.v2_count + v

    def v2_global(self, j: int) -> int:
        return j

    def v1_vertices(self) -> list[int]:
        return [self.v1_global(v) for v in range(self.v1_count)]

    def v2_vertices(self) -> list[int]:
        return list(range(self.v2_count))

    def match_of_v2(self, j: int) -> int:
        """V1 vertex (local index) matched to V2 vertex ``j``."""
        for v, w in self.e_connect:
            if w == j:
                return v
        raise GraphError(f"V2 vertex {j} has no connecting edge")

    def v1_neighbors(self, v: int) -> list[int]:
        return sorted({b if a == v else a for a, b in self.edges_g if v in (a, b)})

    def global_edges(self) -> list[tuple[int, int]]:
        """All edges (graph plus connecting) in global qubit indices."""
        g = [(self.v1_global(a), self.v1_global(b)) for a, b in sorted(self.edges_g)]
        return g + self.connect_pairs()

    def connect_pairs(self) -> list[tuple[int, int]]:
        return [(w, self.v1_global(v)) for v, w in self.e_connect]

    def global_neighbors(self, q: int) -> list[int]:
        return sorted({b if a == q else a for a, b in self.global_edges() if q in (a, b)})

    def v1_path(self, start: int, end: int) -> list[int]:
        """Shortest path in G between two V1 vertices (local indices)."""
        prev = {start: None}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            if v == end:
                break
            for u in self.v1_neighbors(v):
                if u not in prev:
                    prev[u] = v
                    queue.append(u)
        if end not in prev:
            raise GraphError(f"no path in G from {start} to {end}")
        path = [end]
        while path[-1] != start:
            path.append(prev[path[-1]])
        return path[::-1]

    def merged(self) -> "ProtocolGraph":
        """Single graph on all ``3m + N`` vertices with an empty input block."""
        return ProtocolGraph(self.n_total, 0, frozenset(self.global_edges()), (),
                             self.v1_global(self.output_vertex))


def build_graph_state(graph: ProtocolGraph) -> StateVector:
    """``|+>^N`` followed by CZ on every edge of ``G``."""
    n = graph.v1_count
    plus = np.full(1 << n, 2 ** (-n / 2), dtype=complex)
    return apply_cz_layer(StateVector(plus, validate=False), sorted(graph.edges_g))


def attach_input(input_state: State, graph: ProtocolGraph) -> State:
    """``CZ_connect (input (x) |G>)`` on the full ``3m + N`` register.

    Pure inputs give a pure result; mixed inputs a density operator.
    """
    if input_state.n_qubits != graph.v2_count:
        raise QuantumStateError(
            f"input has {input_state.n_qubits} qubits, V2 has {graph.v2_count}")
    g = build_graph_state(graph)
    if isinstance(input_state, StateVector):
        joint = input_state.tensor(g)
    else:
        joint = input_state.tensor(g.to_density())
    return apply_cz_layer(joint, graph.connect_pairs())


class StabilizerGeneratorSet:
    """Independent, pairwise commuting Pauli generators."""

    def __init__(self, generators: Sequence[PauliString], check: bool = True):
        self.generators = list(generators)
        if not self.generators:
            raise GraphError("empty generator set")
        sizes = {g.n_qubits for g in self.generators}
        if len(sizes) != 1:
            raise QuantumStateError("generators act on different qubit counts")
        if check:
            self.check_commuting()
            self.check_independent()

    @property
    def n(self) -> int:
        return len(self.generators)

    @property
    def n_qubits(self) -> int:
        return self.generators[0].n_qubits

    def __iter__(self):
        return iter(self.generators)

    def __len__(self):
        return len(self.generators)

    def non_commuting_pairs(self) -> list[tuple[int, int]]:
        gens = self.generators
        return [(i, j) for i in range(len(gens)) for j in range(i + 1, len(gens))
                if not gens[i].commutes_with(gens[j])]

    def check_commuting(self) -> None:
        bad = self.non_commuting_pairs()
        if bad:
            raise NonCommutingGenerators(bad)

    def check_independent(self) -> None:
        if gf2_rank(self.symplectic_matrix()) != self.n:
            raise GraphError("generators are not independent")

    def symplectic_matrix(self) -> np.ndarray:
        rows = [np.concatenate(g.symplectic()) for g in self.generators]
        return np.array(rows, dtype=np.uint8)

    def product(self, bits: Sequence[int]) -> PauliString:
        """``s_k``: product of the generators selected by ``bits``."""
        if len(bits) != self.n:
            raise ValueError(f"need {self.n} subset bits, got {len(bits)}")
        out = PauliString.identity(self.n_qubits)
        for bit, g in zip(bits, self.generators):
            if bit:
                out = out * g
        return out


class NonCommutingGenerators(GraphError):
    def __init__(self, pairs):
        self.pairs = pairs
        super().__init__(f"generators do not commute: pairs {pairs}")


def gf2_rank(matrix: np.ndarray) -> int:
    m = matrix.copy() % 2
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if m[r, c]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(rows):
            if r != rank and m[r, c]:
                m[r] ^= m[rank]
        rank += 1
    return rank


def coupled_stabilizer_generators(graph: ProtocolGraph) -> StabilizerGeneratorSet:
    """One generator per V1 vertex, with Z tails into the matched V2 qubits.

    ``g_v = X_v prod_{u in N_G(v)} Z_u prod_{w matched to v} Z_w``; these
    stabilize ``attach_input(sigma, graph)`` for every input ``sigma``.
    """
    n = graph.n_total
    gens = []
    for v in range(graph.v1_count):
        letters = {graph.v1_global(v): "X"}
        for u in graph.v1_neighbors(v):
            letters[graph.v1_global(u)] = "Z"
        for v1, w in graph.e_connect:
            if v1 == v:
                letters[graph.v2_global(w)] = "Z"
        gens.append(PauliString.from_sparse(n, letters))
    return StabilizerGeneratorSet(gens)


def attach_density(input_state: State, graph: ProtocolGraph) -> DensityOperator:
    return as_density(attach_input(input_state, graph))
