"""Pauli twirl of a channel on the input block and the trap-test bounds.

Pauli strings on ``n`` qubits are indexed ``beta = 0 .. 4^n - 1`` in
lexicographic ``I < X < Y < Z`` order, so ``beta = 0`` is the identity.
Everything here is built from explicit Kronecker products and permutation
matrices, independently of the protocol's state-update code, so the two
can be checked against each other.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .protocol import AliceSecret, ChannelOnInput, alice_prepare, input_test_state
from .qsim import (
    ATOL,
    PAULI_MATRICES,
    DensityOperator,
    State,
    as_density,
    check_kraus,
    trace_distance,
)


@functools.lru_cache(maxsize=None)
def pauli_labels(n_qubits: int) -> tuple[str, ...]:
    return tuple("".join(p) for p in itertools.product("IXYZ", repeat=n_qubits))


@functools.lru_cache(maxsize=None)
def pauli_basis(n_qubits: int) -> tuple[np.ndarray, ...]:
    out = []
    for label in pauli_labels(n_qubits):
        m = np.array([[1.0 + 0j]])
        for ch in label:
            m = np.kron(m, PAULI_MATRICES[ch])
        m.setflags(write=False)
        out.append(m)
    return tuple(out)


def _n_for_dim(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def pauli_index(label: str) -> int:
    return pauli_labels(len(label)).index(label)


def pauli_decompose(operator: np.ndarray) -> dict[int, complex]:
    """Coefficients ``C_beta = Tr(sigma_beta^dag A) / 2^n`` of ``A = sum_beta C_beta sigma_beta``."""
    a = np.asarray(operator, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = _n_for_dim(a.shape[0])
    dim = a.shape[0]
    # Paulis are Hermitian, so Tr(sigma A) = sum(sigma^T * A)
    return {beta: complex(np.sum(s.T * a) / dim) for beta, s in enumerate(pauli_basis(n))}


def pauli_reconstruct(coeffs: dict[int, complex], n_qubits: int) -> np.ndarray:
    basis = pauli_basis(n_qubits)
    out = np.zeros_like(basis[0])
    for beta, c in coeffs.items():
        out = out + c * basis[beta]
    return out


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """Unitary moving qubit ``i`` to position ``perm[i]`` (qubit 0 is the most significant bit)."""
    n = len(perm)
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    for src in range(dim):
        dst = 0
        for i in range(n):
            if (src >> (n - 1 - i)) & 1:
                dst |= 1 << (n - 1 - perm[i])
        out[dst, src] = 1.0
    return out


def _check_channel(kraus: Sequence[np.ndarray], dim: int) -> list[np.ndarray]:
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    if any(k.shape != (dim, dim) for k in ops):
        raise ValueError(f"Kraus operators must be {dim}x{dim}")
    return check_kraus(ops, dim)


def _block_density(input_block) -> np.ndarray:
    b = input_block.block().data
    return np.outer(b, b.conj())


def _perm_budget(size: int) -> None:
    if size > 6:
        raise ValueError(f"exhaustive twirl on {size} qubits is out of reach")
    if size > 3:
        warnings.warn(f"exhaustive twirl over {math.factorial(size)} permutations and "
                      f"{4 ** size} pads; this is slow", RuntimeWarning, stacklevel=3)


def rho_before_exact(kraus: Sequence[np.ndarray], input_block) -> DensityOperator:
    """Twirl average ``1/((3m)! 4^{3m}) sum_{P,alpha,k} P^dag s_a E_k s_a P Psi (...)^dag``."""
    size = 3 * input_block.m
    dim = 1 << size
    ops = _check_channel(kraus, dim)
    _perm_budget(size)
    psi = _block_density(input_block)
    paulis = pauli_basis(size)
    acc = np.zeros((dim, dim), dtype=complex)
    count = 0
    for perm in itertools.permutations(range(size)):
        p = permutation_matrix(perm)
        inner = p @ psi @ p.conj().T
        for s in paulis:
            for e in ops:
                k = p.conj().T @ s @ e @ s
                acc += k @ inner @ k.conj().T
            count += 1
    return DensityOperator(acc / count, validate=False)


@dataclass(frozen=True)
class TwirlDecomposition:
    """``rho_before = rho1 + rho2`` with ``rho1 = D_0 Psi``."""

    d_weights: dict
    rho1: np.ndarray
    rho2: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.rho1 + self.rho2

    def weight_sum(self) -> float:
        return float(sum(self.d_weights.values()))


def d_weights(kraus: Sequence[np.ndarray]) -> dict[int, float]:
    """``D_beta = sum_k |C_beta^k|^2``."""
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    out: dict[int, float] = {}
    for e in ops:
        for beta, c in pauli_decompose(e).items():
            out[beta] = out.get(beta, 0.0) + abs(c) ** 2
    return out


def twirl_decomposition(kraus: Sequence[np.ndarray], input_block) -> TwirlDecomposition:
    size = 3 * input_block.m
    dim = 1 << size
    ops = _check_channel(kraus, dim)
    _perm_budget(size)
    weights = d_weights(ops)
    psi = _block_density(input_block)
    paulis = pauli_basis(size)
    perms = [permutation_matrix(p) for p in itertools.permutations(range(size))]
    rho2 = np.zeros((dim, dim), dtype=complex)
    for beta, d in weights.items():
        if beta == 0 or d < 1e-15:
            continue
        for p in perms:
            k = p.conj().T @ paulis[beta] @ p
            rho2 += d * (k @ psi @ k.conj().T)
    rho2 /= len(perms)
    return TwirlDecomposition(weights, weights.get(0, 0.0) * psi, rho2)


def verify_cross_term_cancellation(beta, gamma, test_state: State) -> float:
    """Operator norm of ``sum_alpha s_a s_b s_a rho s_a s_g s_a`` for ``beta != gamma``."""
    rho = as_density(test_state).data
    n = _n_for_dim(rho.shape[0])
    b = pauli_index(beta) if isinstance(beta, str) else int(beta)
    g = pauli_index(gamma) if isinstance(gamma, str) else int(gamma)
    if b == g:
        raise ValueError("beta = gamma: the twirl sum does not vanish")
    return float(np.linalg.norm(_cross_sum(rho, n, b, g), 2))


def _cross_sum(rho: np.ndarray, n: int, beta: int, gamma: int) -> np.ndarray:
    basis = pauli_basis(n)
    sb, sg = basis[beta], basis[gamma]
    out = np.zeros_like(rho)
    for s in basis:
        out += (s @ sb @ s) @ rho @ (s @ sg @ s)
    return out


def diagonal_twirl_sum(beta, test_state: State) -> np.ndarray:
    """The ``beta = gamma`` sum, equal to ``4^n s_b rho s_b``."""
    rho = as_density(test_state).data
    n = _n_for_dim(rho.shape[0])
    b = pauli_index(beta) if isinstance(beta, str) else int(beta)
    return _cross_sum(rho, n, b, b)


def _wrong_input(input_block) -> np.ndarray:
    return input_block.wrong_input_projector().data


def verify_rho2_bound(kraus: Sequence[np.ndarray], input_block) -> tuple[float, float]:
    """``(Tr[(I - psi) (x) traps . rho2], 2/3)``."""
    dec = twirl_decomposition(kraus, input_block)
    lhs = float(np.real(np.trace(_wrong_input(input_block) @ dec.rho2)))
    m = input_block.m
    bound = 2 * m * math.factorial(3 * m - 1) / math.factorial(3 * m)
    return lhs, bound


def rho1_residual(kraus: Sequence[np.ndarray], input_block) -> float:
    dec = twirl_decomposition(kraus, input_block)
    return float(np.real(np.trace(_wrong_input(input_block) @ dec.rho1)))


@dataclass(frozen=True)
class PsiPassCheck:
    p_psipass: float
    epsilon: float
    distance: float
    distance_bound: float
    overlap: float
    overlap_bound: float

    @property
    def distance_holds(self) -> bool:
        return self.distance <= self.distance_bound + ATOL

    @property
    def overlap_holds(self) -> bool:
        return self.overlap >= self.overlap_bound - ATOL


def verify_psipass_bound(kraus: Sequence[np.ndarray], input_block,
                         epsilon: float | None = None) -> PsiPassCheck:
    """Trap-level closeness of ``rho_before`` to the ideal block.

    ``epsilon`` defaults to the channel's exact ``1 - p_psipass``. Returns the
    trace distance against ``sqrt(2/3 + eps)`` and the overlap
    ``Tr[Psi rho_before]`` against ``1/3 - eps``.
    """
    before = rho_before_exact(kraus, input_block)
    p_pass = input_block.trap_projector().probability(before)
    eps = 1.0 - p_pass if epsilon is None else epsilon
    eps = max(eps, 0.0)
    psi = DensityOperator(_block_density(input_block), validate=False)
    dist = trace_distance(before, psi)
    overlap = input_block.block_projector().probability(before)
    return PsiPassCheck(p_pass, eps, dist, math.sqrt(2 / 3 + eps), overlap, 1 / 3 - eps)


def protocol_path_average(kraus: Sequence[np.ndarray], input_block, graph) -> DensityOperator:
    """Average over every secret of the state the input test sees, computed by
    running the channel adversary through the full protocol register."""
    strategy = ChannelOnInput(tuple(kraus))
    acc = None
    count = 0
    for secret in AliceSecret.enumerate_all(3 * input_block.m):
        padded, _ = alice_prepare(input_block, None, secret)
        state = strategy.respond(as_density(padded), graph)
        before = input_test_state(state, secret, graph).data
        acc = before if acc is None else acc + before
        count += 1
    return DensityOperator(acc / count, validate=False)


def single_pauli_channels(n_qubits: int) -> list[tuple[str, list[np.ndarray]]]:
    """Every non-identity single-Pauli unitary channel."""
    labels = pauli_labels(n_qubits)
    basis = pauli_basis(n_qubits)
    return [(labels[b], [basis[b].copy()]) for b in range(1, len(labels))]
