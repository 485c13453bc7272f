"""Dense few-qubit simulation: states, Pauli strings, gates, measurements.

Conventions
-----------
Qubit 0 is the leftmost tensor factor. A computational basis index is the
big-endian reading of the qubit bits, so qubit ``q`` of an ``n``-qubit
register sits at bit position ``n - 1 - q``.

All randomness comes from an explicitly passed ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

ATOL = 1e-10
EIG_ATOL = 1e-8
PROB_FLOOR = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

PAULI_MATRICES = {"I": I2, "X": X, "Y": Y, "Z": Z}

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


class QuantumStateError(ValueError):
    """Raised for malformed states, operators or qubit indices."""


def _n_qubits_for_dim(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise QuantumStateError(f"dimension {dim} is not a power of two >= 2")
    return n


class StateVector:
    """Normalized pure state on ``n_qubits`` qubits."""

    __slots__ = ("data", "n_qubits")

    def __init__(self, amplitudes, validate: bool = True):
        data = np.asarray(amplitudes, dtype=complex).reshape(-1)
        self.n_qubits = _n_qubits_for_dim(data.size)
        if validate and abs(np.linalg.norm(data) - 1.0) > ATOL:
            raise QuantumStateError(f"state norm {np.linalg.norm(data):.3g} != 1")
        self.data = data

    @classmethod
    def from_label(cls, label: str) -> "StateVector":
        """Product state from a string over ``0 1 + -``, e.g. ``"0+"``."""
        kets = {"0": KET_0, "1": KET_1, "+": KET_PLUS, "-": KET_MINUS}
        try:
            vec = kets[label[0]]
            for ch in label[1:]:
                vec = np.kron(vec, kets[ch])
        except (KeyError, IndexError):
            raise QuantumStateError(f"bad product-state label {label!r}") from None
        return cls(vec)

    def to_density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.data, self.data.conj()), validate=False)

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(np.kron(self.data, other.data), validate=False)

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits})"


class DensityOperator:
    """Mixed state: Hermitian, unit-trace, positive semidefinite matrix."""

    __slots__ = ("data", "n_qubits")

    def __init__(self, matrix, validate: bool = True):
        data = np.asarray(matrix, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise QuantumStateError(f"density matrix must be square, got {data.shape}")
        self.n_qubits = _n_qubits_for_dim(data.shape[0])
        self.data = data
        if validate:
            self.validate()

    def validate(self, atol: float = ATOL) -> None:
        if not np.allclose(self.data, self.data.conj().T, atol=atol):
            raise QuantumStateError("density matrix is not Hermitian")
        tr = np.trace(self.data).real
        if abs(tr - 1.0) > atol:
            raise QuantumStateError(f"density matrix trace {tr:.12g} != 1")
        if np.linalg.eigvalsh(self.data).min() < -atol:
            raise QuantumStateError("density matrix has a negative eigenvalue")

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityOperator":
        dim = 1 << n_qubits
        return cls(np.eye(dim, dtype=complex) / dim, validate=False)

    def tensor(self, other: "DensityOperator") -> "DensityOperator":
        return DensityOperator(np.kron(self.data, other.data), validate=False)

    def __repr__(self) -> str:
        return f"DensityOperator(n_qubits={self.n_qubits})"


State = Union[StateVector, DensityOperator]


class PovmElement:
    """Effect operator ``0 <= M <= I``."""

    __slots__ = ("data", "n_qubits")

    def __init__(self, matrix, validate: bool = True):
        data = np.asarray(matrix, dtype=complex)
        self.n_qubits = _n_qubits_for_dim(data.shape[0])
        if validate:
            if not np.allclose(data, data.conj().T, atol=ATOL):
                raise QuantumStateError("POVM element is not Hermitian")
            ev = np.linalg.eigvalsh(data)
            if ev.min() < -ATOL or ev.max() > 1 + ATOL:
                raise QuantumStateError("POVM element eigenvalues outside [0, 1]")
        self.data = data

    def probability(self, state: DensityOperator) -> float:
        return float(np.real(np.trace(self.data @ state.data)))


def as_density(state: State) -> DensityOperator:
    return state.to_density() if isinstance(state, StateVector) else state


# ---------------------------------------------------------------------------
# Pauli strings


_PAULI_MUL = {
    # (a, b) -> (phase power of i, letter) for the single-site product a*b
    ("I", "I"): (0, "I"), ("I", "X"): (0, "X"), ("I", "Y"): (0, "Y"), ("I", "Z"): (0, "Z"),
    ("X", "I"): (0, "X"), ("X", "X"): (0, "I"), ("X", "Y"): (1, "Z"), ("X", "Z"): (3, "Y"),
    ("Y", "I"): (0, "Y"), ("Y", "X"): (3, "Z"), ("Y", "Y"): (0, "I"), ("Y", "Z"): (1, "X"),
    ("Z", "I"): (0, "Z"), ("Z", "X"): (1, "Y"), ("Z", "Y"): (3, "X"), ("Z", "Z"): (0, "I"),
}
_PHASES = (1, 1j, -1, -1j)


@dataclass(frozen=True)
class PauliString:
    """Signed tensor product of single-qubit Paulis.

    ``sign`` is one of ``1, -1, 1j, -1j``; only the real signs describe
    Hermitian (measurable) operators.
    """

    letters: str
    sign: complex = 1

    def __post_init__(self):
        if not self.letters or set(self.letters) - set("IXYZ"):
            raise QuantumStateError(f"bad Pauli letters {self.letters!r}")
        if self.sign not in _PHASES:
            raise QuantumStateError(f"Pauli sign must be in {{±1, ±i}}, got {self.sign}")
        object.__setattr__(self, "sign", complex(self.sign))

    def dagger(self) -> "PauliString":
        return PauliString(self.letters, self.sign.conjugate())

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls("I" * n_qubits)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str) -> "PauliString":
        return cls.from_sparse(n_qubits, {qubit: letter})

    @classmethod
    def from_sparse(cls, n_qubits: int, letters: dict, sign: complex = 1) -> "PauliString":
        out = ["I"] * n_qubits
        for q, letter in letters.items():
            if not 0 <= q < n_qubits:
                raise QuantumStateError(f"qubit {q} out of range for {n_qubits} qubits")
            out[q] = letter
        return cls("".join(out), sign)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        """Parse ``"XZI"``, ``"+XZI"``, ``"-XZI"``, ``"iXZ"`` or ``"-iXZ"``."""
        sign = 1
        body = text.strip()
        for prefix, value in (("-i", -1j), ("+i", 1j), ("i", 1j), ("-", -1), ("+", 1)):
            if body.startswith(prefix) and len(body) > len(prefix):
                sign, body = value, body[len(prefix):]
                break
        return cls(body, sign)

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def is_hermitian(self) -> bool:
        return self.sign.imag == 0

    @property
    def weight(self) -> int:
        return sum(ch != "I" for ch in self.letters)

    def is_identity(self) -> bool:
        return self.weight == 0

    def symplectic(self) -> tuple[np.ndarray, np.ndarray]:
        xs = np.array([ch in "XY" for ch in self.letters], dtype=np.uint8)
        zs = np.array([ch in "ZY" for ch in self.letters], dtype=np.uint8)
        return xs, zs

    def commutes_with(self, other: "PauliString") -> bool:
        _check_sizes(self.n_qubits, other.n_qubits)
        anti = sum(a != "I" and b != "I" and a != b for a, b in zip(self.letters, other.letters))
        return anti % 2 == 0

    def __mul__(self, other: "PauliString") -> "PauliString":
        _check_sizes(self.n_qubits, other.n_qubits)
        power = 0
        letters = []
        for a, b in zip(self.letters, other.letters):
            p, c = _PAULI_MUL[(a, b)]
            power += p
            letters.append(c)
        phase = _PHASES[power % 4] * self.sign * other.sign
        return PauliString("".join(letters), _snap_phase(phase))

    def __neg__(self) -> "PauliString":
        return PauliString(self.letters, -self.sign)

    def __str__(self) -> str:
        prefix = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[_snap_phase(self.sign)]
        return prefix + self.letters

    def matrix(self) -> np.ndarray:
        out = np.array([[self.sign]], dtype=complex)
        for ch in self.letters:
            out = np.kron(out, PAULI_MATRICES[ch])
        return out

    def action(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(perm, phase)`` with ``P|i> = phase[i] |perm[i]>``."""
        n = self.n_qubits
        idx = np.arange(1 << n)
        xmask = zmask = 0
        n_y = 0
        for q, ch in enumerate(self.letters):
            bit = 1 << (n - 1 - q)
            if ch in "XY":
                xmask |= bit
            if ch in "ZY":
                zmask |= bit
            n_y += ch == "Y"
        parity = np.zeros(idx.size, dtype=np.int64)
        masked = idx & zmask
        while masked.any():
            parity ^= masked & 1
            masked = masked >> 1
        phase = self.sign * (1j ** n_y) * (1 - 2 * parity)
        return idx ^ xmask, phase.astype(complex)


def _snap_phase(value: complex) -> complex:
    for p in _PHASES:
        if abs(value - p) < 1e-9:
            return complex(p)
    raise QuantumStateError(f"{value} is not a Pauli phase")


def _check_sizes(a: int, b: int) -> None:
    if a != b:
        raise QuantumStateError(f"size mismatch: {a} vs {b} qubits")


def pauli_left(p: PauliString, matrix: np.ndarray) -> np.ndarray:
    """``P @ matrix`` for a vector or matrix, without forming ``P``."""
    perm, phase = p.action()
    out = np.empty_like(matrix)
    if matrix.ndim == 1:
        out[perm] = phase * matrix
    else:
        out[perm, :] = phase[:, None] * matrix
    return out


def pauli_right(matrix: np.ndarray, p: PauliString) -> np.ndarray:
    """``matrix @ P`` without forming ``P``."""
    perm, phase = p.action()
    return matrix[:, perm] * phase[None, :]


# ---------------------------------------------------------------------------
# Gates


def _check_qubit(state_n: int, qubit: int) -> None:
    if not 0 <= qubit < state_n:
        raise QuantumStateError(f"qubit index {qubit} out of range for {state_n} qubits")


def _check_unitary(gate: np.ndarray, dim: int) -> np.ndarray:
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (dim, dim):
        raise QuantumStateError(f"gate must be {dim}x{dim}, got {gate.shape}")
    if not np.allclose(gate.conj().T @ gate, np.eye(dim), atol=ATOL):
        raise QuantumStateError("gate is not unitary")
    return gate


def _apply_1q_vec(vec: np.ndarray, n: int, qubit: int, gate: np.ndarray) -> np.ndarray:
    t = vec.reshape((2,) * n)
    t = np.tensordot(gate, t, axes=([1], [qubit]))
    return np.moveaxis(t, 0, qubit).reshape(-1)


def _apply_1q_rho(rho: np.ndarray, n: int, qubit: int, gate: np.ndarray) -> np.ndarray:
    t = rho.reshape((2,) * (2 * n))
    t = np.moveaxis(np.tensordot(gate, t, axes=([1], [qubit])), 0, qubit)
    t = np.moveaxis(np.tensordot(gate.conj(), t, axes=([1], [n + qubit])), 0, n + qubit)
    return t.reshape(rho.shape)


def apply_single_qubit_gate(state: State, qubit: int, gate) -> State:
    """Apply a 2x2 unitary to one qubit of a pure or mixed state."""
    _check_qubit(state.n_qubits, qubit)
    gate = _check_unitary(gate, 2)
    if isinstance(state, StateVector):
        return StateVector(_apply_1q_vec(state.data, state.n_qubits, qubit, gate), validate=False)
    return DensityOperator(_apply_1q_rho(state.data, state.n_qubits, qubit, gate), validate=False)


def cz_diagonal(n_qubits: int, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Diagonal of the product of CZ gates on ``pairs``."""
    idx = np.arange(1 << n_qubits)
    diag = np.ones(idx.size)
    for a, b in pairs:
        _check_qubit(n_qubits, a)
        _check_qubit(n_qubits, b)
        if a == b:
            raise QuantumStateError("CZ needs two distinct qubits")
        ba = (idx >> (n_qubits - 1 - a)) & 1
        bb = (idx >> (n_qubits - 1 - b)) & 1
        diag = diag * (1 - 2 * (ba & bb))
    return diag


def apply_diagonal(state: State, diag: np.ndarray) -> State:
    if isinstance(state, StateVector):
        return StateVector(diag * state.data, validate=False)
    return DensityOperator(diag[:, None] * state.data * diag.conj()[None, :], validate=False)


def apply_cz(state: State, qubit_a: int, qubit_b: int) -> State:
    return apply_diagonal(state, cz_diagonal(state.n_qubits, [(qubit_a, qubit_b)]))


def apply_cz_layer(state: State, pairs: Sequence[tuple[int, int]]) -> State:
    if not pairs:
        return state
    return apply_diagonal(state, cz_diagonal(state.n_qubits, pairs))


def apply_pauli_string(state: State, p: PauliString) -> State:
    """Multiply a vector by ``P`` or conjugate a density operator ``P rho P^dag``."""
    _check_sizes(state.n_qubits, p.n_qubits)
    if isinstance(state, StateVector):
        return StateVector(pauli_left(p, state.data), validate=False)
    return DensityOperator(pauli_right(pauli_left(p, state.data), _dagger(p)), validate=False)


def _dagger(p: PauliString) -> PauliString:
    return PauliString(p.letters, p.sign.conjugate())


def permute_qubits(state: State, perm: Sequence[int]) -> State:
    """Move qubit ``i`` to position ``perm[i]``."""
    n = state.n_qubits
    if sorted(perm) != list(range(n)):
        raise QuantumStateError(f"{perm} is not a permutation of {n} qubits")
    inv = [0] * n
    for i, p in enumerate(perm):
        inv[p] = i
    if isinstance(state, StateVector):
        t = state.data.reshape((2,) * n).transpose(inv)
        return StateVector(t.reshape(-1), validate=False)
    axes = inv + [n + i for i in inv]
    t = state.data.reshape((2,) * (2 * n)).transpose(axes)
    return DensityOperator(t.reshape(state.data.shape), validate=False)


def apply_kraus(state: State, kraus: Sequence[np.ndarray]) -> DensityOperator:
    rho = as_density(state).data
    out = sum(k @ rho @ k.conj().T for k in kraus)
    return DensityOperator(out, validate=False)


def check_kraus(kraus: Sequence[np.ndarray], dim: int, atol: float = EIG_ATOL) -> list[np.ndarray]:
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    if not ops:
        raise QuantumStateError("empty Kraus family")
    for k in ops:
        if k.shape != (dim, dim):
            raise QuantumStateError(f"Kraus operator shape {k.shape} != {(dim, dim)}")
    total = sum(k.conj().T @ k for k in ops)
    if not np.allclose(total, np.eye(dim), atol=atol):
        raise QuantumStateError("Kraus operators are not trace preserving")
    return ops


# ---------------------------------------------------------------------------
# Expectations and measurements


def expectation_pauli(state: State, p: PauliString) -> float:
    """``Tr(P rho)`` for Hermitian ``P``."""
    _check_sizes(state.n_qubits, p.n_qubits)
    perm, phase = p.action()
    if isinstance(state, StateVector):
        value = np.vdot(state.data[perm], phase * state.data)
    else:
        idx = np.arange(perm.size)
        value = np.sum(phase * state.data[idx, perm])
    if abs(value.imag) > 1e-9:
        raise QuantumStateError(f"expectation has imaginary part {value.imag:.3g}; is P Hermitian?")
    return float(value.real)


def _sample_branch(p_plus: float, rng: np.random.Generator) -> int:
    p_plus = min(max(p_plus, 0.0), 1.0)
    if p_plus < PROB_FLOOR:
        return 1
    if 1.0 - p_plus < PROB_FLOOR:
        return 0
    return 0 if rng.random() < p_plus else 1


def project_pauli(state: DensityOperator, p: PauliString, outcome: int) -> tuple[float, np.ndarray]:
    """Unnormalized ``Pi rho Pi`` for ``Pi = (I + outcome * P)/2`` and its trace."""
    rho = state.data
    s = float(outcome)
    p_rho = pauli_left(p, rho)
    rho_p = pauli_right(rho, p)
    p_rho_p = pauli_right(p_rho, p)
    post = (rho + s * p_rho + s * rho_p + p_rho_p) / 4
    return float(np.real(np.trace(post))), post


def measure_pauli_string(state: State, p: PauliString, rng: np.random.Generator):
    """Projectively measure a Hermitian Pauli string.

    Returns ``(outcome, post_state)`` with ``outcome`` in ``{+1, -1}``.
    """
    if not p.is_hermitian:
        raise QuantumStateError(f"cannot measure non-Hermitian Pauli {p}")
    rho = as_density(state)
    _check_sizes(rho.n_qubits, p.n_qubits)
    p_plus = (1.0 + expectation_pauli(rho, p)) / 2
    outcome = 1 - 2 * _sample_branch(p_plus, rng)
    prob, post = project_pauli(rho, p, outcome)
    return outcome, DensityOperator(post / prob, validate=False)


def basis_projectors(basis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rank-one projectors on the two columns of a 2x2 unitary."""
    b = np.asarray(basis, dtype=complex)
    return np.outer(b[:, 0], b[:, 0].conj()), np.outer(b[:, 1], b[:, 1].conj())


def _reduce_qubit(rho: np.ndarray, n: int, qubit: int, vec: np.ndarray) -> np.ndarray:
    """``<v|_q rho |v>_q``: contract one qubit against a bra/ket pair."""
    a, b = 1 << qubit, 1 << (n - 1 - qubit)
    t = rho.reshape(a, 2, b, a, 2, b)
    out = np.einsum("i,xiyzjw,j->xyzw", vec.conj(), t, vec, optimize=False)
    dim = a * b
    return out.reshape(dim, dim)


def qubit_outcome_probabilities(state: DensityOperator, qubit: int, basis=None) -> np.ndarray:
    """Probabilities of the two basis outcomes on one qubit (basis columns)."""
    _check_qubit(state.n_qubits, qubit)
    b = I2 if basis is None else np.asarray(basis, dtype=complex)
    local = _single_qubit_marginal(state.data, state.n_qubits, qubit)
    probs = np.real(np.einsum("ia,ij,ja->a", b.conj(), local, b))
    return np.clip(probs, 0.0, 1.0)


def _single_qubit_marginal(rho: np.ndarray, n: int, qubit: int) -> np.ndarray:
    t = rho.reshape(1 << qubit, 2, 1 << (n - 1 - qubit), 1 << qubit, 2, 1 << (n - 1 - qubit))
    return np.einsum("aibajb->ij", t)


def measure_qubit(state: State, qubit: int, rng: np.random.Generator, basis=None,
                  discard: bool = False):
    """Measure one qubit in the orthonormal basis given by the columns of ``basis``.

    Returns ``(bit, post_state)``. With ``discard=True`` the measured qubit
    is removed from the returned state. Pure inputs stay pure.
    """
    b = I2 if basis is None else np.asarray(basis, dtype=complex)
    if isinstance(state, StateVector):
        return _measure_qubit_vec(state, qubit, rng, b, discard)
    rho = as_density(state)
    probs = qubit_outcome_probabilities(rho, qubit, b)
    bit = _sample_branch(float(probs[0]), rng)
    return bit, collapse_qubit(rho, qubit, bit, b, discard=discard, prob=float(probs[bit]))


def _measure_qubit_vec(state: StateVector, qubit: int, rng: np.random.Generator,
                       basis: np.ndarray, discard: bool):
    n = state.n_qubits
    _check_qubit(n, qubit)
    t = state.data.reshape(1 << qubit, 2, 1 << (n - 1 - qubit))
    # amplitudes along each basis vector: <b_k|_q psi
    comps = np.einsum("ik,aib->kab", basis.conj(), t)
    probs = np.real(np.einsum("kab,kab->k", comps.conj(), comps))
    bit = _sample_branch(float(probs[0]), rng)
    if probs[bit] < PROB_FLOOR:
        raise QuantumStateError("collapsed onto a zero-probability branch")
    amp = comps[bit] / np.sqrt(probs[bit])
    if discard:
        if n == 1:
            raise QuantumStateError("cannot discard the last qubit")
        return bit, StateVector(amp.reshape(-1), validate=False)
    full = np.einsum("i,ab->aib", basis[:, bit], amp)
    return bit, StateVector(full.reshape(-1), validate=False)


def collapse_qubit(state: DensityOperator, qubit: int, bit: int, basis=None,
                   discard: bool = False, prob: float | None = None,
                   normalize: bool = True) -> DensityOperator:
    """Post-measurement state for a given outcome on one qubit."""
    n = state.n_qubits
    b = I2 if basis is None else np.asarray(basis, dtype=complex)
    vec = b[:, bit]
    if discard:
        if n == 1:
            raise QuantumStateError("cannot discard the last qubit")
        post = _reduce_qubit(state.data, n, qubit, vec)
    else:
        proj = np.outer(vec, vec.conj())
        t = state.data.reshape((2,) * (2 * n))
        t = np.moveaxis(np.tensordot(proj, t, axes=([1], [qubit])), 0, qubit)
        t = np.moveaxis(np.tensordot(proj, t, axes=([0], [n + qubit])), 0, n + qubit)
        post = t.reshape(state.data.shape)
    if not normalize:
        return DensityOperator(post, validate=False)
    if prob is None:
        prob = float(np.real(np.trace(post)))
    if prob < PROB_FLOOR:
        raise QuantumStateError("collapsed onto a zero-probability branch")
    return DensityOperator(post / prob, validate=False)


def measure_qubit_z(state: State, qubit: int, rng: np.random.Generator):
    """Computational-basis measurement; returns ``(bit, post_state)``."""
    return measure_qubit(state, qubit, rng)


def xy_basis(angle: float) -> np.ndarray:
    """Columns ``|+_a>, |-_a>`` with ``|±_a> = (|0> ± e^{i a}|1>)/sqrt 2``."""
    ph = np.exp(1j * angle)
    return np.array([[1, 1], [ph, -ph]], dtype=complex) / np.sqrt(2)


# ---------------------------------------------------------------------------
# Reductions and distances


def purify_if_pure(state: State, atol: float = ATOL) -> State:
    """Return a :class:`StateVector` for rank-one density operators, else ``state``."""
    if isinstance(state, StateVector):
        return state
    w, v = np.linalg.eigh(state.data)
    if abs(w[-1] - 1.0) > atol:
        return state
    return StateVector(v[:, -1], validate=False)


def partial_trace(state: State, keep: Sequence[int]) -> DensityOperator:
    """Reduced state on ``keep``, in the order given."""
    rho = as_density(state)
    n = rho.n_qubits
    keep = list(keep)
    if not keep or len(set(keep)) != len(keep) or any(not 0 <= k < n for k in keep):
        raise QuantumStateError(f"invalid keep set {keep} for {n} qubits")
    letters = [chr(ord("a") + i) for i in range(n)]
    primes = [chr(ord("A") + i) for i in range(n)]
    col = [primes[i] if i in keep else letters[i] for i in range(n)]
    out = "".join(letters[k] for k in keep) + "".join(primes[k] for k in keep)
    spec = "".join(letters) + "".join(col) + "->" + out
    t = np.einsum(spec, rho.data.reshape((2,) * (2 * n)))
    dim = 1 << len(keep)
    return DensityOperator(t.reshape(dim, dim), validate=False)


def hermitian_eigendecomposition(matrix, atol: float = EIG_ATOL):
    """Eigenvalues (ascending) and eigenvector columns of a Hermitian matrix."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise QuantumStateError("matrix must be square")
    if not np.allclose(m, m.conj().T, atol=atol):
        raise QuantumStateError("matrix is not Hermitian")
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    return vals, vecs


def trace_norm(matrix) -> float:
    vals, _ = hermitian_eigendecomposition(matrix)
    return float(np.sum(np.abs(vals)))


def trace_distance(a: State, b: State) -> float:
    a, b = as_density(a), as_density(b)
    _check_sizes(a.n_qubits, b.n_qubits)
    return 0.5 * trace_norm(a.data - b.data)


def fidelity_pure(state: State, psi: StateVector) -> float:
    rho = as_density(state)
    return float(np.real(np.vdot(psi.data, rho.data @ psi.data)))


# ---------------------------------------------------------------------------
# Random instances


def random_statevector(n_qubits: int, rng: np.random.Generator) -> StateVector:
    v = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return StateVector(v / np.linalg.norm(v))


def random_density(n_qubits: int, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Random mixed state from a Ginibre matrix of the given rank."""
    dim = 1 << n_qubits
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return DensityOperator(rho / np.trace(rho).real, validate=False)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))[None, :]


def random_kraus(n_qubits: int, n_ops: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Kraus family of a random channel, cut from a random isometry."""
    dim = 1 << n_qubits
    u = random_unitary(dim * n_ops, rng)
    iso = u[:, :dim]
    return [iso[k * dim:(k + 1) * dim, :] for k in range(n_ops)]


def random_povm_element(n_qubits: int, rng: np.random.Generator) -> PovmElement:
    dim = 1 << n_qubits
    u = random_unitary(dim, rng)
    ev = rng.random(dim)
    return PovmElement((u * ev[None, :]) @ u.conj().T, validate=False)
