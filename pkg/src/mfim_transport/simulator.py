"""Dense state-vector and density-matrix engine.

Gates address 0-based qubits; qubit ``q`` is bit ``q`` of the basis
index, i.e. chain site ``q + 1``.  Rotation gates follow the
``exp(-i * theta * P / 2)`` convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from math import cos, sin, sqrt

import numpy as np

from .errors import InvalidStateSpec
from .paulis import PauliString, apply_pauli, expectation_dm, expectation_state

_INV_SQRT2 = 1.0 / sqrt(2.0)

# Single-site kets used by product-state preparation, keyed by (basis, bit).
_SITE_KETS = {
    ("z", "0"): np.array([1.0, 0.0], dtype=complex),
    ("z", "1"): np.array([0.0, 1.0], dtype=complex),
    # bit 1 is the +1 eigenstate of Y, bit 0 the -1 eigenstate
    ("y", "1"): np.array([_INV_SQRT2, 1j * _INV_SQRT2], dtype=complex),
    ("y", "0"): np.array([_INV_SQRT2, -1j * _INV_SQRT2], dtype=complex),
}


class GateKind(Enum):
    RX = "rx"
    RZ = "rz"
    RZZ = "rzz"
    PAULI_X = "x"
    PAULI_Y = "y"
    PAULI_Z = "z"
    BASIS_CHANGE_X = "basis_x"
    BASIS_CHANGE_Y = "basis_y"


_TWO_TARGET = {GateKind.RZZ}
_ROTATIONS = {GateKind.RX, GateKind.RZ, GateKind.RZZ}


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        want = 2 if self.kind in _TWO_TARGET else 1
        if len(self.targets) != want:
            raise ValueError(f"{self.kind.value} takes {want} target(s), got {self.targets}")
        if (self.angle is None) == (self.kind in _ROTATIONS):
            raise ValueError(f"{self.kind.value}: angle must be given for rotations only")


@dataclass
class Circuit:
    num_qubits: int
    gates: list[Gate] = field(default_factory=list)
    entangling_count: int = 0

    def append(self, gate: Gate) -> None:
        for q in gate.targets:
            if not 0 <= q < self.num_qubits:
                raise ValueError(f"target {q} out of range for {self.num_qubits} qubits")
        self.gates.append(gate)
        if len(gate.targets) == 2:
            self.entangling_count += 1

    def extend(self, gates) -> None:
        for gate in gates:
            self.append(gate)

    def inverse(self) -> "Circuit":
        inv = Circuit(self.num_qubits)
        for gate in reversed(self.gates):
            if gate.kind in _ROTATIONS:
                inv.append(Gate(gate.kind, gate.targets, -gate.angle))
            else:
                inv.append(gate)  # remaining kinds are involutions
        return inv


def gate_matrix(gate: Gate) -> np.ndarray:
    """Dense 2x2 (or 4x4 for RZZ) unitary of the gate."""
    k, th = gate.kind, gate.angle
    if k is GateKind.RX:
        c, s = cos(th / 2), sin(th / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if k is GateKind.RZ:
        return np.diag([np.exp(-0.5j * th), np.exp(0.5j * th)])
    if k is GateKind.RZZ:
        ph = np.exp(-0.5j * th)
        return np.diag([ph, np.conj(ph), np.conj(ph), ph])
    if k is GateKind.PAULI_X:
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if k is GateKind.PAULI_Y:
        return np.array([[0, -1j], [1j, 0]])
    if k is GateKind.PAULI_Z:
        return np.diag([1.0, -1.0]).astype(complex)
    if k is GateKind.BASIS_CHANGE_X:
        return np.array([[1, 1], [1, -1]]) * _INV_SQRT2 + 0j
    if k is GateKind.BASIS_CHANGE_Y:
        # H S^dag: maps Y eigenstates to computational ones
        return np.array([[1, -1j], [1, 1j]]) * _INV_SQRT2
    raise ValueError(f"unknown gate kind {k}")


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    @property
    def dimension(self) -> int:
        return 1 << self.num_qubits

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def norm_error(self) -> float:
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0)

    def expectation(self, pauli: PauliString) -> float:
        return expectation_state(pauli, self.amplitudes, self.num_qubits)

    def to_density_matrix(self) -> "DensityMatrix":
        psi = self.amplitudes
        return DensityMatrix(self.num_qubits, np.outer(psi, psi.conj()))


@dataclass
class DensityMatrix:
    num_qubits: int
    entries: np.ndarray

    @property
    def dimension(self) -> int:
        return 1 << self.num_qubits

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.num_qubits, self.entries.copy())

    def trace_error(self) -> float:
        return abs(complex(np.trace(self.entries)).real - 1.0)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def expectation(self, pauli: PauliString) -> float:
        return expectation_dm(pauli, self.entries, self.num_qubits)


State = StateVector | DensityMatrix


def prepare_product_state(bits: str, basis: str = "y") -> StateVector:
    """Product state from a site-ordered bitstring (site 1 = first char).

    Basis ``'y'``: bit 1 is the +1 eigenstate of Y, bit 0 the -1
    eigenstate.  Basis ``'z'``: bits are computational values.
    """
    basis = basis.lower()
    if basis not in ("y", "z"):
        raise InvalidStateSpec(f"basis must be 'y' or 'z', got {basis!r}")
    if not bits or any(ch not in "01" for ch in bits):
        raise InvalidStateSpec(f"bitstring must be non-empty over {{0,1}}, got {bits!r}")
    vectors = [_SITE_KETS[(basis, ch)] for ch in bits]
    return StateVector(len(bits), product_state_vector(vectors))


def product_state_vector(site_kets: list[np.ndarray]) -> np.ndarray:
    """Little-endian kron: element k of the list is site k+1 (bit k)."""
    psi = site_kets[0]
    for ket in site_kets[1:]:
        psi = np.kron(ket, psi)  # new site supplies the high bits
    return psi


def index_to_bits(index: int, num_sites: int) -> str:
    """Basis index to site-ordered bitstring (site 1 first)."""
    return format(index, f"0{num_sites}b")[::-1]


# -- gate application core (shared by every evolution path) ---------------


def _apply_1q(arr: np.ndarray, num_qubits: int, qubit: int, mat: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix to one qubit axis of a state vector or matrix.

    For a (d, n) array the matrix acts on the row (ket) index, so the same
    routine serves batched state columns and each side of a density matrix.
    """
    trailing = arr.shape[1] if arr.ndim == 2 else 1
    pre = 1 << (num_qubits - 1 - qubit)
    post = (1 << qubit) * trailing
    view = arr.reshape(pre, 2, post)
    out = np.einsum("ij,ajb->aib", mat, view)
    return out.reshape(arr.shape)


@lru_cache(maxsize=1024)
def _diag_phases(num_qubits: int, kind: GateKind, targets: tuple[int, ...], angle: float) -> np.ndarray:
    """Diagonal of RZ/RZZ as a length-d phase vector, cached per circuit reuse."""
    b = np.arange(1 << num_qubits, dtype=np.uint64)
    if kind is GateKind.RZ:
        signs = 1.0 - 2.0 * ((b >> np.uint64(targets[0])) & 1).astype(float)
    else:  # RZZ: +1 when the two bits agree
        bits = ((b >> np.uint64(targets[0])) ^ (b >> np.uint64(targets[1]))) & 1
        signs = 1.0 - 2.0 * bits.astype(float)
    phases = np.exp(-0.5j * angle * signs)
    phases.flags.writeable = False
    return phases


def _apply_gate_vec(psi: np.ndarray, num_qubits: int, gate: Gate) -> np.ndarray:
    if gate.kind in (GateKind.RZ, GateKind.RZZ):
        return psi * _diag_phases(num_qubits, gate.kind, gate.targets, gate.angle)
    return _apply_1q(psi, num_qubits, gate.targets[0], gate_matrix(gate))


def _apply_gate_dm(rho: np.ndarray, num_qubits: int, gate: Gate) -> np.ndarray:
    """Two-sided gate application; may update ``rho`` in place."""
    if gate.kind in (GateKind.RZ, GateKind.RZZ):
        ph = _diag_phases(num_qubits, gate.kind, gate.targets, gate.angle)
        rho *= ph[:, None]
        rho *= ph.conj()[None, :]
        return rho
    mat = gate_matrix(gate)
    q = gate.targets[0]
    d = rho.shape[0]
    pre = 1 << (num_qubits - 1 - q)
    post = 1 << q
    # ket side, then bra side; the bra bit axis still factorizes the
    # flattened row-major array, so neither side needs a transpose
    rho = np.einsum("ij,ajb->aib", mat, rho.reshape(pre, 2, post * d))
    rho = np.einsum("ij,ajb->aib", mat.conj(), rho.reshape(d * pre, 2, post))
    return rho.reshape(d, d)


def apply_gate(state: State, gate: Gate) -> State:
    """Pure application: returns a transformed copy of the state."""
    for q in gate.targets:
        if not 0 <= q < state.num_qubits:
            raise ValueError(f"target {q} out of range for {state.num_qubits} qubits")
    if isinstance(state, StateVector):
        return StateVector(state.num_qubits, _apply_gate_vec(state.amplitudes, state.num_qubits, gate))
    # the DM kernel may work in place, so hand it a copy
    return DensityMatrix(state.num_qubits, _apply_gate_dm(state.entries.copy(), state.num_qubits, gate))


def run_circuit(state: State, circuit: Circuit, noise_hook=None) -> State:
    """Apply all gates in order to a copy of ``state``.

    When ``noise_hook`` is given it is invoked as ``hook(state, targets)``
    after every two-target gate and may mutate the working state in place.
    """
    if circuit.num_qubits != state.num_qubits:
        raise ValueError("circuit and state disagree on qubit count")
    work = state.copy()
    for gate in circuit.gates:
        if isinstance(work, StateVector):
            work.amplitudes = _apply_gate_vec(work.amplitudes, work.num_qubits, gate)
        else:
            work.entries = _apply_gate_dm(work.entries, work.num_qubits, gate)
        if noise_hook is not None and len(gate.targets) == 2:
            noise_hook(work, gate.targets)
    return work


def basis_change_circuit(num_qubits: int, bases) -> Circuit:
    """Pre-measurement rotations taking the requested bases onto Z."""
    circ = Circuit(num_qubits)
    for q, b in enumerate(bases):
        b = b.lower()
        if b == "x":
            circ.append(Gate(GateKind.BASIS_CHANGE_X, (q,)))
        elif b == "y":
            circ.append(Gate(GateKind.BASIS_CHANGE_Y, (q,)))
        elif b != "z":
            raise ValueError(f"unknown measurement basis {b!r}")
    return circ


def measurement_probabilities(state: StateVector, bases) -> np.ndarray:
    rotated = run_circuit(state, basis_change_circuit(state.num_qubits, bases))
    probs = np.abs(rotated.amplitudes) ** 2
    return probs / probs.sum()


def sample_counts(state: StateVector, bases, shots: int, rng: np.random.Generator) -> dict[str, int]:
    """Histogram of ``shots`` Born-rule draws after per-site basis change.

    Keys are site-ordered bitstrings.  Deterministic for a fixed generator
    state.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    probs = measurement_probabilities(state, bases)
    counts = rng.multinomial(shots, probs)
    hits = np.nonzero(counts)[0]
    return {index_to_bits(int(b), state.num_qubits): int(counts[b]) for b in hits}


def counts_vector(counts: dict[str, int], num_sites: int) -> np.ndarray:
    """Dense per-basis-index counts from a bitstring histogram."""
    vec = np.zeros(1 << num_sites, dtype=float)
    for bits, n in counts.items():
        vec[int(bits[::-1], 2)] += n
    return vec


def expectation(state: State, pauli: PauliString) -> float:
    return state.expectation(pauli)
