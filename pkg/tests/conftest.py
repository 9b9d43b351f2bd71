import numpy as np
import pytest

from mfim_transport import exact
from mfim_transport.model import ModelParams, Variant


@pytest.fixture(scope="session")
def params8():
    return ModelParams(num_sites=8, v=1.0, omega=2.0, dt=0.1)


@pytest.fixture(scope="session")
def sd8(params8):
    return exact.spectral_data(params8)


@pytest.fixture(scope="session")
def params6():
    return ModelParams(num_sites=6, v=1.0, omega=2.0, dt=0.1)


@pytest.fixture(scope="session")
def sd6(params6):
    return exact.spectral_data(params6)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_circuit(num_qubits, n_gates, rng):
    """Random circuit over the supported gate set (test utility)."""
    from mfim_transport.simulator import Circuit, Gate, GateKind

    kinds_1q = [GateKind.RX, GateKind.RZ, GateKind.PAULI_X, GateKind.PAULI_Y,
                GateKind.PAULI_Z, GateKind.BASIS_CHANGE_X, GateKind.BASIS_CHANGE_Y]
    circ = Circuit(num_qubits)
    for _ in range(n_gates):
        if rng.random() < 0.3 and num_qubits > 1:
            q = int(rng.integers(num_qubits - 1))
            circ.append(Gate(GateKind.RZZ, (q, q + 1), float(rng.uniform(-3, 3))))
        else:
            kind = kinds_1q[int(rng.integers(len(kinds_1q)))]
            q = int(rng.integers(num_qubits))
            angle = float(rng.uniform(-3, 3)) if kind in (GateKind.RX, GateKind.RZ) else None
            circ.append(Gate(kind, (q,), angle))
    return circ
