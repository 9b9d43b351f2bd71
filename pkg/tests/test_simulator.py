import numpy as np
import pytest

from mfim_transport import paulis
from mfim_transport.errors import InvalidStateSpec
from mfim_transport.simulator import (
    Circuit,
    Gate,
    GateKind,
    apply_gate,
    counts_vector,
    gate_matrix,
    index_to_bits,
    prepare_product_state,
    run_circuit,
    sample_counts,
)
from conftest import random_circuit


def test_product_state_z_ground():
    s = prepare_product_state("0000", basis="z")
    expect = np.zeros(16)
    expect[0] = 1.0
    assert np.allclose(s.amplitudes, expect)


def test_product_state_single_y():
    s = prepare_product_state("1", basis="y")
    assert np.allclose(s.amplitudes, np.array([1, 1j]) / np.sqrt(2))


def test_y_state_expectations():
    bits = "10110"
    s = prepare_product_state(bits, basis="y")
    for site, ch in enumerate(bits, start=1):
        want = 1.0 if ch == "1" else -1.0
        assert abs(s.expectation(paulis.y_at(site)) - want) < 1e-12
        assert abs(s.expectation(paulis.z_at(site))) < 1e-12
        assert abs(s.expectation(paulis.x_at(site))) < 1e-12


def test_invalid_product_specs():
    with pytest.raises(InvalidStateSpec):
        prepare_product_state("01x", basis="y")
    with pytest.raises(InvalidStateSpec):
        prepare_product_state("", basis="y")
    with pytest.raises(InvalidStateSpec):
        prepare_product_state("01", basis="w")


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate(GateKind.RZZ, (0,), 0.3)
    with pytest.raises(ValueError):
        Gate(GateKind.RX, (0,))
    with pytest.raises(ValueError):
        Gate(GateKind.PAULI_X, (0,), 0.1)
    circ = Circuit(2)
    with pytest.raises(ValueError):
        circ.append(Gate(GateKind.PAULI_X, (2,)))


def test_gate_matrices_unitary(rng):
    for kind in GateKind:
        angle = float(rng.uniform(-3, 3)) if kind in (GateKind.RX, GateKind.RZ, GateKind.RZZ) else None
        targets = (0, 1) if kind is GateKind.RZZ else (0,)
        m = gate_matrix(Gate(kind, targets, angle))
        assert np.max(np.abs(m.conj().T @ m - np.eye(len(m)))) < 1e-12


def test_rx_half_turn():
    s = prepare_product_state("0", basis="z")
    out = apply_gate(s, Gate(GateKind.RX, (0,), np.pi))
    assert np.allclose(out.amplitudes, [0.0, -1j], atol=1e-12)


def test_rzz_diagonal_action():
    s = prepare_product_state("00", basis="z")
    out = apply_gate(s, Gate(GateKind.RZZ, (0, 1), 0.7))
    assert np.allclose(out.amplitudes[0], np.exp(-0.35j))
    s2 = prepare_product_state("10", basis="z")  # site 1 excited: odd parity
    out2 = apply_gate(s2, Gate(GateKind.RZZ, (0, 1), 0.7))
    assert np.allclose(out2.amplitudes[1], np.exp(0.35j))


def test_circuit_inverse_and_norm(rng):
    circ = random_circuit(5, 60, rng)
    s = prepare_product_state("10110", basis="y")
    fwd = run_circuit(s, circ)
    assert fwd.norm_error() < 1e-9
    back = run_circuit(fwd, circ.inverse())
    fidelity = abs(np.vdot(back.amplitudes, s.amplitudes))
    assert abs(fidelity - 1.0) < 1e-10


def test_empty_circuit_identity():
    s = prepare_product_state("0110", basis="y")
    out = run_circuit(s, Circuit(4))
    assert np.array_equal(out.amplitudes, s.amplitudes)


def test_entangling_count():
    circ = Circuit(4)
    circ.append(Gate(GateKind.RZZ, (0, 1), 0.1))
    circ.append(Gate(GateKind.RX, (2,), 0.1))
    circ.append(Gate(GateKind.RZZ, (2, 3), 0.1))
    assert circ.entangling_count == 2


def test_basis_change_equivalences(rng):
    circ = random_circuit(4, 30, rng)
    s = run_circuit(prepare_product_state("0101", basis="y"), circ)
    for site in range(1, 5):
        for op, kind in ((paulis.x_at(site), GateKind.BASIS_CHANGE_X),
                         (paulis.y_at(site), GateKind.BASIS_CHANGE_Y)):
            rotated = apply_gate(s, Gate(kind, (site - 1,)))
            assert abs(s.expectation(op) - rotated.expectation(paulis.z_at(site))) < 1e-12


def test_noise_hook_contract(rng):
    circ = random_circuit(4, 40, rng)
    calls = []

    def hook(state, targets):
        calls.append(targets)

    run_circuit(prepare_product_state("0000", basis="z"), circ, noise_hook=hook)
    two_qubit = [g.targets for g in circ.gates if len(g.targets) == 2]
    assert calls == two_qubit


def test_sample_counts_deterministic():
    s = prepare_product_state("0101", basis="y")
    c1 = sample_counts(s, "zzzz", 500, np.random.default_rng(9))
    c2 = sample_counts(s, "zzzz", 500, np.random.default_rng(9))
    assert c1 == c2
    c3 = sample_counts(s, "zzzz", 500, np.random.default_rng(10))
    assert c1 != c3


def test_sample_counts_ground_state():
    s = prepare_product_state("000", basis="z")
    counts = sample_counts(s, "zzz", 100, np.random.default_rng(0))
    assert counts == {"000": 100}


def test_sample_counts_rejects_zero_shots():
    s = prepare_product_state("0", basis="z")
    with pytest.raises(ValueError):
        sample_counts(s, "z", 0, np.random.default_rng(0))


def test_born_rule_frequencies():
    # |+> measured in Z: each outcome with probability 1/2
    plus = apply_gate(prepare_product_state("0", basis="z"), Gate(GateKind.BASIS_CHANGE_X, (0,)))
    shots = 100_000
    counts = sample_counts(plus, "z", shots, np.random.default_rng(3))
    p_hat = counts.get("0", 0) / shots
    sigma = np.sqrt(0.25 / shots)
    assert abs(p_hat - 0.5) < 3 * sigma


def test_counts_estimator_concentration(rng):
    # empirical <Z_1> from counts concentrates around the exact value
    circ = random_circuit(4, 25, rng)
    s = run_circuit(prepare_product_state("0101", basis="y"), circ)
    exact_val = s.expectation(paulis.z_at(1))
    shots = 4096
    counts = sample_counts(s, "zzzz", shots, np.random.default_rng(17))
    vec = counts_vector(counts, 4)
    signs = 1.0 - 2.0 * ((np.arange(16) >> 0) & 1)
    estimate = float(signs @ vec) / shots
    assert abs(estimate - exact_val) < 3.0 / np.sqrt(shots)


def test_density_matrix_matches_statevector(rng):
    # every Pauli string supported on up to 3 of 5 sites
    circ = random_circuit(5, 40, rng)
    s = run_circuit(prepare_product_state("01101", basis="y"), circ)
    rho = s.to_density_matrix()
    assert rho.trace_error() < 1e-10
    assert rho.hermiticity_error() < 1e-10
    from itertools import combinations, product

    for k in (1, 2, 3):
        for sites in combinations(range(1, 6), k):
            for letters in product("XYZ", repeat=k):
                label = ["I"] * 5
                for site, letter in zip(sites, letters):
                    label[site - 1] = letter
                p = paulis.from_label("".join(label))
                assert abs(rho.expectation(p) - s.expectation(p)) < 1e-10


def test_dm_gate_application_matches_statevector(rng):
    circ = random_circuit(4, 30, rng)
    s0 = prepare_product_state("0110", basis="y")
    sv = run_circuit(s0, circ)
    dm = run_circuit(s0.to_density_matrix(), circ)
    assert np.max(np.abs(dm.entries - sv.to_density_matrix().entries)) < 1e-10


def test_index_to_bits_site_order():
    # site 1 is bit 0 and the first character
    assert index_to_bits(1, 4) == "1000"
    assert index_to_bits(8, 4) == "0001"
