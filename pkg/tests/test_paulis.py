import numpy as np
import pytest

from mfim_transport import paulis


def dense_reference(label):
    """Independent dense build by explicit kron of 2x2 matrices."""
    mats = {
        "I": np.eye(2),
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]]),
        "Z": np.diag([1.0, -1.0]).astype(complex),
    }
    out = np.eye(1)
    for ch in label:  # site k is bit k: later sites supply high bits
        out = np.kron(mats[ch], out)
    return out


ALL_LABELS_3 = [
    a + b + c for a in "IXYZ" for b in "IXYZ" for c in "IXYZ"
]


def test_label_roundtrip():
    for label in ("IXYZ", "ZZII", "YYYY", "IIII"):
        assert paulis.from_label(label).label(4) == label


def test_dense_matches_reference():
    for label in ALL_LABELS_3:
        got = paulis.dense(paulis.from_label(label), 3)
        assert np.allclose(got, dense_reference(label), atol=1e-14), label


def test_orthogonality_brute_force():
    # tr(P Q)/d vanishes unless the masks coincide, where it is the
    # coefficient product
    d = 8
    rng = np.random.default_rng(0)
    labels = rng.choice(ALL_LABELS_3, size=24, replace=False)
    for la in labels:
        for lb in labels:
            pa = paulis.from_label(la, 0.7)
            pb = paulis.from_label(lb, -1.3)
            tr = np.trace(paulis.dense(pa, 3) @ paulis.dense(pb, 3)).real / d
            expect = 0.7 * (-1.3) if la == lb else 0.0
            assert abs(tr - expect) < 1e-12
            assert abs(
                paulis.infinite_temperature_product([pa], [pb]) - expect
            ) < 1e-14


def test_apply_matches_dense(rng):
    for _ in range(20):
        x, z = int(rng.integers(16)), int(rng.integers(16))
        p = paulis.PauliString(x, z, float(rng.normal()))
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        assert np.allclose(
            paulis.apply_pauli(p, psi, 4), paulis.dense(p, 4) @ psi, atol=1e-12
        )


def test_apply_on_matrix_columns(rng):
    p = paulis.from_label("XZYI", 0.5)
    mat = rng.normal(size=(16, 3)) + 1j * rng.normal(size=(16, 3))
    got = paulis.apply_pauli(p, mat, 4)
    for k in range(3):
        assert np.allclose(got[:, k], paulis.apply_pauli(p, mat[:, k], 4))


def test_expectations_are_real_and_consistent(rng):
    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    psi /= np.linalg.norm(psi)
    rho = np.outer(psi, psi.conj())
    for label in ("XIZI", "YYII", "IZZI", "XYZI"):
        p = paulis.from_label(label, 1.0)
        ev = paulis.expectation_state(p, psi, 4)
        dense_ev = np.vdot(psi, dense_reference(label) @ psi)
        assert abs(dense_ev.imag) < 1e-12
        assert abs(ev - dense_ev.real) < 1e-12
        assert abs(paulis.expectation_dm(p, rho, 4) - ev) < 1e-12


def test_matrix_element(rng):
    a = rng.normal(size=8) + 1j * rng.normal(size=8)
    b = rng.normal(size=8) + 1j * rng.normal(size=8)
    p = paulis.from_label("ZXY", -0.25)
    got = paulis.matrix_element(p, a, b, 3)
    assert np.allclose(got, a.conj() @ (dense_reference("ZXY") * -0.25) @ b)


def test_merge_terms():
    terms = [paulis.x_at(1), paulis.x_at(1).scaled(2.0), paulis.z_at(2)]
    merged = paulis.merge_terms(terms)
    assert len(merged) == 2
    total = {(t.x_mask, t.z_mask): t.coeff for t in merged}
    assert total[(1, 0)] == 3.0
    assert total[(0, 2)] == 1.0


def test_merge_drops_zeros():
    terms = [paulis.x_at(1), paulis.x_at(1).scaled(-1.0)]
    assert paulis.merge_terms(terms) == []


def test_site_constructors():
    assert paulis.x_at(3).x_mask == 4 and paulis.x_at(3).z_mask == 0
    assert paulis.z_at(1).z_mask == 1
    assert paulis.zz_at(2).z_mask == 0b110
    assert paulis.y_at(2).x_mask == paulis.y_at(2).z_mask == 2
    assert paulis.zz_at(1).sites() == [1, 2]
