import numpy as np
import pytest

from otmlab.quantum import (
    DensityMatrix,
    KrausLayer,
    NumericalConsistencyError,
    PovmElement,
    SeparableOutcome,
    TwoLocalOutcome,
    assemble_two_local,
    born_probability,
    is_delta_non_negligible,
    matrix_from_json,
    matrix_to_json,
    negligible_mass,
    norms,
    tensor,
)

KET0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
KET1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def _random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def _random_state(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


def _random_povm_element(rng, d):
    h = _random_hermitian(rng, d)
    w, v = np.linalg.eigh(h)
    return PovmElement((v * np.clip(w, 0.0, 1.0)) @ v.conj().T)


def _random_complete_povm(rng, d, n):
    # conjugate random PSD pieces by the inverse square root of their sum
    pieces = []
    for _ in range(n):
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        pieces.append(a @ a.conj().T)
    s = sum(pieces)
    w, v = np.linalg.eigh(s)
    isqrt = (v / np.sqrt(w)) @ v.conj().T
    return [isqrt @ p @ isqrt for p in pieces]


# ---------------------------------------------------------------------------
# tensor
# ---------------------------------------------------------------------------

def test_tensor_identities():
    assert np.array_equal(tensor(I2, I2), np.eye(4))
    p01 = tensor(KET0, KET1)
    expect = np.zeros((4, 4), dtype=complex)
    expect[1, 1] = 1.0
    assert np.array_equal(p01, expect)


def test_tensor_operator_norm_multiplicative():
    rng = np.random.default_rng(11)
    for _ in range(20):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        lhs = norms(tensor(a, b))["operator"]
        rhs = np.linalg.svd(a, compute_uv=False)[0] * np.linalg.svd(b, compute_uv=False)[0]
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, rhs)


def test_tensor_dimension_cap():
    big = np.eye(1 << 7)
    mid = np.eye(1 << 6)
    with pytest.raises(ValueError):
        tensor(big, mid)  # 2^13 > 2^12
    tensor(mid, mid)  # 2^12 exactly: allowed


def test_tensor_rejects_non_square():
    with pytest.raises(ValueError):
        tensor(np.ones((2, 3)), I2)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def test_norms_identity_and_zero():
    n = norms(I2)
    assert n["operator"] == pytest.approx(1.0)
    assert n["frobenius"] == pytest.approx(np.sqrt(2.0))
    assert n["trace"] == pytest.approx(2.0)
    assert n["entrywise_linf"] == pytest.approx(1.0)
    z = norms(np.zeros((3, 3)))
    assert all(v == 0.0 for v in z.values())


def test_norms_hermitian_eigen_oracle():
    rng = np.random.default_rng(3)
    for _ in range(30):
        h = _random_hermitian(rng, 4)
        ev = np.linalg.eigvalsh(h)
        n = norms(h)
        assert n["operator"] == pytest.approx(np.abs(ev).max(), rel=1e-12, abs=1e-12)
        assert n["trace"] == pytest.approx(np.abs(ev).sum(), rel=1e-12, abs=1e-12)
        assert n["frobenius"] == pytest.approx(np.sqrt((ev ** 2).sum()), rel=1e-12, abs=1e-12)
        assert n["operator"] <= n["frobenius"] + 1e-12
        assert n["frobenius"] <= n["trace"] + 1e-12


def test_norms_rejects_nonfinite():
    bad = np.array([[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        norms(bad)


# ---------------------------------------------------------------------------
# Born rule
# ---------------------------------------------------------------------------

def test_born_probability_basics():
    assert born_probability(KET0, KET0) == pytest.approx(1.0)
    assert born_probability(KET0, KET1) == pytest.approx(0.0)
    assert born_probability(KET0, I2 / 2) == pytest.approx(0.5)


def test_born_probability_clamps_and_errors():
    # tiny negative excursion: clamped silently
    m = -5e-10 * I2
    assert born_probability(m, I2 / 2) == 0.0
    # moderate excursion: clamped with a warning
    with pytest.warns(UserWarning):
        assert born_probability(-5e-8 * I2, I2 / 2) == 0.0
    # gross violation: numerical-consistency error
    with pytest.raises(NumericalConsistencyError):
        born_probability(-1e-3 * I2, I2 / 2)
    with pytest.raises(NumericalConsistencyError):
        born_probability(2.0 * I2, I2 / 2)


def test_born_probability_dimension_mismatch():
    with pytest.raises(ValueError):
        born_probability(I2, np.eye(4) / 4)


# ---------------------------------------------------------------------------
# delta-non-negligibility and negligible mass
# ---------------------------------------------------------------------------

def test_non_negligible_boundary_cases():
    assert is_delta_non_negligible(I2, I2 / 2, 1.0)  # equality counts
    assert not is_delta_non_negligible(KET0, KET1, 0.1)  # 0 < 0.05
    assert is_delta_non_negligible(KET0, I2 / 2, 0.5)  # 0.5 >= 0.25


def test_non_negligible_rejects_bad_delta():
    for delta in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            is_delta_non_negligible(I2, I2 / 2, delta)


def test_non_negligible_scaling_invariance():
    rng = np.random.default_rng(5)
    for _ in range(40):
        m = _random_povm_element(rng, 4)
        rho = _random_state(rng, 4)
        base = is_delta_non_negligible(m, rho, 0.3)
        top = 1.0 / norms(m.matrix)["operator"]
        for c in (1e-6, 0.01, 0.5, 0.999 * top, top):
            assert is_delta_non_negligible(c * m.matrix, rho, 0.3) == base


def test_negligible_mass_symmetric_case():
    for m in (1, 2):
        d = 1 << m
        povm = [np.zeros((d, d), dtype=complex) for _ in range(d)]
        for z in range(d):
            povm[z][z, z] = 1.0
        rho = np.eye(d) / d
        for delta in (0.1, 0.5, 1.0):
            assert negligible_mass(povm, rho, delta) == 0.0


def test_negligible_mass_zero_probability_outcome():
    assert negligible_mass([KET0, KET1], KET0, 0.5) == 0.0


def test_negligible_mass_incomplete_rejected():
    with pytest.raises(ValueError):
        negligible_mass([KET0, KET0], I2 / 2, 0.5)


def test_negligible_mass_strictly_below_delta_randomized():
    rng = np.random.default_rng(17)
    for _ in range(50):
        d = rng.choice([2, 4])
        povm = _random_complete_povm(rng, int(d), int(rng.integers(2, 6)))
        rho = _random_state(rng, int(d))
        for delta in (0.05, 0.1, 0.3, 0.5, 0.9, 1.0):
            assert negligible_mass(povm, rho, delta) < delta


# ---------------------------------------------------------------------------
# wrapper type invariants
# ---------------------------------------------------------------------------

def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[1.0, 1e-6], [0.0, 0.0]]))  # not Hermitian
    with pytest.raises(ValueError):
        DensityMatrix(I2)  # trace 2
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))  # negative eigenvalue
    rho = DensityMatrix(np.diag([0.25, 0.75]))
    assert rho.dim == 2


def test_povm_element_validation():
    with pytest.raises(ValueError):
        PovmElement(np.diag([1.2, 0.0]))
    with pytest.raises(ValueError):
        PovmElement(np.diag([-0.2, 0.0]))
    m = PovmElement(np.diag([1.0, 0.0]))
    assert m.dim == 2
    assert not m.matrix.flags.writeable


def test_separable_outcome_materializes_to_povm_element():
    rng = np.random.default_rng(23)
    for _ in range(1000):
        m = int(rng.integers(1, 4))
        out = SeparableOutcome([_random_povm_element(rng, 2) for _ in range(m)])
        mat = out.assemble()
        assert isinstance(mat, PovmElement)
        assert mat.dim == 1 << m
    with pytest.raises(ValueError):
        SeparableOutcome([])
    with pytest.raises(ValueError):
        SeparableOutcome([np.eye(4)])


# ---------------------------------------------------------------------------
# 2-local assembly
# ---------------------------------------------------------------------------

def test_kraus_layer_validation():
    with pytest.raises(ValueError):
        KrausLayer([(0, 1), (1, 2)], [np.eye(4), np.eye(4)])  # overlap
    with pytest.raises(ValueError):
        KrausLayer([(0, 2)], [np.eye(4)])  # qubit 1 missing
    with pytest.raises(ValueError):
        KrausLayer([(0, 1)], [2.0 * np.eye(4)])  # operator norm 2
    with pytest.raises(ValueError):
        KrausLayer([(0, 1)], [np.eye(2)])


def test_two_local_identity_layers():
    t = TwoLocalOutcome([KrausLayer([(0, 1)], [np.eye(4)])])
    m = assemble_two_local(t)
    assert np.allclose(m.matrix, np.eye(4), atol=1e-12)


def test_two_local_projector_layer():
    p = np.zeros((4, 4), dtype=complex)
    p[2, 2] = 1.0  # |10><10| on the pair
    t = TwoLocalOutcome([KrausLayer([(0, 1)], [p])])
    m = assemble_two_local(t)
    assert np.allclose(m.matrix, p, atol=1e-12)


def test_two_local_crossed_pairing_matches_loop_oracle():
    # pairing (0,2),(1,3): entry M[(a0a1a2a3),(b0b1b3b3)] must factor as
    # F[(a0a2),(b0b2)] * G[(a1a3),(b1b3)]
    rng = np.random.default_rng(31)
    f = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    f /= np.linalg.norm(f, 2)
    g /= np.linalg.norm(g, 2)
    layer = KrausLayer([(0, 2), (1, 3)], [f, g])
    k = layer.operator()
    expect = np.zeros((16, 16), dtype=complex)
    for a in range(16):
        a0, a1, a2, a3 = (a >> 3) & 1, (a >> 2) & 1, (a >> 1) & 1, a & 1
        for b in range(16):
            b0, b1, b2, b3 = (b >> 3) & 1, (b >> 2) & 1, (b >> 1) & 1, b & 1
            expect[a, b] = f[(a0 << 1) | a2, (b0 << 1) | b2] * g[(a1 << 1) | a3, (b1 << 1) | b3]
    assert np.allclose(k, expect, atol=1e-12)


def test_two_local_random_layers_spectrum():
    rng = np.random.default_rng(37)
    for _ in range(10):
        layers = []
        for _ in range(2):
            fs = []
            for _ in range(2):
                a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
                fs.append(a / np.linalg.norm(a, 2))
            pairing = [(0, 1), (2, 3)] if rng.integers(2) else [(0, 2), (1, 3)]
            layers.append(KrausLayer(pairing, fs))
        m = assemble_two_local(TwoLocalOutcome(layers))
        ev = np.linalg.eigvalsh(m.matrix)
        assert ev.min() >= -1e-10 and ev.max() <= 1.0 + 1e-10


def test_two_local_separable_layer_matches_separable_outcome():
    rng = np.random.default_rng(41)
    for _ in range(10):
        facs = [_random_povm_element(rng, 2) for _ in range(4)]
        sep = SeparableOutcome(facs).assemble()
        # Kraus factor sqrt(Ma) (x) sqrt(Mb) per pair gives K^dag K = Ma (x) Mb
        def msqrt(p):
            w, v = np.linalg.eigh(p.matrix)
            return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
        layer = KrausLayer([(0, 1), (2, 3)],
                           [np.kron(msqrt(facs[0]), msqrt(facs[1])),
                            np.kron(msqrt(facs[2]), msqrt(facs[3]))])
        m = assemble_two_local(TwoLocalOutcome([layer]))
        assert np.abs(m.matrix - sep.matrix).max() <= 1e-10


def test_two_local_caps():
    layer8 = KrausLayer([(0, 1), (2, 3), (4, 5), (6, 7)], [np.eye(4)] * 4)
    with pytest.raises(ValueError):
        assemble_two_local(TwoLocalOutcome([layer8]))  # m = 8 > 6
    layer2 = KrausLayer([(0, 1)], [np.eye(4)])
    with pytest.raises(ValueError):
        assemble_two_local(TwoLocalOutcome([layer2] * 9))  # d = 9 > 8


def test_two_local_inconsistent_layers_rejected():
    l2 = KrausLayer([(0, 1)], [np.eye(4)])
    l4 = KrausLayer([(0, 1), (2, 3)], [np.eye(4), np.eye(4)])
    with pytest.raises(ValueError):
        TwoLocalOutcome([l2, l4])


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_matrix_json_round_trip_exact():
    rng = np.random.default_rng(43)
    m = rng.normal(size=(3, 3)) * 1e-7 + 1j * rng.normal(size=(3, 3)) * 1e3
    back = matrix_from_json(matrix_to_json(m))
    assert np.array_equal(back, m)  # bit-exact via 17 significant digits


def test_matrix_json_rejects_bad_payload():
    with pytest.raises(ValueError):
        matrix_from_json('{"dim": 2, "entries": [["0", "0"]]}')
