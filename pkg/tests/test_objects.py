import json

import numpy as np
import pytest

from epreserve import linalg
from epreserve.channels import FUSION_OP, NOISE_OPS, build_fusion, fully_depolarizing, gate_unitary
from epreserve.objects import (
    ChoiMatrix,
    DensityMatrix,
    KrausSet,
    ProcessMatrix,
    apply_process,
    choi_to_kraus,
    choi_to_process,
    compose,
    identity_process,
    kraus_to_process,
    normalize,
    operator_basis,
    process_to_choi,
    process_to_kraus,
    process_to_super,
    super_to_process,
    tensor_extend,
)

from factory import PHI_PLUS, PSI_PLUS, proj, rand_kraus, rand_process, rand_state

PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


def corner_entries(chi):
    return {(0, 0): chi[0, 0], (0, 15): chi[0, 15], (15, 0): chi[15, 0], (15, 15): chi[15, 15]}


def off_corner_max(chi):
    mask = np.ones_like(chi, dtype=bool)
    mask[np.ix_([0, 15], [0, 15])] = False
    return np.max(np.abs(chi[mask]))


# -- basis ------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2])
def test_basis_is_orthonormal(n):
    basis = operator_basis(n)
    gram = np.einsum("kij,lij->kl", basis.elements.conj(), basis.elements)
    np.testing.assert_array_equal(gram, np.eye(4**n))


def test_basis_index_law():
    basis = operator_basis(2)
    # k - 1 = sum_i k_i 2^(i-1) over (ket A, ket B, bra A, bra B)
    # E_1 = |00><00|, E_6 = |10><10|, E_11 = |01><01|, E_16 = |11><11|
    for k1, r in ((1, 0), (6, 2), (11, 1), (16, 3)):
        assert basis.index(r, r) == k1 - 1
    assert basis.index(2, 0) == 1  # E_2 = |10><00|
    assert basis.index(0, 2) == 4  # E_5 = |00><10|


# -- states -----------------------------------------------------------------


def test_density_matrix_validation():
    DensityMatrix(np.zeros((4, 4)))
    DensityMatrix(0.5 * proj(PHI_PLUS))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.0, -0.1]))
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(3) / 3)


def test_density_matrix_json_round_trip():
    rho = DensityMatrix(rand_state(np.random.default_rng(0)), "r")
    back = DensityMatrix.from_json(json.loads(json.dumps(rho.to_json())))
    np.testing.assert_array_equal(back.matrix, rho.matrix)
    assert back.label == "r"


# -- application ------------------------------------------------------------


def test_identity_process_acts_trivially():
    rho = rand_state(np.random.default_rng(1))
    np.testing.assert_allclose(apply_process(identity_process(2), rho).matrix, rho, atol=1e-14)


def test_fusion_keeps_bell_state():
    out = apply_process(build_fusion(0), proj(PHI_PLUS))
    np.testing.assert_allclose(out.matrix, proj(PHI_PLUS), atol=1e-14)
    assert out.trace == pytest.approx(1.0)


def test_fusion_heralds_bell_state_from_plus_plus():
    out = apply_process(build_fusion(0), proj(np.kron(PLUS, PLUS)))
    np.testing.assert_allclose(out.matrix, proj(PHI_PLUS) / 2, atol=1e-14)
    assert out.trace == pytest.approx(0.5)


def test_apply_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_process(identity_process(2), np.eye(2) / 2)


# -- Kraus to process -------------------------------------------------------


def test_fusion_operator_entries():
    chi = kraus_to_process([FUSION_OP]).chi
    for v in corner_entries(chi).values():
        assert v == pytest.approx(0.25)
    assert off_corner_max(chi) == 0


def test_noise_operator_entries():
    chi = kraus_to_process(list(NOISE_OPS)).chi
    assert chi[0, 0] == pytest.approx(0.25) and chi[15, 15] == pytest.approx(0.25)
    chi2 = chi.copy()
    chi2[0, 0] = chi2[15, 15] = 0
    assert np.max(np.abs(chi2)) == 0


def test_identity_entries_pair_diagonal_units():
    chi = kraus_to_process([np.eye(4)]).chi
    idx = [0, 5, 10, 15]
    expected = np.zeros((16, 16))
    expected[np.ix_(idx, idx)] = 0.25
    np.testing.assert_allclose(chi, expected, atol=1e-15)


def test_kraus_to_process_matches_kraus_action():
    rng = np.random.default_rng(2)
    ops = rand_kraus(rng, 4, 3, trace_preserving=False)
    chi = kraus_to_process(ops)
    for _ in range(20):
        rho = rand_state(rng)
        np.testing.assert_allclose(apply_process(chi, rho).matrix, sum(k @ rho @ k.conj().T for k in ops),
                                   atol=1e-12)


def test_kraus_to_process_is_psd_on_random_sets():
    rng = np.random.default_rng(3)
    for _ in range(100):
        ops = rand_kraus(rng, 4, int(rng.integers(1, 5)), trace_preserving=False)
        assert linalg.is_psd(kraus_to_process(ops).chi, 1e-9)


def test_kraus_set_validation():
    with pytest.raises(ValueError):
        KrausSet((2 * np.eye(2),))
    with pytest.raises(ValueError):
        KrausSet((np.eye(2), np.eye(4)))
    with pytest.raises(ValueError):
        KrausSet(())


# -- conversions -------------------------------------------------------------


def roundtrips(p):
    yield super_to_process(process_to_super(p))
    yield choi_to_process(process_to_choi(p))
    yield kraus_to_process(process_to_kraus(p))
    yield ProcessMatrix.from_json(json.loads(json.dumps(p.to_json())))


@pytest.mark.parametrize("p_noise", [0.0, 0.5, 1.0])
def test_fusion_round_trips(p_noise):
    chi = build_fusion(p_noise)
    for back in roundtrips(chi):
        assert np.linalg.norm(back.chi - chi.chi) <= 1e-10


def test_random_round_trips():
    rng = np.random.default_rng(4)
    for n in (1, 2):
        for _ in range(20):
            chi = rand_process(rng, n, int(rng.integers(1, 4)), trace_preserving=False)
            for back in roundtrips(chi):
                assert np.linalg.norm(back.chi - chi.chi) <= 1e-10


def test_choi_of_identity_is_unnormalised_bell_projector():
    omega = np.zeros(16)
    omega[[0, 5, 10, 15]] = 1.0
    np.testing.assert_allclose(process_to_choi(identity_process(2)).matrix, np.outer(omega, omega), atol=1e-14)


def test_choi_to_kraus_of_noise_reproduces_action():
    noise = kraus_to_process(list(NOISE_OPS))
    ks = choi_to_kraus(process_to_choi(noise))
    assert len(ks.operators) == 2
    rng = np.random.default_rng(5)
    for _ in range(10):
        rho = rand_state(rng)
        np.testing.assert_allclose(ks.apply(rho), apply_process(noise, rho).matrix, atol=1e-12)


def test_non_psd_choi_is_rejected():
    swap_pt = np.eye(16)
    swap_pt[0, 0] = -1
    with pytest.raises(ValueError):
        choi_to_process(swap_pt)
    with pytest.raises(ValueError):
        choi_to_kraus(swap_pt)
    with pytest.raises(ValueError):
        ProcessMatrix(-np.eye(16) / 16)


def test_superoperator_of_kraus_is_conj_kron():
    k = gate_unitary("H")
    s = process_to_super(kraus_to_process([k])).matrix
    np.testing.assert_allclose(s, np.kron(k.conj(), k), atol=1e-14)


def test_four_representations_agree():
    rng = np.random.default_rng(6)
    chi = rand_process(rng, 2, 3, trace_preserving=False)
    ks = process_to_kraus(chi)
    sup = process_to_super(chi)
    choi = process_to_choi(chi)
    for _ in range(100):
        rho = rand_state(rng)
        ref = apply_process(chi, rho).matrix
        for other in (ks.apply(rho), sup.apply(rho), choi.apply(rho)):
            assert np.max(np.abs(other - ref)) <= 1e-10


def test_trace_preserving_processes_keep_trace():
    rng = np.random.default_rng(7)
    chi = rand_process(rng, 2, 3)
    assert chi.is_trace_preserving()
    for _ in range(50):
        rho = rand_state(rng)
        assert abs(apply_process(chi, rho).trace - 1.0) <= 1e-10
    assert not build_fusion(0).is_trace_preserving()


# -- tensor extension, normalisation, composition ----------------------------


def test_tensor_extend_identity():
    np.testing.assert_allclose(tensor_extend(identity_process(1), identity_process(1)).chi,
                               identity_process(2).chi, atol=1e-14)


def test_x_on_a_maps_phi_plus_to_psi_plus():
    x_a = tensor_extend(kraus_to_process([gate_unitary("X")]), identity_process(1))
    np.testing.assert_allclose(apply_process(x_a, proj(PHI_PLUS)).matrix, proj(PSI_PLUS), atol=1e-14)


def test_depolarising_a_gives_maximally_mixed_output():
    dep = tensor_extend(fully_depolarizing(1), identity_process(1))
    np.testing.assert_allclose(apply_process(dep, proj(PHI_PLUS)).matrix, np.eye(4) / 4, atol=1e-14)


def test_tensor_extend_acts_on_products():
    rng = np.random.default_rng(8)
    for _ in range(20):
        p = rand_process(rng, 1, 2, trace_preserving=False)
        ext = tensor_extend(p, identity_process(1))
        a, b = rand_state(rng, 2), rand_state(rng, 2)
        want = np.kron(apply_process(p, a).matrix, b)
        assert np.max(np.abs(apply_process(ext, np.kron(a, b)).matrix - want)) <= 1e-10


def test_tensor_extend_rejects_two_qubit_inputs():
    with pytest.raises(ValueError):
        tensor_extend(identity_process(2), identity_process(1))


def test_normalize_fusion_and_noise():
    fused = normalize(build_fusion(0)).chi
    for v in corner_entries(fused).values():
        assert v == pytest.approx(0.5)
    noise = normalize(build_fusion(1)).chi
    assert noise[0, 0] == pytest.approx(0.5) and noise[15, 15] == pytest.approx(0.5)
    assert normalize(build_fusion(1)).normalized


def test_normalize_leaves_normalised_process_alone():
    p = identity_process(2)
    assert normalize(p) is p


def test_normalize_rejects_zero_trace():
    with pytest.raises(ValueError):
        normalize(ProcessMatrix(np.zeros((16, 16))))


def test_compose_applies_inner_first():
    rng = np.random.default_rng(9)
    outer, inner = rand_process(rng), rand_process(rng)
    rho = rand_state(rng)
    want = apply_process(outer, apply_process(inner, rho).matrix).matrix
    np.testing.assert_allclose(apply_process(compose(outer, inner), rho).matrix, want, atol=1e-12)


def test_choi_matrix_apply_uses_input_first_convention():
    k = gate_unitary("CNOT")
    choi = process_to_choi(kraus_to_process([k]))
    assert isinstance(choi, ChoiMatrix)
    rho = rand_state(np.random.default_rng(10))
    np.testing.assert_allclose(choi.apply(rho), k @ rho @ k.conj().T, atol=1e-13)
