from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbdyn.basis import directly_coupled, enumerate_fermion_basis, spin_basis
from mbdyn.hamiltonian import (
    Provenance,
    SpinChainParams,
    SymmetricHamiltonian,
    TbriParams,
    add_perturbation,
    build_spin_chain,
    build_tbri,
    delta_e_squared_direct,
    delta_e_squared_tbri,
    single_particle_energies,
    spin_chain_delta_e_squared,
    two_body_amplitudes,
)
from mbdyn.rng import make_rng


def _jw_annihilators(M):
    """Jordan-Wigner annihilators on the full 2**M Fock space (index = bitmask)."""
    Z = np.diag([1.0, -1.0])
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    ops = []
    for s in range(M):
        mat = np.array([[1.0]])
        for k in reversed(range(M)):
            mat = np.kron(mat, a if k == s else (Z if k < s else np.eye(2)))
        ops.append(mat)
    return ops


def _fock_oracle(M, Np, W, d0=1.0):
    A = _jw_annihilators(M)
    pairs = list(combinations(range(M), 2))
    H = sum(d0 * s * A[s].T @ A[s] for s in range(M))
    for P, (p, q) in enumerate(pairs):
        for R, (r, s) in enumerate(pairs):
            H = H + W[P, R] * A[p].T @ A[q].T @ A[s] @ A[r]
    idx = list(enumerate_fermion_basis(M, Np).states)
    return H[np.ix_(idx, idx)]


@pytest.mark.parametrize("M,Np,seed", [(4, 2, 0), (5, 2, 3), (5, 3, 4), (6, 3, 9)])
def test_tbri_matches_second_quantization_oracle(M, Np, seed):
    W = two_body_amplitudes(M, 1.0, make_rng(seed))
    H = build_tbri(enumerate_fermion_basis(M, Np), TbriParams(M, Np), amplitudes=W)
    assert np.allclose(H.dense(), _fock_oracle(M, Np, W), atol=1e-12, rtol=0)


def test_tbri_special_cases():
    b = enumerate_fermion_basis(6, 1)
    H = build_tbri(b, TbriParams(6, 1, V0=1.0, seed=1))
    assert H.nnz_pairs == 0
    b = enumerate_fermion_basis(6, 3)
    H = build_tbri(b, TbriParams(6, 3, d0=0.5, V0=0.0, seed=1))
    occ = np.array([[x >> s & 1 for s in range(6)] for x in b.states])
    D = H.dense()
    assert np.array_equal(D, np.diag(np.diag(D)))
    assert np.allclose(H.diagonal, occ @ single_particle_energies(6, 0.5))


def test_tbri_is_symmetric_and_tagged():
    H = build_tbri(enumerate_fermion_basis(6, 3), TbriParams(6, 3, seed=2))
    D = H.dense()
    assert np.array_equal(D, D.T)
    assert set(np.unique(H.tags)) == {int(Provenance.DISORDER)}


def test_tbri_determinism():
    b = enumerate_fermion_basis(7, 3)
    H1 = build_tbri(b, TbriParams(7, 3, seed=5))
    H2 = build_tbri(b, TbriParams(7, 3, seed=5))
    H3 = build_tbri(b, TbriParams(7, 3, seed=6))
    assert np.array_equal(H1.dense(), H2.dense())
    assert not np.array_equal(H1.dense(), H3.dense())


def test_two_body_amplitude_variance():
    W = np.stack([two_body_amplitudes(8, 2.0, make_rng(0, r)) for r in range(40)])
    iu = np.triu_indices(W.shape[1])
    vals = W[:, iu[0], iu[1]].ravel()
    assert np.array_equal(W, np.swapaxes(W, 1, 2))
    assert abs(vals.var() / 4.0 - 1.0) < 0.05
    assert abs(vals.mean()) < 0.05


def test_single_particle_energies():
    assert list(single_particle_energies(3, 1.0)) == [0.0, 1.0, 2.0]
    assert list(single_particle_energies(1, 2.5)) == [0.0]
    assert np.mean(np.diff(single_particle_energies(9, 0.7))) == pytest.approx(0.7)


def test_spin_chain_two_qubit_diagonal():
    H0, V = build_spin_chain(spin_basis(2), SpinChainParams(L=2, a=1.0, J=1.0, Omega0=0.0))
    assert np.allclose(H0.diagonal, [0.0, 1.0, 0.0, -1.0])


def test_spin_chain_two_qubit_couplings():
    _, V = build_spin_chain(spin_basis(2), SpinChainParams(L=2, Omega0=100.0))
    D = V.dense()
    assert D[0, 1] == D[0, 2] == -50.0
    assert D[0, 3] == 0.0 and D[1, 2] == 0.0
    assert np.array_equal(D, D.T)


def test_spin_chain_flat_field_is_zero():
    H0, _ = build_spin_chain(spin_basis(4), SpinChainParams(L=4, a=0.0, J=0.0, omega0=3.0))
    assert np.all(H0.diagonal == 0.0)


def test_spin_chain_detuning_reference():
    p = SpinChainParams(L=3, a=2.0, omega0=5.0, nu=4.0)
    assert np.allclose(p.detuning, [1.0, 3.0, 5.0])


def test_spin_chain_sparsity_matches_single_flips():
    b = spin_basis(5)
    _, V = build_spin_chain(b, SpinChainParams(L=5, sigma_p=3.0, seed=1))
    for k0 in (0, 7, 31):
        idx, _ = V.row(k0)
        assert sorted(idx.tolist()) == directly_coupled(b, k0)


def test_spin_chain_disorder_statistics():
    b = spin_basis(8)
    _, V = build_spin_chain(b, SpinChainParams(L=8, Omega0=100.0, sigma_p=20.0), rng=make_rng(4))
    _, _, v = V.pairs()
    noise = -2.0 * v - 100.0
    assert abs(noise.std() / 20.0 - 1.0) < 0.05
    assert V.tags[0] == int(Provenance.DISORDER)


def test_spin_chain_width():
    b = spin_basis(8)
    H0, V = build_spin_chain(b, SpinChainParams(L=8, Omega0=100.0))
    for k0 in (0, 100, 255):
        assert delta_e_squared_direct(H0 + V, k0) == pytest.approx(8 * 50.0**2, rel=1e-14)
    assert spin_chain_delta_e_squared(8, 100.0) == 8 * 50.0**2


def test_perturbation_pattern_and_scaling():
    b = spin_basis(6)
    _, V = build_spin_chain(b, SpinChainParams(L=6, sigma_p=5.0, seed=3))
    S1 = add_perturbation(V, 1.0, (7, 0, 1))
    S3 = add_perturbation(V, 3.0, (7, 0, 1))
    i, j, _ = V.pairs()
    i1, j1, v1 = S1.pairs()
    assert np.array_equal(i, i1) and np.array_equal(j, j1)
    assert np.allclose(S3.pairs()[2], 3.0 * v1, rtol=0, atol=0)
    assert add_perturbation(V, 0.0, 1).norm() == 0.0
    for k0 in (0, 9, 63):
        assert np.count_nonzero(S1.row(k0)[1]) == 6


def test_perturbation_variance():
    b = spin_basis(11)
    _, V = build_spin_chain(b, SpinChainParams(L=11))
    _, _, v = add_perturbation(V, 0.4, 12).pairs()
    assert v.size >= 10_000
    assert abs(v.var() / 0.16 - 1.0) < 0.05


def test_perturbation_rejects_negative():
    _, V = build_spin_chain(spin_basis(2), SpinChainParams(L=2))
    with pytest.raises(ValueError):
        add_perturbation(V, -1.0)


def test_width_closed_form():
    assert delta_e_squared_tbri(1.0, 2, 4) == 5.0
    assert delta_e_squared_tbri(1.3, 1, 9) == 0.0
    assert delta_e_squared_tbri(1.3, 9, 9) == 0.0
    H = SymmetricHamiltonian(4, np.arange(4.0))
    assert delta_e_squared_direct(H, 2) == 0.0


def test_width_direct_sum_matches_dense_row():
    H = build_tbri(enumerate_fermion_basis(6, 3), TbriParams(6, 3, seed=8))
    D = H.dense()
    for k0 in range(0, 20, 4):
        row = np.delete(D[k0], k0)
        assert delta_e_squared_direct(H, k0) == pytest.approx(np.sum(row**2), rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**31), st.floats(0.1, 3.0))
def test_symmetric_storage_roundtrip(n, seed, scale):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) * scale
    A = A + A.T
    H = SymmetricHamiltonian.from_dense(A)
    assert np.array_equal(H.dense(), A)
    x = rng.standard_normal(n)
    assert np.allclose(H.matvec(x), A @ x)
    assert H.norm() == pytest.approx(np.linalg.norm(A))


def test_sum_and_select_by_provenance():
    b = spin_basis(3)
    H0, V = build_spin_chain(b, SpinChainParams(L=3, J=2.0, sigma_p=1.0, seed=1))
    S = add_perturbation(V, 0.5, 2)
    H = H0 + V + S
    assert np.allclose(H.dense(), H0.dense() + V.dense() + S.dense())
    assert np.allclose(H.select(Provenance.PERTURBATION, keep_diagonal=False).dense(), S.dense())
    assert np.allclose(H.diagonal_part().dense(), H0.dense())
