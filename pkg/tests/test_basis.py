from __future__ import annotations

from itertools import combinations
from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbdyn.basis import (
    CouplingKind,
    directly_coupled,
    enumerate_fermion_basis,
    popcount,
    spin_basis,
)
from mbdyn.errors import SizingError
from mbdyn.hamiltonian import TbriParams, build_tbri


def test_small_fermion_basis_listing():
    b = enumerate_fermion_basis(4, 2)
    assert b.N == 6
    assert [format(s, "04b") for s in b.states] == ["0011", "0101", "0110", "1001", "1010", "1100"]


def test_vacuum_basis():
    b = enumerate_fermion_basis(5, 0)
    assert b.N == 1 and b.states == (0,)


def test_half_filled_twelve_orbitals_matches_brute_force():
    b = enumerate_fermion_basis(12, 6)
    brute = [x for x in range(1 << 12) if bin(x).count("1") == 6]
    assert b.N == 924
    assert list(b.states) == brute


@given(st.integers(1, 10).flatmap(lambda M: st.tuples(st.just(M), st.integers(0, M))))
def test_fermion_invariants(mn):
    M, Np = mn
    b = enumerate_fermion_basis(M, Np)
    assert b.N == comb(M, Np)
    assert all(popcount(s) == Np and s < (1 << M) for s in b.states)
    assert all(b.states[i] < b.states[i + 1] for i in range(b.N - 1))
    assert all(b.index_of(b.state_at(i)) == i for i in range(b.N))


def test_fermion_errors():
    with pytest.raises(ValueError):
        enumerate_fermion_basis(3, 4)
    with pytest.raises(SizingError):
        enumerate_fermion_basis(20, 10)
    with pytest.raises(SizingError):
        enumerate_fermion_basis(12, 6, cap=100)


def test_spin_basis_sizes_and_digits():
    assert spin_basis(1).N == 2
    assert spin_basis(8).N == 256
    b = spin_basis(2)
    assert b.digits(2) == (1, 0)
    for L in (1, 3, 5):
        b = spin_basis(L)
        assert all(b.from_digits(b.digits(s)) == s for s in range(b.N))
        assert all(b.index_of(b.state_at(i)) == i for i in range(b.N))
    with pytest.raises(SizingError):
        spin_basis(0)
    with pytest.raises(SizingError):
        spin_basis(17)


def test_occupation_matrix_columns():
    b = spin_basis(3)
    occ = b.occupation_matrix()
    assert occ.shape == (8, 3)
    assert list(occ[5]) == [1, 0, 1]


@pytest.mark.parametrize("k0", [0, 17, 255])
def test_single_flip_count(k0):
    assert len(directly_coupled(spin_basis(8), k0)) == 8


def test_two_body_coupling_brute_force():
    b = enumerate_fermion_basis(4, 2)
    for k0 in range(b.N):
        coupled = directly_coupled(b, k0)
        assert len(coupled) == 5
        # brute force: occupation differs by at most two orbitals each way
        brute = [m for m in range(b.N) if m != k0
                 and popcount(b.states[m] & ~b.states[k0]) <= 2]
        assert coupled == brute


def test_single_particle_hops():
    b = enumerate_fermion_basis(7, 1)
    assert len(directly_coupled(b, 3)) == 6


def test_kind_override_and_bounds():
    b = spin_basis(3)
    assert b.kind is CouplingKind.SINGLE_FLIP
    with pytest.raises(IndexError):
        directly_coupled(b, 8)


@settings(max_examples=25)
@given(st.sampled_from([(5, 2), (6, 3), (7, 2), (6, 4)]), st.data())
def test_coupling_is_symmetric(mn, data):
    b = enumerate_fermion_basis(*mn)
    k0 = data.draw(st.integers(0, b.N - 1))
    for m in directly_coupled(b, k0):
        assert k0 in directly_coupled(b, m)


@pytest.mark.parametrize("M,Np", [(5, 2), (6, 3), (7, 4)])
def test_coupling_matches_tbri_row_sparsity(M, Np):
    b = enumerate_fermion_basis(M, Np)
    H = build_tbri(b, TbriParams(M, Np, V0=1.0, seed=11))
    for k0 in range(0, b.N, 3):
        idx, vals = H.row(k0)
        assert sorted(idx[vals != 0].tolist()) == directly_coupled(b, k0)


def test_brute_force_pairs_for_all_small_bases():
    # every pair differing by one or two moved particles is coupled
    b = enumerate_fermion_basis(6, 3)
    for i, j in combinations(range(b.N), 2):
        moved = popcount(b.states[i] ^ b.states[j]) // 2
        assert (j in directly_coupled(b, i)) == (1 <= moved <= 2)
