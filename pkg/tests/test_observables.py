from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mbdyn.basis import spin_basis
from mbdyn.hamiltonian import SpinChainParams, build_spin_chain
from mbdyn.observables import (
    EntropyTrace,
    entropy_trace,
    first_minimum,
    moving_average,
    participation_number,
    shannon_entropy,
    spectrum_center_state,
)
from mbdyn.spectral import diagonalize, evolve_packet

weights = arrays(np.float64, st.integers(1, 60), elements=st.floats(0.0, 1.0)).filter(
    lambda a: a.sum() > 1e-3
).map(lambda a: a / a.sum())


def test_entropy_examples():
    assert shannon_entropy(np.eye(5)[2]) == 0.0
    assert shannon_entropy(np.full(256, 1 / 256)) == pytest.approx(5.545177444479562, abs=1e-12)
    assert shannon_entropy([0.5, 0.5]) == pytest.approx(math.log(2))


def test_entropy_rejects_bad_input():
    with pytest.raises(ValueError):
        shannon_entropy([0.5, 0.6])
    with pytest.raises(ValueError):
        shannon_entropy([1.5, -0.5])


def test_entropy_row_wise():
    w = np.array([[1.0, 0.0], [0.5, 0.5]])
    assert np.allclose(shannon_entropy(w), [0.0, math.log(2)])


def test_participation_examples():
    assert participation_number(np.eye(4)[0]) == pytest.approx((1.0, 1.0))
    assert participation_number(np.full(10, 0.1)) == pytest.approx((10.0, 10.0))
    e, ipr = participation_number([0.75, 0.25])
    s = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
    assert e == pytest.approx(math.exp(s)) and e == pytest.approx(1.7548, abs=1e-4)
    assert ipr == pytest.approx(1.6)


@given(weights)
def test_entropy_bounds_and_renyi_ordering(w):
    S = shannon_entropy(w)
    assert -1e-12 <= S <= math.log(w.size) + 1e-12
    e, ipr = participation_number(w)
    assert 1 - 1e-9 <= ipr <= e * (1 + 1e-9)
    assert e <= w.size * (1 + 1e-9)


@given(weights, st.randoms(use_true_random=False))
def test_entropy_permutation_invariant(w, rnd):
    perm = list(range(w.size))
    rnd.shuffle(perm)
    assert shannon_entropy(w[perm]) == pytest.approx(shannon_entropy(w), abs=1e-12)


@given(st.integers(2, 30), st.floats(0.0, 1.0), st.integers(0, 2**31))
def test_entropy_concavity(n, lam, seed):
    rng = np.random.default_rng(seed)
    u, v = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n) * 0.3)
    mix = lam * u + (1 - lam) * v
    mix /= mix.sum()
    assert shannon_entropy(mix) >= lam * shannon_entropy(u) + (1 - lam) * shannon_entropy(v) - 1e-12


def test_entropy_trace_on_spin_chain():
    b = spin_basis(5)
    H0, V = build_spin_chain(b, SpinChainParams(L=5, J=20.0, sigma_p=5.0, seed=1))
    k0 = spectrum_center_state(H0.diagonal)
    tr = entropy_trace(evolve_packet(diagonalize(H0 + V), k0, np.linspace(0, 0.3, 120)))
    assert tr.S[0] == pytest.approx(0.0, abs=1e-10)
    assert tr.S_max == pytest.approx(5 * math.log(2))
    assert np.all(tr.normalized <= 1 + 1e-12)
    assert np.all(tr.S >= -1e-12)


def test_moving_average():
    x = np.array([1.0, 2.0, 6.0, 2.0, 1.0])
    assert np.allclose(moving_average(x, 1), x)
    assert np.allclose(moving_average(x, 3), [1.0, 3.0, 10 / 3, 3.0, 1.0])
    with pytest.raises(ValueError):
        moving_average(x, 2)


def test_first_minimum_constructed():
    S = np.array([0.0, 1.0, 0.4, 1.2, 1.3, 1.4])
    rep = first_minimum(EntropyTrace(np.arange(6.0), S, 2.0), window=1)
    assert rep.found and rep.index == 2
    assert rep.t_min == 2.0 and rep.S_min == 0.4 and rep.ratio == 0.2


def test_first_minimum_monotone():
    S = np.linspace(0, 1, 50)
    assert not first_minimum(EntropyTrace(np.arange(50.0), S, 1.0)).found
    with pytest.raises(ValueError):
        first_minimum(EntropyTrace(np.arange(2.0), S[:2], 1.0))


def test_first_minimum_reports_raw_value_after_smoothing():
    t = np.linspace(0, 10, 400)
    S = 1 - np.exp(-t) + 0.3 * np.sin(2 * t) * np.exp(-0.2 * t)
    S_noisy = S + 1e-3 * np.random.default_rng(0).standard_normal(t.size)
    rep = first_minimum(EntropyTrace(t, S_noisy, 2.0), window=9)
    assert rep.found
    assert rep.S_min == S_noisy[rep.index]
    assert abs(rep.t_min - t[np.argmin(np.where((t > 1) & (t < 4), S, np.inf))]) < 0.2


def test_spectrum_center_state_ties_take_lowest_index():
    assert spectrum_center_state([3.0, 1.0, 2.0, 2.0, 5.0]) == 2
    # median 0.5 is equidistant from 0 and 1
    assert spectrum_center_state([0.0, 1.0, -1.0, 1.0]) == 0
