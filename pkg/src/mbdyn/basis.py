"""Many-body bases: fermion occupation bitmasks and spin-chain binary indices.

Fermion states are integers whose set bits are the occupied orbitals (bit ``s``
set means orbital ``s`` is occupied).  Spin states use the binary digits of the
index, digit ``k`` equal to 1 meaning qubit ``k`` is excited.  Both bases are
ordered by increasing integer value.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .errors import SizingError

__all__ = [
    "DEFAULT_DIMENSION_CAP",
    "CouplingKind",
    "FermionBasis",
    "SpinBasis",
    "enumerate_fermion_basis",
    "spin_basis",
    "directly_coupled",
    "popcount",
]

DEFAULT_DIMENSION_CAP = 1 << 16
MAX_ORBITALS = 24
MAX_QUBITS = 16


def popcount(x: int) -> int:
    return int(x).bit_count()


class CouplingKind(enum.Enum):
    TWO_BODY = "two-body"
    SINGLE_FLIP = "single-flip"


@dataclass(frozen=True)
class FermionBasis:
    """Slater-determinant basis of ``Np`` fermions in ``M`` orbitals."""

    M: int
    Np: int
    states: tuple[int, ...]
    _index: dict[int, int] = field(repr=False, compare=False, default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.states)

    @property
    def dimension(self) -> int:
        return len(self.states)

    @property
    def kind(self) -> CouplingKind:
        return CouplingKind.TWO_BODY

    def state_at(self, i: int) -> int:
        return self.states[i]

    def index_of(self, state: int) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise KeyError(f"bitmask {state:#b} is not in the basis") from None

    def occupied(self, i: int) -> tuple[int, ...]:
        """Occupied orbitals of basis state ``i`` in ascending order."""
        s = self.states[i]
        return tuple(k for k in range(self.M) if s >> k & 1)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.states, dtype=np.int64)


@dataclass(frozen=True)
class SpinBasis:
    """Computational basis of ``L`` qubits, ``N = 2**L``."""

    L: int

    @property
    def N(self) -> int:
        return 1 << self.L

    @property
    def dimension(self) -> int:
        return 1 << self.L

    @property
    def kind(self) -> CouplingKind:
        return CouplingKind.SINGLE_FLIP

    def state_at(self, i: int) -> int:
        if not 0 <= i < self.N:
            raise IndexError(i)
        return i

    def index_of(self, state: int) -> int:
        if not 0 <= state < self.N:
            raise KeyError(state)
        return state

    def digits(self, s: int) -> tuple[int, ...]:
        """Binary digits ``(i_{L-1}, ..., i_0)`` of index ``s``."""
        if not 0 <= s < self.N:
            raise IndexError(s)
        return tuple((s >> k) & 1 for k in reversed(range(self.L)))

    def from_digits(self, digits) -> int:
        digits = tuple(digits)
        if len(digits) != self.L or any(d not in (0, 1) for d in digits):
            raise ValueError(f"expected {self.L} binary digits, got {digits}")
        s = 0
        for d in digits:
            s = (s << 1) | d
        return s

    def occupation_matrix(self) -> np.ndarray:
        """``(N, L)`` array of digits, column ``k`` holding ``i_k``."""
        s = np.arange(self.N, dtype=np.int64)[:, None]
        return ((s >> np.arange(self.L)) & 1).astype(np.int8)


def enumerate_fermion_basis(M: int, Np: int, cap: int = DEFAULT_DIMENSION_CAP) -> FermionBasis:
    if M < 0 or Np < 0:
        raise ValueError("M and Np must be non-negative")
    if Np > M:
        raise ValueError(f"Np={Np} exceeds M={M}")
    if M > MAX_ORBITALS:
        raise SizingError(f"M={M} exceeds the orbital limit {MAX_ORBITALS}")
    n = comb(M, Np)
    if n > cap:
        raise SizingError(f"basis dimension C({M},{Np})={n} exceeds cap {cap}")
    states = sorted(sum(1 << s for s in occ) for occ in combinations(range(M), Np))
    index = {s: i for i, s in enumerate(states)}
    return FermionBasis(M=M, Np=Np, states=tuple(states), _index=index)


def spin_basis(L: int) -> SpinBasis:
    if not 1 <= L <= MAX_QUBITS:
        raise SizingError(f"L={L} outside supported range 1..{MAX_QUBITS}")
    return SpinBasis(L)


def directly_coupled(basis, k0: int, kind: CouplingKind | None = None) -> list[int]:
    """Basis indices reachable from ``k0`` by one application of the interaction.

    Two-body coupling links states whose occupations differ by at most two
    orbitals each way; single-flip coupling links indices differing in exactly
    one binary digit.  ``len`` of the result is ``N_f``.
    """
    if not 0 <= k0 < basis.N:
        raise IndexError(f"k0={k0} outside 0..{basis.N - 1}")
    kind = basis.kind if kind is None else kind
    if kind is CouplingKind.SINGLE_FLIP:
        if not isinstance(basis, SpinBasis):
            raise TypeError("single-flip coupling needs a SpinBasis")
        return sorted(k0 ^ (1 << k) for k in range(basis.L))
    if not isinstance(basis, FermionBasis):
        raise TypeError("two-body coupling needs a FermionBasis")
    ref = basis.states[k0]
    states = basis.as_array()
    diff = np.bitwise_xor(states, ref)
    # equal particle number: popcount(diff) = 2 * (orbitals moved)
    moved = np.array([popcount(int(d)) for d in diff]) // 2
    return [int(i) for i in np.flatnonzero((moved >= 1) & (moved <= 2))]
