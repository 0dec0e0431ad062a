"""Hamiltonian construction for the two-body random interaction (TBRI) model
and the single-pulse spin-chain quantum computer.

Matrices are real symmetric.  Off-diagonal entries are stored once per
unordered pair ``(i, j)`` with ``i < j`` and carry a provenance tag, so a sum
such as ``H0 + V + Sigma`` keeps the perturbation separable from the model.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .basis import FermionBasis, SpinBasis, popcount
from .rng import SeedLike, make_rng

__all__ = [
    "Provenance",
    "SymmetricHamiltonian",
    "TbriParams",
    "SpinChainParams",
    "single_particle_energies",
    "two_body_amplitudes",
    "build_tbri",
    "build_spin_chain",
    "add_perturbation",
    "delta_e_squared_direct",
    "delta_e_squared_tbri",
    "spin_chain_delta_e_squared",
]


class Provenance(enum.IntEnum):
    DETERMINISTIC = 0
    DISORDER = 1
    PERTURBATION = 2


_EMPTY_I = np.zeros(0, dtype=np.int64)
_EMPTY_F = np.zeros(0, dtype=np.float64)
_EMPTY_T = np.zeros(0, dtype=np.int8)


def _coalesce(n, rows, cols, values, tags):
    """Sum duplicate ``(i, j, tag)`` entries; output sorted by (i, j, tag)."""
    if rows.size == 0:
        return _EMPTY_I, _EMPTY_I, _EMPTY_F, _EMPTY_T
    key = (rows * n + cols) * 3 + tags
    uniq, inv = np.unique(key, return_inverse=True)
    vals = np.bincount(inv, weights=values, minlength=uniq.size)
    t = (uniq % 3).astype(np.int8)
    pair = uniq // 3
    return pair // n, pair % n, vals, t


@dataclass(frozen=True, eq=False)
class SymmetricHamiltonian:
    """Real symmetric ``N x N`` matrix: dense diagonal plus tagged pair list."""

    N: int
    diagonal: np.ndarray
    rows: np.ndarray = _EMPTY_I
    cols: np.ndarray = _EMPTY_I
    values: np.ndarray = _EMPTY_F
    tags: np.ndarray = _EMPTY_T

    def __post_init__(self):
        diag = np.asarray(self.diagonal, dtype=np.float64)
        if diag.shape != (self.N,):
            raise ValueError(f"diagonal has shape {diag.shape}, expected ({self.N},)")
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        tags = np.asarray(self.tags, dtype=np.int8)
        if not (rows.shape == cols.shape == vals.shape == tags.shape):
            raise ValueError("pair arrays must have equal length")
        if rows.size:
            if np.any(rows >= cols):
                raise ValueError("off-diagonal entries must satisfy i < j")
            if rows.min() < 0 or cols.max() >= self.N:
                raise IndexError("off-diagonal index out of range")
        rows, cols, vals, tags = _coalesce(self.N, rows, cols, vals, tags)
        for name, arr in (("diagonal", diag), ("rows", rows), ("cols", cols),
                          ("values", vals), ("tags", tags)):
            arr = np.array(arr, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_pairs(cls, N, diagonal, pairs, values, tag=Provenance.DETERMINISTIC):
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        i = np.minimum(pairs[:, 0], pairs[:, 1])
        j = np.maximum(pairs[:, 0], pairs[:, 1])
        return cls(N, diagonal, i, j, np.asarray(values, dtype=np.float64),
                   np.full(i.size, int(tag), dtype=np.int8))

    @classmethod
    def from_dense(cls, H, tag=Provenance.DETERMINISTIC, atol: float = 0.0):
        H = np.asarray(H, dtype=np.float64)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("need a square matrix")
        if not np.array_equal(H, H.T):
            raise ValueError("matrix is not exactly symmetric")
        i, j = np.triu_indices(H.shape[0], k=1)
        v = H[i, j]
        keep = np.abs(v) > atol
        return cls(H.shape[0], np.diag(H).copy(), i[keep], j[keep], v[keep],
                   np.full(int(keep.sum()), int(tag), dtype=np.int8))

    @property
    def nnz_pairs(self) -> int:
        return int(self.rows.size)

    def __add__(self, other: "SymmetricHamiltonian") -> "SymmetricHamiltonian":
        if not isinstance(other, SymmetricHamiltonian):
            return NotImplemented
        if other.N != self.N:
            raise ValueError(f"dimension mismatch: {self.N} vs {other.N}")
        return SymmetricHamiltonian(
            self.N,
            self.diagonal + other.diagonal,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.values, other.values]),
            np.concatenate([self.tags, other.tags]),
        )

    def scaled(self, factor: float) -> "SymmetricHamiltonian":
        return SymmetricHamiltonian(self.N, self.diagonal * factor, self.rows, self.cols,
                                    self.values * factor, self.tags)

    def diagonal_part(self) -> "SymmetricHamiltonian":
        return SymmetricHamiltonian(self.N, self.diagonal)

    def offdiagonal_part(self) -> "SymmetricHamiltonian":
        return SymmetricHamiltonian(self.N, np.zeros(self.N), self.rows, self.cols,
                                    self.values, self.tags)

    def select(self, *tags: Provenance, keep_diagonal: bool = True) -> "SymmetricHamiltonian":
        """Sub-matrix made of the off-diagonal entries carrying ``tags``."""
        mask = np.isin(self.tags, [int(t) for t in tags])
        diag = self.diagonal if keep_diagonal else np.zeros(self.N)
        return SymmetricHamiltonian(self.N, diag, self.rows[mask], self.cols[mask],
                                    self.values[mask], self.tags[mask])

    def pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unique pairs ``(i, j, value)`` with provenance summed out."""
        i, j, v, _ = _coalesce(self.N, self.rows, self.cols, self.values,
                               np.zeros_like(self.tags))
        return i, j, v

    def row(self, k0: int) -> tuple[np.ndarray, np.ndarray]:
        """Off-diagonal column indices and values of row ``k0``."""
        if not 0 <= k0 < self.N:
            raise IndexError(k0)
        i, j, v = self.pairs()
        idx = np.concatenate([j[i == k0], i[j == k0]])
        val = np.concatenate([v[i == k0], v[j == k0]])
        order = np.argsort(idx, kind="stable")
        return idx[order], val[order]

    def dense(self) -> np.ndarray:
        H = np.diag(self.diagonal)
        np.add.at(H, (self.rows, self.cols), self.values)
        np.add.at(H, (self.cols, self.rows), self.values)
        return H

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        y = self.diagonal * x
        np.add.at(y, self.rows, self.values * x[self.cols])
        np.add.at(y, self.cols, self.values * x[self.rows])
        return y

    def norm(self) -> float:
        """Frobenius norm."""
        _, _, v = self.pairs()
        return float(np.sqrt(np.sum(self.diagonal**2) + 2.0 * np.sum(v**2)))


@dataclass(frozen=True)
class TbriParams:
    M: int
    Np: int
    d0: float = 1.0
    V0: float = 1.0
    seed: SeedLike = 0

    def __post_init__(self):
        if not 0 <= self.Np <= self.M:
            raise ValueError(f"need 0 <= Np <= M, got Np={self.Np}, M={self.M}")
        if not self.d0 > 0:
            raise ValueError("d0 must be positive")
        if not self.V0 >= 0:
            raise ValueError("V0 must be non-negative")


@dataclass(frozen=True)
class SpinChainParams:
    """Single-pulse spin chain; ``nu=None`` means resonant with ``omega0``."""

    L: int = 8
    a: float = 1.0
    omega0: float = 0.0
    nu: float | None = None
    J: float = 0.0
    Omega0: float = 100.0
    sigma_p: float = 0.0
    epsilon: float = 0.0
    seed: SeedLike = 0

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.sigma_p < 0 or self.epsilon < 0:
            raise ValueError("sigma_p and epsilon must be non-negative")

    @property
    def detuning(self) -> np.ndarray:
        """``xi_k = omega0 + a*k - nu`` for each qubit."""
        nu = self.omega0 if self.nu is None else self.nu
        return self.omega0 + self.a * np.arange(self.L, dtype=np.float64) - nu


def single_particle_energies(M: int, d0: float = 1.0) -> np.ndarray:
    if M < 1:
        raise ValueError("M must be >= 1")
    return d0 * np.arange(M, dtype=np.float64)


def _pair_list(M: int) -> list[tuple[int, int]]:
    return list(combinations(range(M), 2))


def two_body_amplitudes(M: int, V0: float, rng) -> np.ndarray:
    """Symmetric matrix of two-body elements over ordered orbital pairs.

    Entry ``[P, R]`` is ``<p q|V|r s>`` for pairs ``P=(p<q)``, ``R=(r<s)`` in
    lexicographic order.  One Gaussian draw of variance ``V0**2`` per unordered
    ``{P, R}``, including the diagonal ``P == R``.
    """
    n = M * (M - 1) // 2
    iu = np.triu_indices(n)
    draws = rng.standard_normal(iu[0].size) * V0
    W = np.zeros((n, n))
    W[iu] = draws
    W[(iu[1], iu[0])] = draws
    return W


def _sign_below(x: int, s: int) -> int:
    return -1 if popcount(x & ((1 << s) - 1)) & 1 else 1


@lru_cache(maxsize=16)
def _tbri_structure(M: int, Np: int, states: tuple[int, ...]):
    """Action of every ``a+_p a+_q a_s a_r`` on the basis, upper triangle only.

    Returns ``(rows, cols, pair_out, pair_in, sign)`` arrays; many-body element
    ``H[row, col]`` receives ``sign * W[pair_out, pair_in]``.
    """
    index = {s: i for i, s in enumerate(states)}
    pairs = _pair_list(M)
    pair_index = {p: n for n, p in enumerate(pairs)}
    out_r, out_c, out_p, out_q, out_s = [], [], [], [], []
    for k, x in enumerate(states):
        occ = [o for o in range(M) if x >> o & 1]
        for r, s in combinations(occ, 2):
            # a_r acts first; it removes one orbital below s
            sg = _sign_below(x, r) * _sign_below(x & ~(1 << r), s)
            base = x & ~(1 << r) & ~(1 << s)
            R = pair_index[(r, s)]
            free = [o for o in range(M) if not base >> o & 1]
            for p, q in combinations(free, 2):
                m_state = base | (1 << p) | (1 << q)
                m = index[m_state]
                if m > k:
                    continue
                sgn = sg * _sign_below(base, q) * _sign_below(base, p)
                out_r.append(m)
                out_c.append(k)
                out_p.append(pair_index[(p, q)])
                out_q.append(R)
                out_s.append(sgn)
    rows = np.array(out_r, dtype=np.int64)
    cols = np.array(out_c, dtype=np.int64)
    key = rows * len(states) + cols
    uniq, inv = np.unique(key, return_inverse=True)
    return (uniq // len(states), uniq % len(states), inv,
            np.array(out_p, dtype=np.int64), np.array(out_q, dtype=np.int64),
            np.array(out_s, dtype=np.float64))


def build_tbri(basis: FermionBasis, params: TbriParams, amplitudes: np.ndarray | None = None,
               rng=None) -> SymmetricHamiltonian:
    """TBRI Hamiltonian ``H0 + V`` on a fermion basis.

    ``amplitudes`` overrides the random two-body matrix (see
    :func:`two_body_amplitudes`); otherwise it is drawn from ``rng`` or from
    ``params.seed``.  Density-density terms land on the diagonal.
    """
    if basis.M != params.M or basis.Np != params.Np:
        raise ValueError("basis does not match params")
    eps = single_particle_energies(params.M, params.d0) if params.M else np.zeros(0)
    occ = np.array([[x >> s & 1 for s in range(params.M)] for x in basis.states],
                   dtype=np.float64).reshape(basis.N, params.M)
    diag = occ @ eps
    if params.Np < 2 or params.M < 2:
        return SymmetricHamiltonian(basis.N, diag)
    if amplitudes is None:
        rng = make_rng(params.seed) if rng is None else rng
        amplitudes = two_body_amplitudes(params.M, params.V0, rng)
    urow, ucol, inv, pout, pin, sgn = _tbri_structure(params.M, params.Np, basis.states)
    contrib = sgn * amplitudes[pout, pin]
    vals = np.bincount(inv, weights=contrib, minlength=urow.size)
    on_diag = urow == ucol
    diag = diag + np.bincount(urow[on_diag], weights=vals[on_diag], minlength=basis.N)
    off = ~on_diag
    return SymmetricHamiltonian(basis.N, diag, urow[off], ucol[off], vals[off],
                                np.full(int(off.sum()), int(Provenance.DISORDER), dtype=np.int8))


def _single_flip_pairs(L: int) -> tuple[np.ndarray, np.ndarray]:
    s = np.arange(1 << L, dtype=np.int64)
    lo, hi = [], []
    for k in range(L):
        src = s[(s >> k) & 1 == 0]
        lo.append(src)
        hi.append(src | (1 << k))
    lo = np.concatenate(lo)
    hi = np.concatenate(hi)
    order = np.lexsort((hi, lo))
    return lo[order], hi[order]


def build_spin_chain(basis: SpinBasis, params: SpinChainParams, rng=None
                     ) -> tuple[SymmetricHamiltonian, SymmetricHamiltonian]:
    """Return ``(H0, V)`` for the stationary single-pulse chain.

    ``H0`` is diagonal: ``-sum_k xi_k m_k - 2J sum_k m_k m_{k+1}`` with
    ``m_k = +-1/2`` (open chain).  ``V`` couples single-flip pairs with
    ``-(Omega0 + xi_p)/2``, one Gaussian ``xi_p`` of std ``sigma_p`` per pair.
    """
    if basis.L != params.L:
        raise ValueError("basis does not match params")
    m = basis.occupation_matrix().astype(np.float64) - 0.5
    xi = params.detuning
    diag = -(m @ xi)
    if params.L > 1:
        diag -= 2.0 * params.J * np.sum(m[:, :-1] * m[:, 1:], axis=1)
    H0 = SymmetricHamiltonian(basis.N, diag)
    lo, hi = _single_flip_pairs(params.L)
    rng = make_rng(params.seed) if rng is None else rng
    noise = rng.standard_normal(lo.size) * params.sigma_p
    vals = -(params.Omega0 + noise) / 2.0
    tag = Provenance.DISORDER if params.sigma_p > 0 else Provenance.DETERMINISTIC
    V = SymmetricHamiltonian(basis.N, np.zeros(basis.N), lo, hi, vals,
                             np.full(lo.size, int(tag), dtype=np.int8))
    return H0, V


def add_perturbation(V: SymmetricHamiltonian, epsilon: float, seed: SeedLike = 0
                     ) -> SymmetricHamiltonian:
    """Random matrix ``Sigma`` sharing the off-diagonal pattern of ``V``.

    Each stored pair gets an independent ``N(0, epsilon**2)`` entry.  For a
    fixed ``seed`` the result is ``epsilon`` times a fixed pattern, so sweeps
    over ``epsilon`` use common random numbers.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    i, j, _ = V.pairs()
    rng = make_rng(seed)
    vals = rng.standard_normal(i.size) * epsilon
    return SymmetricHamiltonian(V.N, np.zeros(V.N), i, j, vals,
                                np.full(i.size, int(Provenance.PERTURBATION), dtype=np.int8))


def delta_e_squared_direct(H: SymmetricHamiltonian, k0: int) -> float:
    """``sum_{m != k0} H[m, k0]**2``, the second moment of the strength function."""
    _, vals = H.row(k0)
    return float(np.sum(vals**2))


def delta_e_squared_tbri(V0: float, Np: int, M: int) -> float:
    if not 0 <= Np <= M:
        raise ValueError("need 0 <= Np <= M")
    return 0.25 * V0**2 * Np * (Np - 1) * (M - Np) * (M - Np + 3)


def spin_chain_delta_e_squared(L: int, Omega0: float, sigma_p: float = 0.0) -> float:
    """Disorder-averaged row width ``L * (Omega0**2 + sigma_p**2) / 4``."""
    return L * (Omega0**2 + sigma_p**2) / 4.0
