"""Exact diagonalization and spectral time evolution (hbar = 1)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import DEFAULT_DIMENSION_CAP
from .errors import NumericalError, SizingError
from .hamiltonian import SymmetricHamiltonian

__all__ = [
    "SpectralDecomposition",
    "PacketTrajectory",
    "StrengthFunctionProfile",
    "SpacingStatistics",
    "diagonalize",
    "evolve_packet",
    "return_probability",
    "overlap_fidelity",
    "strength_function",
    "level_spacing_statistics",
    "time_grid",
]

_TIME_CHUNK = 128


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues (ascending) and eigenvector matrix ``C[k, alpha]``."""

    energies: np.ndarray
    states: np.ndarray

    @property
    def N(self) -> int:
        return self.energies.size

    def weights(self, k0: int) -> np.ndarray:
        """Strength-function weights ``|C[k0, alpha]|**2``."""
        return self.states[k0] ** 2

    def reconstruct(self) -> np.ndarray:
        return (self.states * self.energies) @ self.states.T


@dataclass
class PacketTrajectory:
    times: np.ndarray
    k0: int
    w: np.ndarray
    W0: np.ndarray
    S: np.ndarray | None = None
    F: np.ndarray | None = None


@dataclass
class StrengthFunctionProfile:
    edges: np.ndarray
    heights: np.ndarray
    centroid: float
    variance: float
    energies: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    fit: object | None = None

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)


@dataclass
class SpacingStatistics:
    spacings: np.ndarray
    hist: np.ndarray
    edges: np.ndarray
    gap_ratio: float
    n_levels: int
    degenerate_fraction: float
    degenerate: bool


def _as_dense(H) -> np.ndarray:
    if isinstance(H, SymmetricHamiltonian):
        return H.dense()
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("need a square matrix")
    return H


def diagonalize(H, *, rtol: float = 1e-10, check: bool = True,
                cap: int = DEFAULT_DIMENSION_CAP) -> SpectralDecomposition:
    """Dense symmetric eigendecomposition (LAPACK ``syevd`` through numpy).

    Each eigenvector is signed so its largest-magnitude component is positive.
    With ``check`` the residual ``max ||H c - E c||`` is verified against
    ``rtol * ||H||_2``.
    """
    n = H.N if isinstance(H, SymmetricHamiltonian) else np.shape(H)[0]
    if n > cap:
        raise SizingError(f"dimension {n} exceeds cap {cap}")
    A = _as_dense(H)
    try:
        E, C = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigh failed for N={n}: |H|_F={np.linalg.norm(A):.3e}, "
            f"finite={np.isfinite(A).all()}: {exc}"
        ) from exc
    pivot = np.argmax(np.abs(C), axis=0)
    signs = np.sign(C[pivot, np.arange(n)])
    signs[signs == 0] = 1.0
    C = C * signs
    if check and n:
        scale = max(np.max(np.abs(E)), np.finfo(float).tiny)
        resid = np.linalg.norm(A @ C - C * E, axis=0).max()
        if not resid <= rtol * scale:
            raise NumericalError(
                f"eigen residual {resid:.3e} exceeds {rtol:.1e} * |H| = {rtol * scale:.3e} (N={n})"
            )
    return SpectralDecomposition(E, C)


def time_grid(t_max: float, steps: int) -> np.ndarray:
    """``steps`` equally spaced times on ``[0, t_max]``."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    return np.linspace(0.0, t_max, steps)


def _phases(E: np.ndarray, times: np.ndarray) -> np.ndarray:
    return np.exp(-1j * np.outer(times, E))


def evolve_packet(dec: SpectralDecomposition, k0: int, times) -> PacketTrajectory:
    """Probabilities ``w_m(t)`` for a packet started in basis state ``k0``."""
    if not 0 <= k0 < dec.N:
        raise IndexError(f"k0={k0} outside 0..{dec.N - 1}")
    times = np.asarray(times, dtype=np.float64)
    C = dec.states
    ck0 = C[k0]
    w = np.empty((times.size, dec.N))
    for lo in range(0, times.size, _TIME_CHUNK):
        t = times[lo:lo + _TIME_CHUNK]
        amp = (_phases(dec.energies, t) * ck0) @ C.T
        w[lo:lo + t.size] = amp.real**2 + amp.imag**2
    return PacketTrajectory(times=times, k0=k0, w=w, W0=w[:, k0].copy())


def return_probability(dec: SpectralDecomposition, k0: int, times) -> np.ndarray:
    """``W0(t) = |sum_alpha |C[k0, alpha]|^2 exp(-i E_alpha t)|^2``."""
    times = np.asarray(times, dtype=np.float64)
    amp = _phases(dec.energies, times) @ dec.weights(k0)
    return amp.real**2 + amp.imag**2


def overlap_fidelity(dec_u: SpectralDecomposition, dec_p: SpectralDecomposition,
                     psi0, times) -> np.ndarray:
    """``F(t) = |<psi_p(t)|psi_u(t)>|^2`` for a common initial state ``psi0``."""
    if dec_u.N != dec_p.N:
        raise ValueError(f"dimension mismatch: {dec_u.N} vs {dec_p.N}")
    psi0 = np.asarray(psi0)
    if psi0.shape != (dec_u.N,):
        raise ValueError("psi0 has the wrong shape")
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"psi0 is not normalized (|psi0| = {norm})")
    times = np.asarray(times, dtype=np.float64)
    cu = dec_u.states.T @ psi0
    cp = dec_p.states.T @ psi0
    overlap = dec_p.states.T @ dec_u.states
    out = np.empty(times.size)
    for lo in range(0, times.size, _TIME_CHUNK):
        t = times[lo:lo + _TIME_CHUNK]
        u = _phases(dec_u.energies, t) * cu
        p = _phases(dec_p.energies, t) * cp
        amp = np.einsum("tb,tb->t", p.conj(), u @ overlap.T)
        out[lo:lo + t.size] = amp.real**2 + amp.imag**2
    return out


def strength_function(dec: SpectralDecomposition, k0: int, bins: int = 50,
                      range: tuple[float, float] | None = None) -> StrengthFunctionProfile:
    """Histogram of ``|C[k0, alpha]|^2`` against ``E_alpha`` with unit area."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    E = dec.energies
    wts = dec.weights(k0)
    if dec.N / bins < 5:
        warnings.warn(f"only {dec.N / bins:.1f} levels per bin on average", stacklevel=2)
    lo, hi = (E.min(), E.max()) if range is None else range
    if hi <= lo:
        lo, hi = lo - 0.5, lo + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(E, bins=edges, weights=wts)
    heights = counts / np.diff(edges)
    centroid = float(np.dot(wts, E))
    variance = float(np.dot(wts, (E - centroid) ** 2))
    return StrengthFunctionProfile(edges, heights, centroid, variance, E.copy(), wts)


def level_spacing_statistics(energies, window_fraction: float = 0.05,
                             edge_fraction: float = 0.1, bins: int = 40,
                             degeneracy_tol: float = 1e-6,
                             min_levels: int = 100) -> SpacingStatistics:
    """Unfolded nearest-neighbour spacings and the mean adjacent-gap ratio.

    The outer ``edge_fraction`` of levels (half at each end) is discarded.
    Levels closer than ``degeneracy_tol`` times the mean spacing are merged
    before any statistic is taken; ``degenerate`` is set when more than 5% of
    the bulk spacings had to be merged.  Each spacing is divided by the mean
    of the spacings whose midpoints lie within a window of
    ``window_fraction`` of the bulk width.
    """
    E = np.sort(np.asarray(energies, dtype=np.float64))
    cut = int(round(0.5 * edge_fraction * E.size))
    bulk = E[cut:E.size - cut] if cut else E
    if bulk.size < min_levels:
        raise ValueError(f"need at least {min_levels} levels in the bulk, got {bulk.size}")
    raw = np.diff(bulk)
    mean_raw = raw.mean()
    tiny = raw <= degeneracy_tol * mean_raw
    degenerate_fraction = float(tiny.mean()) if raw.size else 0.0
    levels = np.concatenate([bulk[:1], bulk[1:][~tiny]])
    if levels.size < 3:
        raise ValueError("spectrum collapses to fewer than 3 distinct levels")
    gaps = np.diff(levels)
    mids = 0.5 * (levels[1:] + levels[:-1])
    half = 0.5 * window_fraction * (bulk[-1] - bulk[0])
    lo = np.searchsorted(mids, mids - half, side="left")
    hi = np.searchsorted(mids, mids + half, side="right")
    csum = np.concatenate([[0.0], np.cumsum(gaps)])
    local = (csum[hi] - csum[lo]) / (hi - lo)
    s = gaps / local
    r = np.minimum(gaps[1:], gaps[:-1]) / np.maximum(gaps[1:], gaps[:-1])
    hist, edges = np.histogram(s, bins=bins, range=(0.0, 4.0), density=True)
    return SpacingStatistics(
        spacings=s, hist=hist, edges=edges, gap_ratio=float(r.mean()),
        n_levels=int(levels.size), degenerate_fraction=degenerate_fraction,
        degenerate=degenerate_fraction > 0.05,
    )
