"""Scalar diagnostics of packet trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EntropyTrace",
    "FirstMinimumReport",
    "shannon_entropy",
    "entropy_trace",
    "participation_number",
    "first_minimum",
    "spectrum_center_state",
    "moving_average",
]


@dataclass
class EntropyTrace:
    times: np.ndarray
    S: np.ndarray
    S_max: float

    @property
    def normalized(self) -> np.ndarray:
        return self.S / self.S_max if self.S_max > 0 else np.zeros_like(self.S)


@dataclass
class FirstMinimumReport:
    t_min: float
    S_min: float
    ratio: float
    found: bool
    index: int = -1


def _check_probabilities(w, atol):
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < -atol):
        raise ValueError("probabilities must be non-negative")
    total = w.sum(axis=-1)
    if np.any(np.abs(total - 1.0) > atol):
        raise ValueError(f"probabilities sum to {np.atleast_1d(total)[0]!r}, not 1")
    return np.clip(w, 0.0, None)


def shannon_entropy(w, atol: float = 1e-8):
    """``-sum w ln w`` in nats, with ``0 ln 0 = 0``.  Works row-wise on 2-D input."""
    w = _check_probabilities(w, atol)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, w * np.log(w), 0.0)
    S = -terms.sum(axis=-1)
    return float(S) if np.ndim(S) == 0 else S


def entropy_trace(traj, S_max: float | None = None) -> EntropyTrace:
    """Entropy of every time slice of a :class:`PacketTrajectory`.

    ``S_max`` defaults to ``ln N``.
    """
    S = shannon_entropy(traj.w, atol=1e-8)
    if S_max is None:
        S_max = float(np.log(traj.w.shape[1]))
    return EntropyTrace(np.asarray(traj.times), np.asarray(S), S_max)


def participation_number(w, atol: float = 1e-8) -> tuple[float, float]:
    """``(exp(S), 1 / sum w**2)``."""
    w = _check_probabilities(w, atol)
    return float(np.exp(shannon_entropy(w, atol))), float(1.0 / np.sum(w**2))


def moving_average(x, window: int) -> np.ndarray:
    """Centered moving average; the window shrinks symmetrically at the ends."""
    x = np.asarray(x, dtype=np.float64)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    h = window // 2
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(x.size)
    half = np.minimum(np.minimum(idx, x.size - 1 - idx), h)
    return (c[idx + half + 1] - c[idx - half]) / (2 * half + 1)


def first_minimum(trace: EntropyTrace, window: int = 5) -> FirstMinimumReport:
    """First strict local minimum after the first strict local maximum.

    Extrema are located on the smoothed trace; the reported entropy is the
    raw value at that sample.
    """
    S = np.asarray(trace.S, dtype=np.float64)
    if S.size < 3:
        raise ValueError("need at least 3 samples")
    y = moving_average(S, window)
    inner = np.arange(1, y.size - 1)
    is_max = (y[inner] > y[inner - 1]) & (y[inner] > y[inner + 1])
    is_min = (y[inner] < y[inner - 1]) & (y[inner] < y[inner + 1])
    maxima = inner[is_max]
    if maxima.size:
        minima = inner[is_min & (inner > maxima[0])]
        if minima.size:
            i = int(minima[0])
            s_min = float(S[i])
            ratio = s_min / trace.S_max if trace.S_max > 0 else float("nan")
            return FirstMinimumReport(float(trace.times[i]), s_min, ratio, True, i)
    return FirstMinimumReport(float("nan"), float("nan"), float("nan"), False)


def spectrum_center_state(diagonal) -> int:
    """Index whose unperturbed energy is closest to the median (lowest index on ties)."""
    d = np.asarray(diagonal, dtype=np.float64)
    dist = np.abs(d - np.median(d))
    return int(np.flatnonzero(dist == dist.min())[0])
