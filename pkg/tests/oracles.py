"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import math

import mpmath
import numpy as np

from mbdyn.spectral import StrengthFunctionProfile
from mbdyn.theory import SfFitParams, sf_density, sf_relations


def erf_maclaurin(x: float, dps: int = 80) -> float:
    """Error function from its Maclaurin series summed in extended precision."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        term = x
        total = x
        n = 0
        while True:
            n += 1
            term *= -x * x / n
            add = term / (2 * n + 1)
            total += add
            if abs(add) < mpmath.mpf(10) ** (-dps + 5) and n > x * x:
                break
        return float(2 / mpmath.sqrt(mpmath.pi) * total)


def erfcx_reference(x: float) -> float:
    with mpmath.workdps(50):
        return float(mpmath.exp(mpmath.mpf(x) ** 2) * mpmath.erfc(x))


def sampled_sf_profile(G, s, bins=80, n=400_000, seed=0, half_range=None):
    """Histogram of draws from the phenomenological SF via inverse-CDF sampling."""
    B, d2 = sf_relations(G, s)
    p = SfFitParams(B, G, s, d2)
    span = 12 * s
    x = np.linspace(-span, span, 400_001)
    dens = sf_density(x, p)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(x))])
    cdf /= cdf[-1]
    draws = np.interp(np.random.default_rng(seed).uniform(size=n), cdf, x)
    h = half_range if half_range is not None else 4 * math.sqrt(d2)
    edges = np.linspace(-h, h, bins + 1)
    counts, _ = np.histogram(draws, bins=edges)
    heights = counts / (n * np.diff(edges))
    return StrengthFunctionProfile(edges, heights, float(draws.mean()), float(draws.var()),
                                   draws, np.full(n, 1.0 / n))
