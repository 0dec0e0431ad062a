"""Closed-form predictions: strength-function phenomenology, return-probability
decay laws, Fock-space cascade entropy and perturbative fidelity."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import FitError
from .hamiltonian import SymmetricHamiltonian

__all__ = [
    "erf",
    "erfc",
    "erfcx",
    "SfFitParams",
    "DecayRegime",
    "sf_relations",
    "sf_density",
    "solve_sigma",
    "fit_strength_function",
    "gamma_golden_rule",
    "w0_predicted",
    "cascade_wn",
    "poisson_entropy",
    "entropy_predicted",
    "entropy_phenomenological",
    "PerturbativeTerms",
    "perturbative_terms",
    "perturbative_fidelity",
    "regime_label",
]

_SQRT_PI = math.sqrt(math.pi)
_SERIES_LIMIT = 2.5
_EPS = 2.0**-53


# --- error function -------------------------------------------------------

def _erf_series(x: float) -> float:
    # erf(x) = 2/sqrt(pi) exp(-x^2) sum_n (2x^2)^n x / (2n+1)!!  (all terms positive)
    x2 = x * x
    term = x
    total = x
    n = 0
    while True:
        n += 1
        term *= 2.0 * x2 / (2 * n + 1)
        total += term
        if term <= total * _EPS:
            break
    return 2.0 / _SQRT_PI * math.exp(-x2) * total


def _erfcx_cf(x: float) -> float:
    """exp(x^2) erfc(x) for x > 0 by continued fraction (modified Lentz).

    erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    """
    tiny = 1e-300
    f = x
    C = x
    D = 0.0
    k = 1
    while k < 10_000:
        a = 0.5 * k
        D = x + a * D
        D = tiny if D == 0.0 else D
        C = x + a / C
        C = tiny if C == 0.0 else C
        D = 1.0 / D
        delta = C * D
        f *= delta
        if abs(delta - 1.0) < _EPS:
            break
        k += 1
    return 1.0 / (f * _SQRT_PI)


def _erf_scalar(z: float) -> float:
    if math.isnan(z):
        return math.nan
    x = abs(z)
    if x == 0.0:
        return 0.0 * z
    if x < _SERIES_LIMIT:
        v = _erf_series(x)
    elif x > 6.5:
        v = 1.0
    else:
        v = 1.0 - math.exp(-x * x) * _erfcx_cf(x)
    return v if z > 0 else -v


def _erfcx_scalar(z: float) -> float:
    if z < 0:
        if z * z > 709.0:
            return math.inf
        return 2.0 * math.exp(z * z) - _erfcx_scalar(-z)
    if z < _SERIES_LIMIT:
        return math.exp(z * z) * (1.0 - _erf_series(z)) if z > 0 else 1.0
    return _erfcx_cf(z)


def _vectorize(fn):
    def wrapped(z):
        if np.ndim(z) == 0:
            return fn(float(z))
        arr = np.asarray(z, dtype=np.float64)
        return np.vectorize(fn, otypes=[np.float64])(arr)
    wrapped.__name__ = fn.__name__.strip("_").replace("_scalar", "")
    return wrapped


erf = _vectorize(_erf_scalar)
erf.__doc__ = "Error function, absolute error below 1e-12 on the real line."

erfcx = _vectorize(_erfcx_scalar)
erfcx.__doc__ = "Scaled complementary error function ``exp(z**2) * erfc(z)``."


def erfc(z):
    """Complementary error function without cancellation for large positive ``z``."""
    z = np.asarray(z, dtype=np.float64)
    out = np.exp(-z * z) * erfcx(np.abs(z))
    out = np.where(z < 0, 2.0 - out, out)
    return float(out) if out.ndim == 0 else out


# --- strength function phenomenology --------------------------------------

@dataclass
class SfFitParams:
    """Parameters of ``P(E) = B exp(-(E-E0)^2/2 sigma^2) / ((E-E0)^2 + Gamma^2/4)``."""

    B: float
    Gamma: float
    sigma: float
    deltaE2: float
    E0: float = 0.0
    residual: float = float("nan")


class DecayRegime(enum.Enum):
    PERTURBATIVE_QUADRATIC = "perturbative-quadratic"
    LORENTZIAN_EXPONENTIAL = "lorentzian-exponential"
    GAUSSIAN = "gaussian"
    LONG_TIME_EXPONENTIAL = "long-time-exponential"


def sf_relations(Gamma: float, sigma: float) -> tuple[float, float]:
    """Normalization ``B`` and second moment of the phenomenological SF.

    Uses ``exp(z^2) (1 - erf(z)) = erfcx(z)`` with ``z = Gamma / (sigma sqrt 8)``,
    so large ``Gamma / sigma`` does not overflow.
    """
    if not (Gamma > 0 and sigma > 0):
        raise ValueError("Gamma and sigma must be positive")
    z = Gamma / (sigma * math.sqrt(8.0))
    ex = _erfcx_scalar(z)
    B = Gamma / (2.0 * math.pi * ex)
    deltaE2 = B * (sigma * math.sqrt(2.0 * math.pi) - 0.5 * math.pi * Gamma * ex)
    return B, deltaE2


def sf_density(E, params: SfFitParams):
    x = np.asarray(E, dtype=np.float64) - params.E0
    return params.B * np.exp(-x * x / (2.0 * params.sigma**2)) / (x * x + 0.25 * params.Gamma**2)


def solve_sigma(Gamma: float, deltaE2: float, bracket: tuple[float, float] | None = None,
                rtol: float = 1e-10) -> float:
    """Bisection for the ``sigma`` that gives second moment ``deltaE2`` at fixed ``Gamma``."""
    width = math.sqrt(deltaE2)
    lo, hi = bracket if bracket is not None else (width / 10.0, 10.0 * width)

    def g(s):
        return sf_relations(Gamma, s)[1] - deltaE2

    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if np.sign(glo) == np.sign(ghi):
        raise FitError(
            f"no sigma root in [{lo:.4g}, {hi:.4g}] for Gamma={Gamma:.4g}, "
            f"deltaE2={deltaE2:.4g} (residuals {glo:.3g}, {ghi:.3g})"
        )
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _bin_average(edges, params):
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (b - a) * _GL_NODES + 0.5 * (b + a)
    return 0.5 * np.sum(sf_density(x, params) * _GL_WEIGHTS, axis=1)


def _params_for(Gamma, deltaE2, E0):
    sigma = solve_sigma(Gamma, deltaE2)
    B, d2 = sf_relations(Gamma, sigma)
    return SfFitParams(B, Gamma, sigma, d2, E0)


def fit_strength_function(profile, n_scan: int = 48, gamma_max_factor: float = 50.0
                          ) -> SfFitParams:
    """One-parameter least-squares fit of the phenomenological SF to a histogram.

    ``E0`` and the second moment are fixed to the profile's exact moments;
    for every trial ``Gamma`` the normalization and ``sigma`` follow from the
    sum rules, and the uniform-weight squared error against the bin heights
    is minimized over ``log Gamma`` (coarse scan, then bounded refinement).
    """
    D2 = float(profile.variance)
    if not D2 > 0:
        raise FitError("profile has zero variance")
    E0 = float(profile.centroid)
    width = math.sqrt(D2)
    edges = np.asarray(profile.edges)
    heights = np.asarray(profile.heights)
    sigma_hi = 10.0 * width

    # smallest Gamma whose sigma root still lies inside the bracket
    def h(lg):
        return sf_relations(math.exp(lg), sigma_hi)[1] - D2

    lg_lo, lg_hi = math.log(width * 1e-6), math.log(width * gamma_max_factor)
    if h(lg_hi) < 0:
        raise FitError("no admissible Gamma for this second moment")
    if h(lg_lo) < 0:
        a, b = lg_lo, lg_hi
        for _ in range(200):
            m = 0.5 * (a + b)
            if h(m) < 0:
                a = m
            else:
                b = m
        lg_lo = b + 1e-9

    def sse(lg):
        try:
            p = _params_for(math.exp(lg), D2, E0)
        except FitError:
            return math.inf
        return float(np.sum((_bin_average(edges, p) - heights) ** 2))

    grid = np.linspace(lg_lo, lg_hi, n_scan)
    costs = np.array([sse(g) for g in grid])
    i = int(np.argmin(costs))
    if not np.isfinite(costs[i]):
        raise FitError("strength-function fit failed on the whole Gamma scan")
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n_scan - 1)]
    best_lg, best_cost = grid[i], costs[i]
    if b > a:
        res = minimize_scalar(sse, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-6})
        if res.fun < best_cost:
            best_lg, best_cost = float(res.x), float(res.fun)
    p = _params_for(math.exp(best_lg), D2, E0)
    p.residual = best_cost
    return p


def gamma_golden_rule(H: SymmetricHamiltonian, k0: int, unperturbed=None,
                      estimator: str = "span", window: float | None = None) -> float:
    """Golden-rule width ``2 pi <V_{k0 f}^2> rho_f`` over the directly coupled states.

    ``estimator="span"`` uses ``rho_f = (N_f - 1) / span`` of the unperturbed
    energies of the coupled states.  ``estimator="local"`` counts only states
    within ``window`` (centered on ``E_k0``), which resolves the energy
    dependence of ``rho_f`` when the coupled band is not flat.
    """
    diag = H.diagonal if unperturbed is None else np.asarray(unperturbed, dtype=np.float64)
    idx, vals = H.row(k0)
    if idx.size == 0 or not np.any(vals):
        return 0.0
    if idx.size < 2:
        raise ValueError("need at least two directly coupled states")
    ef = diag[idx]
    if estimator == "span":
        span = float(ef.max() - ef.min())
        if span <= 0:
            raise ValueError("directly coupled states have zero energy span")
        return 2.0 * math.pi * float(np.mean(vals**2)) * (idx.size - 1) / span
    if estimator == "local":
        if window is None or not window > 0:
            raise ValueError("local estimator needs a positive window")
        inside = np.abs(ef - diag[k0]) <= 0.5 * window
        return 2.0 * math.pi * float(np.sum(vals[inside] ** 2)) / window
    raise ValueError(f"unknown estimator {estimator!r}")


def regime_label(ratio: float) -> str:
    """Label for ``Gamma0 / Delta_E`` (or ``Gamma / sigma``); for output only."""
    if ratio < 0.3:
        return "lorentzian-like"
    if ratio > 3.0:
        return "gaussian-like"
    return "intermediate"


def w0_predicted(regime: DecayRegime | str, t, deltaE2: float, Gamma: float | None = None):
    """Predicted return probability in one of the four decay regimes.

    ``Gamma`` is the golden-rule width for the Lorentzian law and the effective
    width for the long-time law; the caller decides which one applies.
    """
    regime = DecayRegime(regime)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    if regime is DecayRegime.PERTURBATIVE_QUADRATIC:
        out = np.clip(1.0 - deltaE2 * t * t, 0.0, None)
    elif regime is DecayRegime.GAUSSIAN:
        out = np.exp(-deltaE2 * t * t)
    else:
        if Gamma is None:
            raise ValueError(f"{regime.value} needs Gamma")
        if regime is DecayRegime.LORENTZIAN_EXPONENTIAL:
            out = np.exp(Gamma**2 / (math.pi * deltaE2) - Gamma * t)
        else:
            out = (math.pi**2 * Gamma**2 / (8.0 * deltaE2)
                   * np.exp(0.25 * Gamma**2 / deltaE2 - Gamma * t))
    return float(out) if out.ndim == 0 else out


# --- cascade and entropy ----------------------------------------------------

def cascade_wn(Gamma: float, t, n: int, use_exact_w0: bool = False, W0=None):
    """Occupation of the n-th Fock-space shell, ``x^n e^{-x} / n!``.

    ``x = Gamma t``, or ``x = -ln W0`` when ``use_exact_w0`` is set.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if use_exact_w0:
        if W0 is None:
            raise ValueError("W0 is required when use_exact_w0 is set")
        x = -np.log(np.asarray(W0, dtype=np.float64))
    else:
        x = Gamma * np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logp = np.where(x > 0, n * np.log(np.where(x > 0, x, 1.0)), 0.0 if n == 0 else -np.inf)
    out = np.exp(logp - x - math.lgamma(n + 1))
    return float(out) if out.ndim == 0 else out


def _poisson_terms(x: float, cutoff: float = 1e-16):
    """Yield ``(n, p_n, ln(x^n/n!))`` until the probabilities drop below ``cutoff``."""
    if x == 0.0:
        yield 0, 1.0, 0.0
        return
    lx = math.log(x)
    n = 0
    while True:
        log_ratio = n * lx - math.lgamma(n + 1)
        p = math.exp(log_ratio - x)
        yield n, p, log_ratio
        if n > x and p < cutoff:
            return
        n += 1


def poisson_entropy(x: float) -> float:
    """Shannon entropy of a Poisson distribution with mean ``x``."""
    return -sum(p * (lr - x) for _, p, lr in _poisson_terms(float(x)) if p > 0)


def _cascade_entropy(x: float, N_f: float) -> float:
    tail = sum(p * lr for _, p, lr in _poisson_terms(x))
    return x * math.log(N_f) + x - tail


def entropy_predicted(Gamma: float, t, N_f: float, variant: str = "linear",
                      deltaE2: float | None = None):
    """Entropy growth laws for the Fock-space cascade.

    ``variant``: ``"cascade"`` (full Poisson sum), ``"linear"`` (``Gamma t ln N_f``)
    or ``"small-time"`` (``deltaE2 t^2``).
    """
    if N_f < 1:
        raise ValueError("N_f must be >= 1")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    if variant == "linear":
        out = Gamma * t * math.log(N_f)
    elif variant == "small-time":
        if deltaE2 is None:
            raise ValueError("small-time variant needs deltaE2")
        out = deltaE2 * t * t
    elif variant == "cascade":
        out = np.vectorize(lambda x: _cascade_entropy(x, N_f), otypes=[np.float64])(Gamma * t)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return float(out) if np.ndim(out) == 0 else out


def entropy_phenomenological(W0, Npc_m: float):
    """Two-component entropy estimate from the return probability alone."""
    if Npc_m < 1:
        raise ValueError("Npc_m must be >= 1")
    W0 = np.asarray(W0, dtype=np.float64)
    if np.any((W0 <= 0) | (W0 > 1)):
        raise ValueError("W0 must lie in (0, 1]")
    rest = 1.0 - W0
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(W0 < 1, -W0 * np.log(W0), 0.0)
        b = np.where(rest > 0, -rest * np.log(rest / Npc_m), 0.0)
    out = a + b
    return float(out) if out.ndim == 0 else out


# --- perturbative fidelity --------------------------------------------------

@dataclass
class PerturbativeTerms:
    deltaE2: float
    commutator: float
    n_eps: int
    eps2_n_eps: float | None = None


def perturbative_terms(H: SymmetricHamiltonian, Sigma: SymmetricHamiltonian, k0: int,
                       epsilon: float | None = None) -> PerturbativeTerms:
    """``delta_E^2`` from row ``k0`` of ``Sigma`` and ``Re <k0|H Sigma - Sigma H|k0>``."""
    if H.N != Sigma.N:
        raise ValueError("dimension mismatch")
    e = np.zeros(H.N)
    e[k0] = 1.0
    # identically zero for real symmetric H and Sigma
    comm = H.matvec(e) @ Sigma.matvec(e) - Sigma.matvec(e) @ H.matvec(e)
    idx, vals = Sigma.row(k0)
    n_eps = int(np.count_nonzero(vals))
    d2 = float(np.sum(vals**2))
    eps_term = None if epsilon is None else epsilon**2 * n_eps
    return PerturbativeTerms(d2, float(comm), n_eps, eps_term)


def perturbative_fidelity(H: SymmetricHamiltonian, Sigma: SymmetricHamiltonian, k0: int, t):
    """``F(t) = 1 - delta_E^2 t^2 - Re<R> t^2`` with ``R = H Sigma - Sigma H``."""
    terms = perturbative_terms(H, Sigma, k0)
    t = np.asarray(t, dtype=np.float64)
    out = 1.0 - (terms.deltaE2 + terms.commutator) * t * t
    return float(out) if out.ndim == 0 else out
