"""Ensemble runs, presets and CSV persistence.

Realization ``r`` of a run with master seed ``s`` draws its Hamiltonian
disorder from stream ``(s, r, 0)`` and its fidelity perturbation from
stream ``(s, r, 1)``.  Every series of a sweep reuses the same streams, so
sweeps over ``sigma_p`` or ``epsilon`` compare common random numbers.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .basis import enumerate_fermion_basis, spin_basis
from .errors import ConfigError, FitError, MbdynError
from .hamiltonian import (
    SpinChainParams,
    TbriParams,
    add_perturbation,
    build_spin_chain,
    build_tbri,
    delta_e_squared_direct,
    delta_e_squared_tbri,
    spin_chain_delta_e_squared,
)
from .observables import EntropyTrace, entropy_trace, first_minimum, spectrum_center_state
from .rng import make_rng
from .spectral import (
    diagonalize,
    evolve_packet,
    level_spacing_statistics,
    overlap_fidelity,
    return_probability,
    strength_function,
    time_grid,
)
from .theory import DecayRegime, fit_strength_function, gamma_golden_rule, w0_predicted

__all__ = [
    "OUTPUTS",
    "PRESETS",
    "ExperimentConfig",
    "EnsembleResult",
    "run_experiment",
    "preset",
    "write_csv",
    "read_csv",
    "parse_config_text",
    "load_config",
]

OUTPUTS = ("entropy", "fidelity", "w0", "sf", "spacing", "theory-overlay")
MODELS = ("spin-chain", "tbri")
AXES = ("t", "eps_t")

_SF_HALF_RANGE = 4.0  # SF table spans +-4 model widths around E_k0
_SPACING_BINS = 40


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce an ensemble run.

    ``t_max=None`` means ``t_max_factor`` divided by the model's
    characteristic width (disorder-free for the spin chain).  With
    ``axis="eps_t"`` the grid is in units of ``epsilon * t`` on
    ``[0, x_max]`` and each epsilon is evaluated at ``t = x / epsilon``.
    """

    model: str = "spin-chain"
    params: SpinChainParams | TbriParams = field(default_factory=SpinChainParams)
    sweep: dict = field(default_factory=dict)
    k0: str | int = "spectrum-center"
    t_max: float | None = None
    t_max_factor: float = 20.0
    steps: int = 400
    realizations: int = 20
    seed: int = 0
    outputs: tuple[str, ...] = ("entropy", "w0")
    epsilons: tuple[float, ...] = ()
    axis: str = "t"
    x_max: float = 6.0
    sf_bins: int = 50
    name: str = "custom"

    def validate(self) -> "ExperimentConfig":
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {MODELS}")
        want = TbriParams if self.model == "tbri" else SpinChainParams
        if not isinstance(self.params, want):
            raise ConfigError(f"model {self.model!r} needs {want.__name__}")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.steps < 2:
            raise ConfigError("steps must be >= 2")
        if self.t_max is not None and not self.t_max > 0:
            raise ConfigError("t_max must be positive")
        bad = [o for o in self.outputs if o not in OUTPUTS]
        if bad:
            raise ConfigError(f"unknown outputs {bad}; choose from {OUTPUTS}")
        if "fidelity" in self.outputs and not self.epsilons:
            raise ConfigError("fidelity output needs a non-empty epsilon list")
        if any(not e > 0 for e in self.epsilons):
            raise ConfigError("epsilons must be positive")
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}")
        if self.axis == "eps_t":
            timed = {"entropy", "w0", "theory-overlay"} & set(self.outputs)
            if timed:
                raise ConfigError(f"eps_t axis supports fidelity only, not {sorted(timed)}")
        if not (self.k0 == "spectrum-center" or isinstance(self.k0, int)):
            raise ConfigError("k0 must be 'spectrum-center' or a basis index")
        names = {f.name for f in fields(self.params)}
        for key, values in self.sweep.items():
            if key not in names or key == "seed":
                raise ConfigError(f"cannot sweep {key!r} for model {self.model!r}")
            if len(values) == 0:
                raise ConfigError(f"sweep over {key!r} is empty")
        for combo in self.combos():
            try:
                replace(self.params, **combo)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid sweep point {combo}: {exc}") from exc
        return self

    def combos(self) -> list[dict]:
        keys = list(self.sweep)
        return [dict(zip(keys, vals)) for vals in itertools.product(*(self.sweep[k] for k in keys))]

    def characteristic_width(self) -> float:
        p = self.params
        if self.model == "tbri":
            return math.sqrt(delta_e_squared_tbri(p.V0, p.Np, p.M))
        return math.sqrt(spin_chain_delta_e_squared(p.L, p.Omega0, 0.0))

    def grid(self) -> np.ndarray:
        if self.axis == "eps_t":
            return time_grid(self.x_max, self.steps)
        t_max = self.t_max
        if t_max is None:
            width = self.characteristic_width()
            if not width > 0:
                raise ConfigError("cannot derive t_max from a zero width; set t_max")
            t_max = self.t_max_factor / width
        return time_grid(t_max, self.steps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = {k: v for k, v in asdict(self.params).items() if k != "seed"}
        d["sweep"] = {k: list(v) for k, v in self.sweep.items()}
        d["outputs"] = list(self.outputs)
        d["epsilons"] = list(self.epsilons)
        return d


@dataclass
class EnsembleResult:
    """Mean traces and standard errors over realizations.

    ``traces`` and ``stderr`` share keys and column order.  ``scalars`` maps
    ``(label, quantity)`` to ``(mean, stderr)``; ``tables`` holds auxiliary
    column sets such as averaged strength functions.
    """

    config: ExperimentConfig
    axis_name: str
    axis: np.ndarray
    traces: dict[str, np.ndarray] = field(default_factory=dict)
    stderr: dict[str, np.ndarray] = field(default_factory=dict)
    scalars: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)
    tables: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def columns(self) -> dict[str, np.ndarray]:
        """Ordered CSV columns: axis, then each trace followed by its ``_stderr``."""
        cols = {self.axis_name: self.axis}
        for key, v in self.traces.items():
            cols[key] = v
            cols[key + "_stderr"] = self.stderr[key]
        return cols

    def scalar(self, label: str, quantity: str) -> float:
        return self.scalars[(label, quantity)][0]


def series_label(combo: dict) -> str:
    return ";".join(f"{k}={_fmt_value(v)}" for k, v in combo.items())


def column_name(quantity: str, label: str) -> str:
    return f"{quantity}[{label}]" if label else quantity


def _fmt_value(v) -> str:
    return f"{v:g}" if isinstance(v, (int, float)) else str(v)


# --- per-realization work ---------------------------------------------------

def _build(config: ExperimentConfig, params, r: int):
    """Return ``(H, V, unperturbed diagonal, basis size)`` for realization ``r``."""
    rng = make_rng(config.seed, r, 0)
    if config.model == "tbri":
        basis = enumerate_fermion_basis(params.M, params.Np)
        H = build_tbri(basis, params, rng=rng)
        return H, H.offdiagonal_part(), H.diagonal, basis.N
    basis = spin_basis(params.L)
    H0, V = build_spin_chain(basis, params, rng=rng)
    return H0 + V, V, H0.diagonal, basis.N


def _pick_k0(config: ExperimentConfig, unperturbed: np.ndarray) -> int:
    if config.k0 == "spectrum-center":
        return spectrum_center_state(unperturbed)
    if not 0 <= config.k0 < unperturbed.size:
        raise ConfigError(f"k0={config.k0} outside 0..{unperturbed.size - 1}")
    return int(config.k0)


def _safe_gamma0(H, k0, unperturbed) -> float:
    try:
        return gamma_golden_rule(H, k0, unperturbed=unperturbed)
    except ValueError:
        return float("nan")


def _realization(config: ExperimentConfig, combo: dict, r: int, grid: np.ndarray):
    params = replace(config.params, **combo)
    H, V, unperturbed, N = _build(config, params, r)
    k0 = _pick_k0(config, unperturbed)
    out: dict[str, np.ndarray] = {}
    scal: dict[str, float] = {}
    tables: dict[str, np.ndarray] = {}
    dec = diagonalize(H)
    deltaE2 = delta_e_squared_direct(H, k0)
    scal["deltaE2"] = deltaE2
    n_f = H.row(k0)[0].size
    outputs = set(config.outputs)

    if config.axis == "t" and {"entropy", "w0", "theory-overlay"} & outputs:
        if "entropy" in outputs:
            traj = evolve_packet(dec, k0, grid)
            tr = entropy_trace(traj)
            W0 = traj.W0
            out["S"] = tr.S
            out["S_norm"] = tr.normalized
            tail = tr.normalized[3 * grid.size // 4:]
            scal["S_plateau"] = float(tail.mean())
        else:
            W0 = return_probability(dec, k0, grid)
        if "w0" in outputs:
            out["W0"] = W0
        if "theory-overlay" in outputs:
            gamma0 = _safe_gamma0(H, k0, unperturbed)
            scal["Gamma0"] = gamma0
            out["W0_gaussian"] = w0_predicted(DecayRegime.GAUSSIAN, grid, deltaE2)
            if math.isfinite(gamma0) and deltaE2 > 0:
                out["W0_lorentzian"] = w0_predicted(DecayRegime.LORENTZIAN_EXPONENTIAL,
                                                    grid, deltaE2, gamma0)
            else:
                out["W0_lorentzian"] = np.full(grid.size, np.nan)
            if "entropy" in outputs and n_f > 1:
                ln_nf = math.log(n_f)
                out["S_linear"] = math.sqrt(deltaE2) * grid * ln_nf
                out["S_w0"] = -np.log(np.clip(W0, np.finfo(float).tiny, None)) * ln_nf

    if "fidelity" in outputs:
        psi0 = np.zeros(N)
        psi0[k0] = 1.0
        for eps in config.epsilons:
            Sigma = add_perturbation(V, eps, (config.seed, r, 1))
            dec_p = diagonalize(H + Sigma)
            times = grid / eps if config.axis == "eps_t" else grid
            out[f"F@eps={_fmt_value(eps)}"] = overlap_fidelity(dec, dec_p, psi0, times)

    if "sf" in outputs:
        half = _SF_HALF_RANGE * _model_width(config, params)
        centre = H.diagonal[k0]
        prof = strength_function(dec, k0, bins=config.sf_bins, range=(centre - half, centre + half))
        tables["sf"] = prof.heights
        try:
            fit = fit_strength_function(strength_function(dec, k0, bins=config.sf_bins))
            scal["sf_Gamma"], scal["sf_sigma"], scal["sf_B"] = fit.Gamma, fit.sigma, fit.B
        except FitError:
            scal["sf_Gamma"] = scal["sf_sigma"] = scal["sf_B"] = float("nan")

    if "spacing" in outputs:
        st = level_spacing_statistics(dec.energies, bins=_SPACING_BINS)
        scal["gap_ratio"] = st.gap_ratio
        scal["degenerate_fraction"] = st.degenerate_fraction
        tables["spacing"] = st.hist
    return out, scal, tables


def _model_width(config: ExperimentConfig, params) -> float:
    if config.model == "tbri":
        return math.sqrt(delta_e_squared_tbri(params.V0, params.Np, params.M)) or 1.0
    return math.sqrt(spin_chain_delta_e_squared(params.L, params.Omega0, params.sigma_p)) or 1.0


def _run_one(config, combo, r, grid):
    try:
        return _realization(config, combo, r, grid)
    except MbdynError as exc:
        raise type(exc)(f"realization {r} [{series_label(combo)}]: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"realization {r} [{series_label(combo)}]: {exc}") from exc


def _mean_stderr(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = stack.mean(axis=0)
    if stack.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, stack.std(axis=0, ddof=1) / math.sqrt(stack.shape[0])


def run_experiment(config: ExperimentConfig, threads: int = 1) -> EnsembleResult:
    """Run every sweep point over ``config.realizations`` realizations.

    Work is spread over ``threads`` workers; the reduction always proceeds
    in realization order, so the result does not depend on ``threads``.
    """
    config.validate()
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    grid = config.grid()
    combos = config.combos() or [{}]
    R = config.realizations
    tasks = [(c, r) for c in combos for r in range(R)]
    if threads == 1:
        results = [_run_one(config, c, r, grid) for c, r in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda cr: _run_one(config, cr[0], cr[1], grid), tasks))

    res = EnsembleResult(config=config, axis_name=config.axis, axis=grid)
    for ci, combo in enumerate(combos):
        label = series_label(combo)
        chunk = results[ci * R:(ci + 1) * R]
        for key in chunk[0][0]:
            quantity, _, eps = key.partition("@")
            name = column_name(quantity, ";".join(x for x in (label, eps) if x))
            mean, err = _mean_stderr(np.stack([c[0][key] for c in chunk]))
            res.traces[name], res.stderr[name] = mean, err
        for key in chunk[0][1]:
            vals = np.array([c[1][key] for c in chunk])
            m, e = _mean_stderr(vals[:, None])
            res.scalars[(label, key)] = (float(m[0]), float(e[0]))
        if "S" in chunk[0][0]:
            S = res.traces[column_name("S", label)]
            S_max = math.log(_dimension(config, replace(config.params, **combo)))
            fm = first_minimum(EntropyTrace(grid, S, S_max))
            res.scalars[(label, "S_min_ratio")] = (fm.ratio, float("nan"))
            res.scalars[(label, "t_min")] = (fm.t_min, float("nan"))
        for tname in chunk[0][2]:
            mean, err = _mean_stderr(np.stack([c[2][tname] for c in chunk]))
            tab = res.tables.setdefault(tname, {})
            if not tab:
                tab["x"] = _table_axis(config, tname)
            tab[column_name("mean", label)] = mean
            tab[column_name("mean", label) + "_stderr"] = err
    res.meta = {
        "config": config.to_dict(),
        "seed": config.seed,
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "series": [series_label(c) for c in combos],
        "scalars": [
            {"series": lab, "quantity": q, "mean": m, "stderr": e}
            for (lab, q), (m, e) in res.scalars.items()
        ],
    }
    return res


def _dimension(config: ExperimentConfig, params) -> int:
    if config.model == "tbri":
        return math.comb(params.M, params.Np)
    return 1 << params.L


def _table_axis(config: ExperimentConfig, name: str) -> np.ndarray:
    if name == "sf":
        # energy offset from E_k0 in units of the model width
        edges = np.linspace(-_SF_HALF_RANGE, _SF_HALF_RANGE, config.sf_bins + 1)
    else:
        edges = np.linspace(0.0, 4.0, _SPACING_BINS + 1)
    return 0.5 * (edges[1:] + edges[:-1])


# --- presets ----------------------------------------------------------------

def _fig1():
    return ExperimentConfig(
        name="fig1", params=SpinChainParams(L=8, a=1.0, Omega0=100.0),
        sweep={"J": (0.0, 10.0, 100.0), "sigma_p": (5.0, 10.0, 20.0)},
        outputs=("entropy",), t_max_factor=20.0, steps=400,
    )


def _fig2():
    return ExperimentConfig(
        name="fig2", params=SpinChainParams(L=8, a=1.0, Omega0=100.0),
        sweep={"J": (0.0, 5.0, 10.0, 15.0, 20.0, 30.0, 50.0, 70.0, 100.0),
               "sigma_p": (5.0, 20.0)},
        outputs=("entropy",), t_max_factor=20.0, steps=400,
    )


def _fig3():
    return ExperimentConfig(
        name="fig3", params=SpinChainParams(L=8, a=1.0, Omega0=100.0, J=100.0),
        sweep={"sigma_p": (0.0, 15.0, 50.0)},
        outputs=("entropy", "w0", "theory-overlay"), t_max=0.05, steps=400,
    )


def _fig4():
    return ExperimentConfig(
        name="fig4", params=SpinChainParams(L=8, a=1.0, Omega0=100.0),
        sweep={"J": (0.0, 100.0), "sigma_p": (0.0, 15.0, 50.0)},
        outputs=("fidelity",), epsilons=(5.0, 10.0, 20.0), t_max=1.0, steps=400,
    )


def _fig5():
    return ExperimentConfig(
        name="fig5", params=SpinChainParams(L=8, a=1.0, Omega0=100.0, sigma_p=0.0),
        sweep={"J": (0.0, 100.0)},
        outputs=("fidelity",), epsilons=(3.0, 5.0, 7.0), axis="eps_t", x_max=6.0, steps=301,
    )


def _tbri_sf():
    return ExperimentConfig(
        name="tbri-sf", model="tbri", params=TbriParams(M=12, Np=6, d0=1.0, V0=0.35),
        sweep={"V0": (0.05, 0.35)}, outputs=("sf",), realizations=20,
        t_max=1.0, steps=2,
    )


def _tbri_fidelity():
    return ExperimentConfig(
        name="tbri-fidelity", model="tbri", params=TbriParams(M=12, Np=6, d0=1.0, V0=0.05),
        sweep={"V0": (0.05, 0.35)}, outputs=("w0", "theory-overlay"),
        t_max=15.0, steps=3001,
    )


PRESETS = {
    "fig1": _fig1,
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "tbri-sf": _tbri_sf,
    "tbri-fidelity": _tbri_fidelity,
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# --- CSV --------------------------------------------------------------------

def _render(v: float) -> str:
    return "%.15g" % v


def _write_table(path: Path, cols: dict[str, np.ndarray], with_rows: bool = True) -> None:
    names = list(cols)
    try:
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            if with_rows:
                for row in zip(*(cols[n] for n in names)):
                    w.writerow([_render(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_csv(result: EnsembleResult, path) -> Path:
    """Write traces to ``path`` and metadata to ``<path>.meta.json``.

    Auxiliary tables go to ``<stem>.<table>.csv`` next to it.  Values are
    rendered with 15 significant digits.  A run without trace outputs
    produces a header-only file.
    """
    path = Path(path)
    _write_table(path, result.columns(), with_rows=bool(result.traces))
    for name, cols in result.tables.items():
        _write_table(path.with_name(f"{path.stem}.{name}.csv"), cols)
    meta_path = path.with_name(path.name + ".meta.json")
    try:
        meta_path.write_text(json.dumps(result.meta, indent=2, sort_keys=True) + "\n",
                             encoding="ascii")
    except OSError as exc:
        raise OSError(f"cannot write {meta_path}: {exc}") from exc
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Parse a file written by :func:`write_csv` back into named columns."""
    path = Path(path)
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in row] for row in body]) if body else np.empty((0, len(header)))
    return {name: data[:, i].copy() for i, name in enumerate(header)}


# --- config files -----------------------------------------------------------

_TOP_KEYS = {"model", "k0", "t_max", "t_max_factor", "steps", "realizations", "seed",
             "outputs", "epsilons", "axis", "x_max", "sf_bins", "name"}
_LIST_KEYS = {"outputs", "epsilons"}


def _scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("none", "null", ""):
        return None
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines with ``#`` comments and section headers.

    Returns ``{"top": {...}, "model": {...}, "sweep": {...}}``.  Commas make
    lists; sweep values are always lists.
    """
    out: dict[str, dict] = {"top": {}, "model": {}, "sweep": {}}
    section = "top"
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("model", "sweep"):
                raise ConfigError(f"line {n}: unknown section [{section}]")
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw!r}")
        key = key.strip().replace("-", "_")
        if section == "sweep" or "," in value or key in _LIST_KEYS:
            parsed = tuple(_scalar(v) for v in value.split(",") if v.strip())
        else:
            parsed = _scalar(value)
        out[section][key] = parsed
    return out


def config_from_mapping(parsed: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Merge a parsed mapping (see :func:`parse_config_text`) into ``base``."""
    top = dict(parsed.get("top", {}))
    unknown = set(top) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    model = top.get("model", base.model if base else "spin-chain")
    if base is not None and model == base.model:
        params = base.params
    else:
        params = TbriParams(M=12, Np=6) if model == "tbri" else SpinChainParams()
    mp = parsed.get("model", {})
    if mp:
        names = {f.name for f in fields(params)}
        bad = set(mp) - names
        if bad:
            raise ConfigError(f"unknown model parameters {sorted(bad)} for {model!r}")
        try:
            params = replace(params, **mp)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model parameters: {exc}") from exc
    cfg = replace(base) if base is not None else ExperimentConfig()
    cfg.model, cfg.params = model, params
    if parsed.get("sweep"):
        cfg.sweep = {k: tuple(v) for k, v in parsed["sweep"].items()}
    for key, value in top.items():
        if key == "model":
            continue
        if key in ("outputs", "epsilons"):
            value = tuple(value) if isinstance(value, tuple) else (value,)
            if key == "epsilons":
                value = tuple(float(v) for v in value)
        setattr(cfg, key, value)
    if isinstance(cfg.k0, float) and cfg.k0.is_integer():
        cfg.k0 = int(cfg.k0)
    for key in ("steps", "realizations", "seed", "sf_bins"):
        if not isinstance(getattr(cfg, key), int):
            raise ConfigError(f"{key} must be an integer")
    return cfg.validate()


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_mapping(parse_config_text(text), base)
