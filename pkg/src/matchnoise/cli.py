"""Scenario runner.

Every run reads an optional JSON config, runs one pipeline, and writes each
resulting data set as CSV or JSON plus a PNG rendering of the same data.
Files carry a hash of the resolved config and the versions of the package and
its numerical dependencies, and are byte-identical across reruns.

Usage::

    matchnoise closed-form --config run.json --out results
    matchnoise preset fig2 --format json
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .channels import NoiseModel, evolve_noise
from .closed_forms import (
    ObservableSeries, Tagged, ck_alt, nk_alt, nk_tfim_general, nk_tfim_xy, nk_xx,
    plateau_temperature, qp_rate_t0, teff, teff_xx_limits,
)
from .dynamics import (
    ParityResolvedState, evolve_master, evolve_pbc, finite_chain_occupations, ground_state_of,
    mode_occupations, normal_modes, quadratic_generator,
)
from .gaussian import (
    OBC, PBC, TFIM, XX, ModelParams, build_ground_state, dispersion, quasiparticle_occupation,
)
from .probe import probe_sweep, resonant_momentum

OUT_ENV = "MATCHNOISE_OUT"
PIPELINES = ("closed-form", "covariance", "pbc-parity", "oracle-compare", "probe")
PRESETS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9")

DEFAULTS = {
    "model": "tfim",
    "g": 1.0,
    "J": 1.0,
    "gamma": 1.0,
    "noise": "xy",
    "size": "thermo",
    "boundary": "obc",
    "times": [1.0],
    "momenta": {"start": 0.0, "stop": math.pi, "num": 64, "spacing": "linear"},
    "pipeline": "closed-form",
    "output": None,
    "format": "csv",
    "dt": 0.01,
    "window": 512,
    "sizes": [32, 64, 128, 256, 512, 1024, 2048, 4096],
    "fields": [0.5, 0.9, 1.0, 1.1, 1.5],
    "deltas": [0.25, 0.5, 1.0, 2.0, 3.0],
    "coupling": 0.01,
    "samples": 0,
    "hamiltonian": True,
    "seed": 0,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config

def _check_number(cfg, key, positive=False, nonneg=False):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key} must be a finite number")
    if positive and not v > 0:
        raise ConfigError(f"{key} must be positive")
    if nonneg and v < 0:
        raise ConfigError(f"{key} must be non-negative")


def _check_list(cfg, key, kind=float, nonneg=True, positive=False):
    v = cfg[key]
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{key} must be a non-empty list")
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise ConfigError(f"{key} entries must be finite numbers")
        if kind is int and int(x) != x:
            raise ConfigError(f"{key} entries must be integers")
        if nonneg and x < 0 or positive and not x > 0:
            raise ConfigError(f"{key} entries must be {'positive' if positive else 'non-negative'}")


def validate_config(raw: Optional[dict] = None) -> dict:
    """Merge ``raw`` into the defaults and check every field.

    Unknown keys are rejected.  Returns the resolved config.
    """
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = json.loads(json.dumps(DEFAULTS))
    cfg.update(json.loads(json.dumps(raw)))

    if cfg["model"] not in (TFIM, XX):
        raise ConfigError("model must be 'tfim' or 'xx'")
    for key in ("g", "J", "gamma", "coupling"):
        _check_number(cfg, key, positive=key in ("J", "gamma"), nonneg=True)
    _check_number(cfg, "dt", positive=True)
    noise = cfg["noise"]
    if isinstance(noise, dict):
        try:
            NoiseModel.from_dict(noise)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"custom noise table: {exc}") from None
    elif noise not in ("xy", "z", "ff"):
        raise ConfigError("noise must be 'xy', 'z', 'ff' or a custom table")
    size = cfg["size"]
    if size != "thermo" and (isinstance(size, bool) or not isinstance(size, int) or size < 2):
        raise ConfigError("size must be an integer >= 2 or 'thermo'")
    if cfg["boundary"] not in (OBC, PBC):
        raise ConfigError("boundary must be 'obc' or 'pbc'")
    if size == "thermo" and cfg["boundary"] == PBC:
        raise ConfigError("periodic boundaries need a finite size")
    _check_list(cfg, "times")
    mom = cfg["momenta"]
    if isinstance(mom, list):
        _check_list(cfg, "momenta", nonneg=False)
        if any(abs(x) > math.pi for x in mom):
            raise ConfigError("momenta must lie in [-pi, pi]")
    elif isinstance(mom, dict):
        extra = set(mom) - {"start", "stop", "num", "spacing"}
        if extra:
            raise ConfigError(f"unknown momenta keys: {', '.join(sorted(extra))}")
        m = dict(DEFAULTS["momenta"], **mom)
        for key in ("start", "stop"):
            if not isinstance(m[key], (int, float)) or abs(m[key]) > math.pi:
                raise ConfigError(f"momenta.{key} must lie in [-pi, pi]")
        if not isinstance(m["num"], int) or m["num"] < 2:
            raise ConfigError("momenta.num must be an integer >= 2")
        if m["spacing"] not in ("linear", "log"):
            raise ConfigError("momenta.spacing must be 'linear' or 'log'")
        if m["spacing"] == "log" and not 0 < m["start"] < m["stop"]:
            raise ConfigError("log spacing needs 0 < start < stop")
        if not m["start"] < m["stop"]:
            raise ConfigError("momenta.start must be below momenta.stop")
        cfg["momenta"] = m
    elif mom != "chain":
        raise ConfigError("momenta must be a grid object, a list or 'chain'")
    if cfg["pipeline"] not in PIPELINES:
        raise ConfigError(f"pipeline must be one of {', '.join(PIPELINES)}")
    if cfg["output"] is not None and not isinstance(cfg["output"], str):
        raise ConfigError("output must be a directory path")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("format must be 'csv' or 'json'")
    if not isinstance(cfg["window"], int) or isinstance(cfg["window"], bool) or cfg["window"] < 2:
        raise ConfigError("window must be an integer >= 2")
    _check_list(cfg, "sizes", kind=int, positive=True)
    _check_list(cfg, "fields")
    _check_list(cfg, "deltas", positive=True)
    for key in ("samples", "seed"):
        v = cfg[key]
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ConfigError(f"{key} must be a non-negative integer")
    if not isinstance(cfg["hamiltonian"], bool):
        raise ConfigError("hamiltonian must be true or false")
    return cfg


def _read_raw(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None


def load_config(path: Optional[str]) -> dict:
    return validate_config({} if path is None else _read_raw(path))


def config_hash(cfg: dict, command: str) -> str:
    blob = json.dumps({"command": command, "config": cfg}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def module_versions() -> Dict[str, str]:
    import matplotlib
    import scipy
    return {"matchnoise": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__}


# ---------------------------------------------------------------------------
# Helpers

def _params(cfg, size=None, boundary=None) -> ModelParams:
    size = cfg["size"] if size is None else size
    return ModelParams(cfg["model"], float(cfg["J"]), float(cfg["g"]),
                       None if size == "thermo" else int(size), boundary or cfg["boundary"])


def _momenta(cfg) -> np.ndarray:
    mom = cfg["momenta"]
    if mom == "chain":
        raise ConfigError("momenta 'chain' is only meaningful for finite-chain pipelines")
    if isinstance(mom, list):
        k = np.unique(np.asarray(mom, dtype=float))
    elif mom["spacing"] == "log":
        k = np.geomspace(mom["start"], mom["stop"], mom["num"])
    else:
        k = np.linspace(mom["start"], mom["stop"], mom["num"])
    return k


def _noise(cfg, n_sites: int) -> NoiseModel:
    noise = cfg["noise"]
    if isinstance(noise, dict):
        model = NoiseModel.from_dict(noise)
        return model if model.n_sites == n_sites else model.resized(n_sites)
    if noise == "xy":
        return NoiseModel.xy(n_sites, cfg["gamma"])
    if noise == "z":
        return NoiseModel.z_dephasing(n_sites, cfg["gamma"])
    raise ConfigError("fermion loss and gain is not a Pauli channel; use the closed-form pipeline")


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    """Ordered map over a thread pool."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def _fmt(x: float) -> str:
    return repr(float(x))


def _label(prefix: str, value) -> str:
    return f"{prefix}={_fmt(value)}"


def _teff_series(eps, n):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.asarray(teff(eps, np.clip(n, 0.0, 1.0)), dtype=float)


def _interp_onto(x_grid, x, y):
    """Linear interpolation; points outside ``[x.min(), x.max()]`` become NaN."""
    out = np.interp(x_grid, x, y)
    out[(x_grid < x.min()) | (x_grid > x.max())] = np.nan
    return out


Dataset = Tuple[str, ObservableSeries]


# ---------------------------------------------------------------------------
# Pipelines

def run_ground_state(cfg, threads=1) -> List[Dataset]:
    """Majorana correlator ``M_{2m, 2n+1}`` against separation ``m - n``."""
    p = _params(cfg)
    W = cfg["window"] if p.thermodynamic else p.size
    M = build_ground_state(p, window=W if p.thermodynamic else None).matrix
    B = M[0::2, 1::2]
    D = min(W - 1, 64)
    d = np.arange(-D, D + 1)
    avg = np.array([np.mean(np.diagonal(B, offset=-int(x))) for x in d])
    series = {"M_even_odd": avg}
    units = {"M_even_odd": "1"}
    if p.kind == TFIM and p.critical:
        series["critical_closed_form"] = 2 / (np.pi * (1 - 2 * d))
        units["critical_closed_form"] = "1"
    meta = {"model": p.kind, "size": cfg["size"], "boundary": p.boundary, "window": W}
    if not p.thermodynamic:
        sector = "open" if p.boundary == OBC else "periodic_even"
        meta["energy_per_site"] = _fmt(quadratic_generator(p, sector).hamiltonian_energy(M) / W)
    return [("ground-state", ObservableSeries("separation", d, series, units, meta))]


def _closed_nk(cfg, k, gt):
    p = _params(cfg, size="thermo")
    if p.kind == XX:
        if cfg["noise"] != "xy":
            raise ConfigError("XX closed forms exist for spin-flip noise only")
        return nk_xx(k, gt)
    noise = cfg["noise"]
    if isinstance(noise, dict):
        raise ConfigError("custom noise tables have no closed form; use the covariance pipeline")
    if noise == "xy":
        return nk_tfim_xy(k, gt) if p.critical else nk_tfim_general(k, gt, p.g, p.J)
    return nk_alt(noise, k, gt, p.g, p.J)


def run_closed_form(cfg, threads=1) -> List[Dataset]:
    """Closed-form occupations and temperatures against momentum."""
    p = _params(cfg, size="thermo")
    k = _momenta(cfg)
    eps = np.asarray(dispersion(k, p), dtype=float)
    gts = [cfg["gamma"] * t for t in cfg["times"]]
    nks = _pmap(lambda gt: np.asarray(_closed_nk(cfg, k, gt), dtype=float), gts, threads)
    series, units = {"eps": eps}, {"eps": "J"}
    for gt, n in zip(gts, nks):
        series[_label("n_k@gt", gt)] = n
        series[_label("T_eff@gt", gt)] = _teff_series(eps, n)
        units[_label("n_k@gt", gt)] = "1"
        units[_label("T_eff@gt", gt)] = "J"
    meta = {"model": p.kind, "noise": cfg["noise"], "g": p.g, "J": p.J}
    return [("closed-form", ObservableSeries("momentum", k, series, units, meta))]


def _window_occupations(cfg, gt):
    p = _params(cfg)
    W = cfg["window"]
    M = build_ground_state(p, window=W)
    M = evolve_noise(M, _noise(cfg, W), gt / cfg["gamma"])
    return M


def run_evolve(cfg, threads=1) -> List[Dataset]:
    """Covariance or parity-resolved evolution from the ground state."""
    p = _params(cfg)
    gts = [cfg["gamma"] * t for t in cfg["times"]]
    series, units = {}, {}
    if p.thermodynamic:
        if cfg["pipeline"] == "pbc-parity":
            raise ConfigError("the pbc-parity pipeline needs a finite periodic chain")
        k = _momenta(cfg)
        Ms = _pmap(lambda gt: _window_occupations(cfg, gt), gts, threads)
        eps = np.asarray(dispersion(k, p), dtype=float)
        series["eps"], units["eps"] = eps, "J"
        for gt, M in zip(gts, Ms):
            n = np.asarray(quasiparticle_occupation(M, k, p), dtype=float)
            series[_label("n_k@gt", gt)] = n
            series[_label("T_eff@gt", gt)] = _teff_series(eps, n)
            units[_label("n_k@gt", gt)], units[_label("T_eff@gt", gt)] = "1", "J"
        meta = {"model": p.kind, "noise": cfg["noise"], "window": cfg["window"], "hamiltonian": False}
        return [("evolve", ObservableSeries("momentum", k, series, units, meta))]

    if p.boundary == PBC or cfg["pipeline"] == "pbc-parity":
        if p.boundary != PBC or p.kind != TFIM or cfg["noise"] != "xy":
            raise ConfigError("the pbc-parity pipeline runs the periodic Ising chain with xy noise")
        runs = _pmap(lambda gt: finite_chain_occupations(p, gt, cfg["gamma"], cfg["dt"]), gts, threads)
    else:
        gen = quadratic_generator(p, "open")
        modes = normal_modes(gen)
        gs = ground_state_of(gen, modes)
        noise = _noise(cfg, p.size)

        def one(gt):
            t = gt / cfg["gamma"]
            if cfg["hamiltonian"]:
                M = evolve_master(gs, gen, noise, t, cfg["dt"])
            else:
                M = evolve_noise(gs, noise, t)
            return mode_occupations(M, modes=modes)
        runs = _pmap(one, gts, threads)
    eps = runs[0][0]
    for gt, (_, n) in zip(gts, runs):
        series[_label("n@gt", gt)] = n
        series[_label("T_eff@gt", gt)] = _teff_series(eps, n)
        units[_label("n@gt", gt)], units[_label("T_eff@gt", gt)] = "1", "J"
    meta = {"model": p.kind, "noise": cfg["noise"], "size": p.size, "boundary": p.boundary,
            "dt": cfg["dt"], "hamiltonian": bool(cfg["hamiltonian"] or p.boundary == PBC)}
    return [("evolve", ObservableSeries("energy", eps, series, units, meta))]


def run_compare(cfg, threads=1, seed=0) -> List[Dataset]:
    """Covariance pipeline against the dense Lindblad oracle on a small chain."""
    from .oracles import (MAX_SITES, DenseState, LindbladSegment, TrajectoryEnsemble,
                          dense_channel_oracle, sample_sign_trajectories, spin_hamiltonian)
    p = _params(cfg)
    if p.thermodynamic or p.size > MAX_SITES:
        raise ConfigError(f"the oracle comparison needs a finite chain of at most {MAX_SITES} sites")
    N = p.size
    gts = [cfg["gamma"] * t for t in cfg["times"]]
    noise = _noise(cfg, N)
    use_h = bool(cfg["hamiltonian"])
    H = spin_hamiltonian(p.kind, N, p.J, p.g, periodic=p.boundary == PBC)
    dense0 = DenseState.ground_state(H)
    M0 = dense0.covariance()

    if p.boundary == PBC:
        if p.kind != TFIM:
            raise ConfigError("periodic comparisons run the Ising chain")
        k = 2 * np.pi * (np.arange(N) + 0.5) / N
        k = np.sort(np.where(k > np.pi, k - 2 * np.pi, k))
        k = k[k > 0]
        abscissa = np.asarray(dispersion(k, p), dtype=float)
        order = np.argsort(abscissa, kind="stable")
        k, abscissa = k[order], abscissa[order]

        def observe(M):
            return np.asarray(quasiparticle_occupation(M, k, p, mode="chain"), dtype=float)

        def covariance_run(gt):
            state = ParityResolvedState.ground_state(p)
            if not use_h:
                return evolve_noise(state.total(), noise, gt / cfg["gamma"]).matrix
            return evolve_pbc(state, p, noise, gt / cfg["gamma"], cfg["dt"]).total().matrix
    else:
        gen = quadratic_generator(p, "open")
        modes = normal_modes(gen)
        abscissa = modes[0]

        def observe(M):
            return mode_occupations(M, modes=modes)[1]

        def covariance_run(gt):
            if not use_h:
                return evolve_noise(M0, noise, gt / cfg["gamma"]).matrix
            return evolve_master(M0, gen, noise, gt / cfg["gamma"], cfg["dt"]).matrix

    def dense_run(gt):
        seg = LindbladSegment.from_noise(H if use_h else None, noise, gt / cfg["gamma"])
        return dense_channel_oracle(dense0, [seg]).covariance()

    dense = _pmap(dense_run, gts, threads)
    cov = _pmap(covariance_run, gts, threads)
    series, units = {}, {}
    for gt, Md, Mc in zip(gts, dense, cov):
        nd, nc = observe(Md), observe(Mc)
        series[_label("n_dense@gt", gt)] = nd
        series[_label("n_covariance@gt", gt)] = nc
        series[_label("abs_diff@gt", gt)] = np.abs(nd - nc)
        if cfg["samples"] > 0 and not use_h and cfg["noise"] == "xy":
            ens = TrajectoryEnsemble.from_time(M0, gt, cfg["samples"], seed)
            series[_label("n_trajectory@gt", gt)] = observe(sample_sign_trajectories(ens, threads).mean)
    for key in series:
        units[key] = "1"
    meta = {"model": p.kind, "size": N, "boundary": p.boundary, "noise": cfg["noise"],
            "hamiltonian": use_h, "dt": cfg["dt"], "samples": cfg["samples"], "seed": seed,
            "max_abs_diff": _fmt(max(float(np.max(v)) for key, v in series.items()
                                     if key.startswith("abs_diff")))}
    return [("compare", ObservableSeries("energy", abscissa, series, units, meta))]


def run_probe(cfg, threads=1) -> List[Dataset]:
    """Golden-rule probe readout against splitting."""
    p = _params(cfg, size="thermo")
    deltas = np.unique(np.asarray(cfg["deltas"], dtype=float))
    gts = [cfg["gamma"] * t for t in cfg["times"]]
    ks = np.array([resonant_momentum(d, p) for d in deltas])

    def one(gt):
        nk = np.asarray(nk_tfim_xy(ks, gt) if p.critical else nk_tfim_general(ks, gt, p.g, p.J), dtype=float)
        table = dict(zip(ks, nk))
        return nk, probe_sweep(deltas, gt, cfg["coupling"], p, occupation=lambda k: float(table[k]))
    runs = _pmap(one, gts, threads)
    series, units = {}, {}
    for gt, (nk, (n_p, T_p)) in zip(gts, runs):
        series[_label("n_probe@gt", gt)] = n_p
        series[_label("T_probe@gt", gt)] = T_p
        series[_label("T_eff@gt", gt)] = _teff_series(deltas, nk)
        units[_label("n_probe@gt", gt)] = "1"
        units[_label("T_probe@gt", gt)] = units[_label("T_eff@gt", gt)] = "J"
    meta = {"coupling": cfg["coupling"], "g": p.g, "J": p.J}
    return [("probe", ObservableSeries("energy", deltas, series, units, meta))]


# ---------------------------------------------------------------------------
# Presets

PRESET_DEFAULTS = {
    "fig2": {"times": [0.001, 0.01, 0.1, 1.0]},
    "fig3": {"fields": [0.5, 0.9, 0.99, 1.0, 1.01, 1.1, 1.5]},
    "fig4": {"fields": [0.5, 0.8, 0.9, 1.0, 1.1, 1.25, 1.5], "times": [1.0]},
    "fig5": {"sizes": [32, 64, 128, 256, 512, 1024, 2048, 4096], "times": [0.25, 0.5, 1.0]},
    "fig6": {"times": [0.001, 0.01, 0.1, 1.0]},
    "fig7": {"times": [0.1, 0.41242, 1.0]},
    "fig8": {"model": "xx", "times": [0.001, 0.01, 0.1, 1.0]},
    "fig9": {"sizes": [32, 64, 128, 256, 512, 1024, 2048, 4096], "times": [1.0]},
}


def _energy_grid(lo, hi, num=200):
    return np.geomspace(lo, hi, num)


def preset_fig2(cfg, threads=1) -> List[Dataset]:
    """Critical Ising T_eff against energy under spin-flip noise."""
    J = cfg["J"]
    eps = _energy_grid(1e-3 * J, 4 * J * (1 - 1e-12))
    k = 2 * np.arcsin(eps / (4 * J))
    gts = [cfg["gamma"] * t for t in cfg["times"]]
    Ts = _pmap(lambda gt: _teff_series(eps, np.asarray(nk_tfim_xy(k, gt), dtype=float)), gts, threads)
    series = {_label("T_eff@gt", gt): T for gt, T in zip(gts, Ts)}
    units = {key: "J" for key in series}
    meta = {"plateau": ";".join(f"{_fmt(gt)}:{_fmt(plateau_temperature(gt, J))}" for gt in gts)}
    return [("fig2", ObservableSeries("energy", eps, series, units, meta))]


def preset_fig3(cfg, threads=1) -> List[Dataset]:
    """Initial production rate against momentum for several fields."""
    J, gamma = cfg["J"], cfg["gamma"]
    k = np.linspace(np.pi / 200, np.pi, 200)
    rates = _pmap(lambda g: np.asarray(qp_rate_t0(k, g, J, gamma), dtype=float), cfg["fields"], threads)
    series, units = {}, {}
    for g, r in zip(cfg["fields"], rates):
        p = ModelParams(TFIM, J, g)
        series[_label("eps@g", g)] = np.asarray(dispersion(k, p), dtype=float)
        series[_label("rate@g", g)] = r
        units[_label("eps@g", g)], units[_label("rate@g", g)] = "J", "gamma"
    return [("fig3", ObservableSeries("momentum", k, series, units, {"t": 0}))]


def _k_of_energy(eps, g, J):
    c = (J * J + g * g - eps * eps / 4) / (2 * g * J)
    out = np.full(eps.shape, np.nan)
    ok = np.abs(c) <= 1
    out[ok] = np.arccos(c[ok])
    return out


def preset_fig4(cfg, threads=1) -> List[Dataset]:
    """T_eff against energy above the gap for several fields at fixed time."""
    J = cfg["J"]
    gt = cfg["gamma"] * cfg["times"][0]
    x = _energy_grid(1e-3 * J, 2 * J, 120)

    def one(g):
        gap = 2 * abs(g - J)
        k = _k_of_energy(gap + x, g, J)
        ok = np.isfinite(k)
        n = np.full(x.shape, np.nan)
        if g == J:
            n[ok] = nk_tfim_xy(k[ok], gt)
        else:
            n[ok] = nk_tfim_general(k[ok], gt, g, J)
        T = np.full(x.shape, np.nan)
        T[ok] = _teff_series(gap + x[ok], n[ok])
        return n, T
    runs = _pmap(one, cfg["fields"], threads)
    series, units = {}, {}
    for g, (n, T) in zip(cfg["fields"], runs):
        series[_label("T_eff@g", g)], units[_label("T_eff@g", g)] = T, "J"
        series[_label("n@g", g)], units[_label("n@g", g)] = n, "1"
    return [("fig4", ObservableSeries("energy", x, series, units, {"gt": gt, "abscissa": "eps - gap"}))]


def _finite_teff(N, boundary, gt, cfg):
    p = ModelParams(TFIM, cfg["J"], cfg["J"], N, boundary)
    n_modes = None if boundary == PBC else min(N, 256)
    eps, n = finite_chain_occupations(p, gt, cfg["gamma"], cfg["dt"], n_modes)
    return eps, _teff_series(eps, n)


def preset_fig5(cfg, threads=1) -> List[Dataset]:
    """Periodic chain with Hamiltonian and noise, against the noise-only curve."""
    J = cfg["J"]
    sizes = sorted(cfg["sizes"])
    gts = [cfg["gamma"] * t for t in cfg["times"]]
    eps = _energy_grid(np.pi * J / max(sizes), 4 * J * (1 - 1e-12), 160)
    jobs = [(N, gt) for gt in gts for N in sizes]
    runs = _pmap(lambda job: _finite_teff(job[0], PBC, job[1], cfg), jobs, threads)
    series = {}
    for (N, gt), (e, T) in zip(jobs, runs):
        series[f"T_eff@N={N};gt={_fmt(gt)}"] = _interp_onto(eps, e, T)
    k = 2 * np.arcsin(eps / (4 * J))
    for gt in gts:
        series[_label("T_noise_only@gt", gt)] = _teff_series(eps, np.asarray(nk_tfim_xy(k, gt), dtype=float))
    units = {key: "J" for key in series}
    return [("fig5", ObservableSeries("energy", eps, series, units, {"boundary": PBC, "dt": cfg["dt"]}))]


def preset_fig6(cfg, threads=1) -> List[Dataset]:
    """T_eff under spin-flip and dephasing noise."""
    J = cfg["J"]
    eps = _energy_grid(1e-3 * J, 4 * J * (1 - 1e-12))
    k = 2 * np.arcsin(eps / (4 * J))
    gts = [cfg["gamma"] * t for t in cfg["times"]]
    jobs = [(kind, gt) for kind in ("xy", "z") for gt in gts]
    runs = _pmap(lambda job: _teff_series(eps, np.asarray(nk_alt(job[0], k, job[1]), dtype=float)),
                 jobs, threads)
    series = {f"T_eff_{kind}@gt={_fmt(gt)}": T for (kind, gt), T in zip(jobs, runs)}
    units = {key: "J" for key in series}
    return [("fig6", ObservableSeries("energy", eps, series, units, {}))]


def preset_fig7(cfg, threads=1) -> List[Dataset]:
    """Coherences against time (small k) and against momentum."""
    kinds = ("xy", "z", "ff")
    gt_axis = np.geomspace(1e-3, 10, 200)
    k0 = 1e-6
    by_time = {f"ImC_{kind}@k=0+": np.asarray(ck_alt(kind, k0, gt_axis)).imag for kind in kinds}
    k = np.linspace(np.pi / 200, np.pi, 200)
    by_k = {}
    for gt in [cfg["gamma"] * t for t in cfg["times"]]:
        for kind in kinds:
            by_k[f"ImC_{kind}@gt={_fmt(gt)}"] = np.asarray(ck_alt(kind, k, gt)).imag
    return [
        ("fig7_time", ObservableSeries("time", gt_axis, by_time, {key: "1" for key in by_time},
                                       {"abscissa": "gamma t"})),
        ("fig7_momentum", ObservableSeries("momentum", k, by_k, {key: "1" for key in by_k}, {})),
    ]


def preset_fig8(cfg, threads=1) -> List[Dataset]:
    """XX chain T_eff with its long- and short-time forms."""
    J = cfg["J"]
    eps = _energy_grid(1e-3 * J, 2 * J * (1 - 1e-12))
    k = np.arccos(-eps / (2 * J))
    gts = [cfg["gamma"] * t for t in cfg["times"]]
    series = {}
    for gt in gts:
        series[_label("T_eff@gt", gt)] = _teff_series(eps, np.asarray(nk_xx(k, gt), dtype=float))
        series[_label("T_long@gt", gt)] = np.asarray(teff_xx_limits(k, gt, "long", J), dtype=float)
        series[_label("T_short@gt", gt)] = np.asarray(teff_xx_limits(k, gt, "short", J), dtype=float)
        series[_label("n@gt", gt)] = np.asarray(nk_xx(k, gt), dtype=float)
    units = {key: ("1" if key.startswith("n@") else "J") for key in series}
    return [("fig8", ObservableSeries("energy", eps, series, units, {"model": XX}))]


def preset_fig9(cfg, threads=1) -> List[Dataset]:
    """Open and periodic T_eff with energies rescaled by ``N^alpha``."""
    sizes = sorted(cfg["sizes"])
    gt = cfg["gamma"] * cfg["times"][0]
    out = []
    for boundary, alpha in ((PBC, 1.0), (OBC, 0.5)):
        runs = _pmap(lambda N: _finite_teff(N, boundary, gt, cfg), sizes, threads)
        lo = max(e[0] * N ** alpha for N, (e, _) in zip(sizes, runs))
        hi = min(e[-1] * N ** alpha for N, (e, _) in zip(sizes, runs))
        x = _energy_grid(min(lo, hi / 2), hi, 160)
        series = {f"T_eff@N={N}": _interp_onto(x, e * N ** alpha, T) for N, (e, T) in zip(sizes, runs)}
        meta = {"alpha": alpha, "gt": gt, "boundary": boundary, "dt": cfg["dt"]}
        out.append((f"fig9_{boundary}", ObservableSeries("scaled_energy", x, series,
                                                          {key: "J" for key in series}, meta)))
    return out


PRESET_RUNNERS = {name: globals()[f"preset_{name}"] for name in PRESETS}


# ---------------------------------------------------------------------------
# Output

def _cell(x) -> object:
    """Finite numbers as floats; everything else as a tag."""
    if isinstance(x, Tagged):
        return {"tag": x.tag}
    x = float(x)
    if math.isnan(x):
        return {"tag": "undefined"}
    if math.isinf(x):
        return {"tag": "divergent" if x > 0 else "negative-divergent"}
    return x


def _csv_cell(x) -> str:
    c = _cell(x)
    return f"tag:{c['tag']}" if isinstance(c, dict) else _fmt(c)


def _metadata(name, command, cfg_hash, data: ObservableSeries) -> dict:
    meta = {"dataset": name, "command": command, "config_hash": cfg_hash, "axis": data.axis}
    meta.update({f"version.{k}": v for k, v in module_versions().items()})
    for k, v in data.metadata.items():
        meta[k] = v
    return meta


def write_dataset(out_dir: str, name: str, data: ObservableSeries, fmt: str, meta: dict) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, name)
    names = list(data.series)
    if fmt == "csv":
        lines = [f"# {k}={v}" for k, v in meta.items()]
        lines.append("# units=" + ";".join(f"{k}:{data.units.get(k, '')}" for k in names))
        lines.append(",".join([data.axis] + names))
        cols = [data.series[k] for k in names]
        for i, a in enumerate(data.abscissa):
            lines.append(",".join([_fmt(a)] + [_csv_cell(c[i]) for c in cols]))
        path = base + ".csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        doc = {"metadata": meta, "axis": data.axis,
               "units": {"abscissa": _axis_unit(data.axis), **{k: data.units.get(k, "") for k in names}},
               "abscissa": [float(a) for a in data.abscissa],
               "series": {k: [_cell(v) for v in data.series[k]] for k in names}}
        path = base + ".json"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=1, allow_nan=False)
            fh.write("\n")
    return [path, render_png(base + ".png", name, data)]


def _axis_unit(axis: str) -> str:
    return {"momentum": "rad/site", "time": "1/gamma", "field": "J", "energy": "J", "size": "sites",
            "separation": "sites", "scaled_energy": "J sites^alpha"}[axis]


def render_png(path: str, title: str, data: ObservableSeries) -> str:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    x = data.abscissa
    for key, y in data.series.items():
        y = np.asarray(y, dtype=float)
        if np.any(np.isfinite(y)):
            ax.plot(x, np.where(np.isfinite(y), y, np.nan), label=key, lw=1.2)
    if x[0] > 0 and x[-1] / x[0] > 100:
        ax.set_xscale("log")
    ax.set_xlabel(f"{data.axis} [{_axis_unit(data.axis)}]")
    ax.set_title(title)
    if len(data.series) <= 12:
        ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# Entry point

COMMANDS = {
    "ground-state": run_ground_state,
    "evolve": run_evolve,
    "closed-form": run_closed_form,
    "probe": run_probe,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON scenario file")
    common.add_argument("--out", help="output directory (overrides $%s and the config)" % OUT_ENV)
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--seed", type=int, help="RNG seed for stochastic pipelines")
    parser = argparse.ArgumentParser(prog="matchnoise", description="Noisy matchgate chain scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("ground-state", "evolve", "closed-form", "compare", "probe"):
        sub.add_parser(name, parents=[common], help=f"run the {name} pipeline")
    pre = sub.add_parser("preset", parents=[common], help="regenerate a figure's data")
    pre.add_argument("name", choices=PRESETS)
    return parser


def _out_dir(args, cfg) -> str:
    return args.out or os.environ.get(OUT_ENV) or cfg["output"] or "."


def run(argv: Optional[Sequence[str]] = None) -> List[str]:
    """Parse ``argv``, run, and return the written paths.  Raises on errors."""
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed must be non-negative")
    raw = _read_raw(args.config) if args.config else {}
    if args.command == "preset":
        cfg = validate_config({**PRESET_DEFAULTS[args.name], **raw})
        command = f"preset {args.name}"
    else:
        cfg = validate_config(raw)
        command = args.command
    if args.format:
        cfg["format"] = args.format
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.command == "compare":
        cfg["pipeline"] = "oracle-compare"
    elif args.command == "probe":
        cfg["pipeline"] = "probe"
    elif args.command == "closed-form":
        cfg["pipeline"] = "closed-form"
    elif args.command == "evolve" and cfg["pipeline"] not in ("covariance", "pbc-parity"):
        cfg["pipeline"] = "pbc-parity" if cfg["boundary"] == PBC else "covariance"
    out_dir = _out_dir(args, cfg)
    # the output location does not change the data, so it stays out of the hash
    hashed = {k: v for k, v in cfg.items() if k != "output"}
    cfg_hash = config_hash(hashed, command)

    if args.command == "preset":
        datasets = PRESET_RUNNERS[args.name](cfg, args.threads)
    elif args.command == "compare":
        datasets = run_compare(cfg, args.threads, cfg["seed"])
    else:
        datasets = COMMANDS[args.command](cfg, args.threads)
    paths = []
    for name, data in datasets:
        meta = _metadata(name, command, cfg_hash, data)
        paths += write_dataset(out_dir, name, data, cfg["format"], meta)
    return paths


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        paths = run(argv)
    except ConfigError as exc:
        print(f"matchnoise: invalid config: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"matchnoise: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
