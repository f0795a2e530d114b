"""Probe-qubit thermometry of a noisy Ising chain.

A two-level probe with splitting ``Delta`` is weakly coupled to the end of the
chain, ``lambda (sigma_P^+ sigma_1^- + h.c.)``.  To lowest order it absorbs and
emits quasiparticles at energy ``Delta`` with golden-rule rates

    G_up   = lambda^2 rho(Delta) cos^2(theta_k/2) n_k
    G_down = lambda^2 rho(Delta) cos^2(theta_k/2) (1 - n_k)

where ``rho = 1/|d eps/dk|`` is the density of states (``1/2J`` at the band
bottom of the critical chain).  The steady probe occupation is ``n_k`` and
its Fermi-Dirac temperature is the chain's effective temperature at ``Delta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .closed_forms import nk_tfim_xy, teff
from .gaussian import TFIM, ModelParams, bogoliubov_angle

__all__ = [
    "ProbeConfig",
    "resonant_momentum",
    "density_of_states",
    "fgr_rates",
    "probe_relaxation",
    "probe_temperature",
    "probe_sweep",
    "dense_probe_oracle",
]

EDGE_GUARD = 1e-3


@dataclass(frozen=True)
class ProbeConfig:
    """Probe splitting ``delta``, coupling ``coupling`` and the chain it reads."""

    delta: float
    coupling: float
    params: ModelParams = ModelParams()

    def __post_init__(self):
        if self.params.kind != TFIM:
            raise ValueError("probe thermometry is defined for the Ising chain")
        if not self.delta > 0:
            raise ValueError("probe splitting must be positive")
        lo, hi = band_edges(self.params)
        if not lo <= self.delta <= hi:
            raise ValueError(f"splitting {self.delta} outside the band [{lo}, {hi}]")
        if abs(self.coupling) / self.params.J >= 0.1:
            warnings.warn("coupling is not small compared with J; golden-rule rates are unreliable",
                          RuntimeWarning)


def band_edges(params: ModelParams) -> Tuple[float, float]:
    return 2 * abs(params.g - params.J), 2 * (params.g + params.J)


def resonant_momentum(delta: float, params: ModelParams) -> float:
    """``k`` in ``[0, pi]`` with ``eps(k) = delta``."""
    J, g = params.J, params.g
    c = (J * J + g * g - delta * delta / 4) / (2 * g * J)
    if c > 1 + 1e-12 or c < -1 - 1e-12:
        raise ValueError(f"no mode at energy {delta}")
    return math.acos(min(1.0, max(-1.0, c)))


def density_of_states(delta: float, params: ModelParams) -> float:
    """``1/|d eps/dk|`` at the resonant momentum, ``eps/(4 g J |sin k|)``.

    Within ``EDGE_GUARD`` of a band edge the momentum is clamped away from the
    van Hove singularity and a warning is issued.
    """
    lo, hi = band_edges(params)
    width = hi - lo
    d = delta
    if d - lo < EDGE_GUARD * width or hi - d < EDGE_GUARD * width:
        warnings.warn("splitting close to a band edge; density of states clamped", RuntimeWarning)
        d = min(max(d, lo + EDGE_GUARD * width), hi - EDGE_GUARD * width)
    k = resonant_momentum(d, params)
    return d / (4 * params.g * params.J * abs(math.sin(k)))


def fgr_rates(cfg: ProbeConfig, n_k: float) -> Tuple[float, float]:
    """Golden-rule excitation and relaxation rates of the probe."""
    if not 0 <= n_k <= 1:
        raise ValueError("occupation must lie in [0, 1]")
    k = resonant_momentum(cfg.delta, cfg.params)
    th = bogoliubov_angle(k, cfg.params.g, cfg.params.J, side=1)
    pref = cfg.coupling ** 2 * density_of_states(cfg.delta, cfg.params) * math.cos(th / 2) ** 2
    return pref * n_k, pref * (1 - n_k)


def probe_relaxation(rates: Tuple[float, float], t):
    """``n_P(t) = G_up/(G_up + G_down) (1 - exp(-(G_up + G_down) t))`` from an empty probe."""
    up, down = rates
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    total = up + down
    out = up / total * -np.expm1(-total * t) if total > 0 else np.zeros_like(t)
    return out[()] if np.ndim(out) == 0 else out


def probe_temperature(delta, n_p):
    """Temperature read from the steady probe occupation."""
    return teff(delta, n_p)


def probe_sweep(deltas, gt: float, coupling: float = 0.01, params: ModelParams = ModelParams(),
                occupation: Optional[Callable[[float], float]] = None):
    """Probe readout over a list of splittings.

    ``occupation(k)`` defaults to the closed-form critical occupation at ``gt``.
    Returns ``(n_P, T)`` arrays.
    """
    occupation = occupation or (lambda k: float(nk_tfim_xy(k, gt)))
    n_out, t_out = [], []
    for d in np.asarray(deltas, dtype=float):
        cfg = ProbeConfig(float(d), coupling, params)
        k = resonant_momentum(cfg.delta, params)
        up, down = fgr_rates(cfg, occupation(k))
        n_p = up / (up + down)
        n_out.append(n_p)
        t_out.append(float(probe_temperature(cfg.delta, n_p)))
    return np.array(n_out), np.array(t_out)


def dense_probe_oracle(delta: float = 1.0, coupling: float = 0.02, gt: float = 1.0, n_sites: int = 6,
                       mode: Optional[int] = None, gamma: float = 1.0):
    """Probe readout from an exact simulation of probe plus chain.

    The critical open chain is prepared in its ground state and evolved under
    its Hamiltonian and spin-flip noise to ``gt``.  ``J`` is chosen so that
    normal mode ``mode`` (default: the middle of the spectrum) sits exactly at
    ``delta``.  The noise is then switched off, the probe is attached to site
    0, and the infinite-time average of the probe occupation is taken in the
    diagonal ensemble, once from an empty and once from a full probe.  For
    weak coupling these averages are ``n/2`` and ``1 - (1 - n)/2``, so their
    ratio gives the steady occupation of the golden-rule rate equations.

    Returns a dict with the probe occupation, the exact mode occupation of the
    chain, and ``J``.
    """
    from .dynamics import mode_occupations, normal_modes, quadratic_generator
    from .oracles import (DenseState, LindbladSegment, dense_channel_oracle, pauli_matrix,
                          spin_hamiltonian)

    N = n_sites
    if mode is None:
        mode = N // 2
    base = ModelParams(TFIM, 1.0, 1.0, N, "obc")
    eps, _ = normal_modes(quadratic_generator(base, "open"))
    J = delta / eps[mode]
    params = ModelParams(TFIM, J, J, N, "obc")
    H = spin_hamiltonian("tfim", N, J, J)
    terms = tuple(({j: a}, gamma / 2) for j in range(N) for a in "XY")
    chain = dense_channel_oracle(DenseState.ground_state(H), [LindbladSegment(H, terms, gt / gamma)])
    _, occ = mode_occupations(chain.covariance(), quadratic_generator(params, "open"))

    raise_p = np.array([[0, 1], [0, 0]], dtype=complex)      # |up><down|
    lower_1 = np.kron(np.array([[0, 0], [1, 0]], dtype=complex), np.eye(2 ** (N - 1)))
    V = coupling * np.kron(lower_1, raise_p)
    Ht = np.kron(H, np.eye(2)) + 0.5 * delta * pauli_matrix(N + 1, {N: "Z"}) + V + V.conj().T
    w, v = np.linalg.eigh(Ht)
    block = np.concatenate([[0], np.cumsum(np.diff(w) > 1e-9)])
    same = block[:, None] == block[None, :]
    n_probe = np.kron(np.eye(2 ** N), np.diag([1.0, 0.0]))
    averages = []
    for probe in (np.diag([0.0, 1.0]), np.diag([1.0, 0.0])):
        r = v.conj().T @ np.kron(chain.rho, probe) @ v
        averages.append(float(np.real(np.sum((r * same) * (v.conj().T @ n_probe @ v).T))))
    up, down = averages[0], 1.0 - averages[1]
    return {"n_probe": up / (up + down), "n_mode": float(occ[mode]), "J": J, "mode": mode,
            "k": 2 * math.asin(delta / (4 * J))}
