"""Analytic occupations, coherences, temperatures and rates of noisy critical chains.

Unless stated otherwise the Ising results are for the critical ground state
``g = J`` under spin-flip noise of strength ``gamma``, where a fermion pair
correlator at separation ``d`` decays as ``exp(-gamma |d| t)`` and the
on-site one as ``exp(-gamma t)``.  Arguments named ``gt`` are the
dimensionless product ``gamma * t``.

Functions are vectorized over ``k`` and ``gt``.  Points where a quantity
diverges evaluate to ``inf`` (arrays) or to a :class:`Tagged` float (scalars).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy import integrate
from scipy.special import spence

from .gaussian import bogoliubov_angle, critical_pair_correlator, pair_correlator_table

__all__ = [
    "NoiseKind", "Regime", "Tagged", "ObservableSeries",
    "nk_tfim_xy", "nk_tfim_series", "nk_tfim_xy_asymptotic", "nk_tfim_general",
    "teff", "teff_tfim_limits", "plateau_temperature",
    "ck_tfim_xy", "ck_alt", "nk_alt",
    "ntot_tfim_xy", "ntot_tfim_xy_asymptotic", "ntot_rate_tfim_xy",
    "qp_rate_t0", "total_rate_near_critical",
    "nk_xx", "nk_xx_series", "teff_xx_limits", "npos_xx", "npos_rate_xx", "qp_rate_xx",
    "dilog",
]

SERIES_MIN_GT = 3.6e-5
SERIES_MAX_TERMS = 10 ** 6
AXES = ("momentum", "time", "field", "energy", "size", "separation", "scaled_energy")


class NoiseKind(str, enum.Enum):
    XY = "xy"
    Z = "z"
    FREE_FERMION = "ff"


class Regime(str, enum.Enum):
    SHORT = "short"
    LONG = "long"


class Tagged(float):
    """Float carrying a tag (e.g. ``"divergent"``) for singular points."""

    def __new__(cls, value, tag: str):
        obj = super().__new__(cls, value)
        obj.tag = tag
        return obj

    def __repr__(self):
        return f"Tagged({float(self)!r}, {self.tag!r})"


def _out(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def _tag(value, mask, tag: str = "divergent"):
    """Scalar results at flagged points become :class:`Tagged`."""
    value = np.asarray(value, dtype=float)
    if value.ndim == 0:
        return Tagged(float(value), tag) if bool(mask) else float(value)
    return value


@dataclass
class ObservableSeries:
    """Samples of one or more observables on a common increasing axis."""

    axis: str
    abscissa: np.ndarray
    series: Dict[str, np.ndarray]
    units: Dict[str, str] = field(default_factory=dict)
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown axis {self.axis!r}")
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        if np.any(np.diff(self.abscissa) <= 0):
            raise ValueError("abscissae must be strictly increasing")
        self.series = {k: np.asarray(v) for k, v in self.series.items()}
        for k, v in self.series.items():
            if v.shape != self.abscissa.shape:
                raise ValueError(f"series {k!r} has the wrong length")


# ---------------------------------------------------------------------------
# Ising chain, spin-flip noise

def _im_atanh(z):
    """Imaginary part of the principal ``arctanh`` for ``|z| <= 1``."""
    return 0.5 * np.arctan2(2 * z.imag, 1 - np.abs(z) ** 2)


def _re_atanh(z):
    a, b = z.real, z.imag
    with np.errstate(divide="ignore"):
        return 0.25 * np.log(((1 + a) ** 2 + b * b) / ((1 - a) ** 2 + b * b))


def nk_tfim_xy(k, gt):
    """Quasiparticle occupation of the critical Ising chain after spin-flip noise.

    ``1/2 + |sin(k/2)|(1 - e^{-gt})/pi + (2/pi) cosh(gt/2) Im artanh(z)`` with
    ``z = exp(-(i|k| + gt)/2)``, which equals the lattice series of
    :func:`nk_tfim_series`.
    """
    k, gt = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(gt, dtype=float))
    ak = np.abs(k)
    z = np.exp(-(1j * ak + gt) / 2)
    out = 0.5 + np.abs(np.sin(k / 2)) * (1 - np.exp(-gt)) / np.pi + (2 / np.pi) * np.cosh(gt / 2) * _im_atanh(z)
    out = np.where(gt == 0, 0.0, out)
    return _out(out)


def nk_tfim_series(k, gt, dmax: Optional[int] = None, g: float = 1.0, J: float = 1.0):
    """Lattice series ``1/2 - e^{-gt} cos(th) F(0)/2
    - sum_{d>=1} e^{-d gt} [cos(kd) cos(th) F(d) + sin(kd) sin(th) A(d)]``.

    ``F`` and ``A`` are the pair correlators of the ground state at field
    ``g``; at ``g = J`` they are the closed forms.
    """
    k = float(k)
    gt = float(gt)
    if dmax is None:
        dmax = _series_terms(gt, g, J)
    if g == J:
        d = np.arange(dmax + 1)
        F = critical_pair_correlator(d, "cos")
        A = critical_pair_correlator(d, "sin")
        th = bogoliubov_angle(k, g, J, side=1 if k >= 0 else -1)
    else:
        F, A = pair_correlator_table(dmax, g, J)
        d = np.arange(dmax + 1)
        th = bogoliubov_angle(k, g, J)
    w = np.exp(-d * gt)
    terms = np.cos(k * d) * np.cos(th) * F + np.sin(k * d) * np.sin(th) * A
    return float(0.5 - 0.5 * math.exp(-gt) * np.cos(th) * F[0] - np.sum(w[1:] * terms[1:]))


def _series_terms(gt: float, g: float = 1.0, J: float = 1.0) -> int:
    n = SERIES_MAX_TERMS
    if gt > 0:
        n = min(n, int(math.ceil(36.0 / gt)))
    if g != J:
        n = min(n, int(math.ceil(40.0 / abs(math.log(g / J)))) + 64)
    return max(n, 64)


def nk_tfim_general(k, gt, g: float, J: float = 1.0):
    """Occupation at arbitrary field ``g`` by the lattice series (vectorized over ``k``)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return _out(np.array([nk_tfim_series(kk, gt, g=g, J=J) for kk in k]))


def nk_tfim_xy_asymptotic(k, gt, regime, J: float = 1.0):
    """Short times ``(2/pi)(J/eps + eps/8J) gt``; long times
    ``1/2 + (eps/4 pi J)(1 - e^{-gt} - coth(gt/2))``."""
    regime = Regime(regime)
    eps = 4.0 * J * np.abs(np.sin(np.asarray(k, dtype=float) / 2))
    gt = np.asarray(gt, dtype=float)
    if regime == Regime.SHORT:
        with np.errstate(divide="ignore"):
            return _out((2 / np.pi) * (J / eps + eps / (8 * J)) * gt)
    with np.errstate(divide="ignore"):
        return _out(0.5 + eps / (4 * np.pi * J) * (1 - np.exp(-gt) - 1 / np.tanh(gt / 2)))


def teff(eps, n):
    """Fermi-Dirac temperature ``eps / log((1 - n)/n)``.

    ``n = 1/2`` gives ``+inf`` (tagged ``"infinite"`` for scalars); ``n > 1/2``
    gives a negative temperature.
    """
    eps = np.asarray(eps, dtype=float)
    n = np.asarray(n, dtype=float)
    if np.any((n < 0) | (n > 1)):
        raise ValueError("occupation must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = eps / (np.log1p(-n) - np.log(n))
    half = n == 0.5
    out = np.where(half, np.inf, out)
    return _tag(out, half, "infinite") if out.ndim == 0 else out


def plateau_temperature(gt, J: float = 1.0):
    """Low-energy temperature ``pi J (e^{2gt} - e^{gt})/(3 e^{gt} - 1)``."""
    gt = np.asarray(gt, dtype=float)
    e = np.exp(gt)
    return _out(np.pi * J * (e * e - e) / (3 * e - 1))


def teff_tfim_limits(k, gt, regime, J: float = 1.0):
    """Temperature in the two asymptotic regimes.

    Long times (``|k| << gt``): the plateau.  Short times (``|k| >> gt``):
    Fermi-Dirac inversion of the short-time occupation,
    ``eps / log((1 - n_s)/n_s)`` with ``n_s = (2/pi)(J/eps + eps/8J) gt``.
    """
    regime = Regime(regime)
    if regime == Regime.LONG:
        k, gt = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(gt, dtype=float))
        return plateau_temperature(gt, J)
    eps = 4.0 * J * np.abs(np.sin(np.asarray(k, dtype=float) / 2))
    ns = nk_tfim_xy_asymptotic(k, gt, Regime.SHORT, J)
    with np.errstate(divide="ignore", invalid="ignore"):
        return _out(eps / np.log((1 - ns) / ns))


def ck_tfim_xy(k, gt):
    """Anomalous coherence ``<beta_{-k} beta_k>`` of the critical chain.

    ``(i sgn(k)/pi) [cos(k/2)(e^{-gt} - 1) + 2 sinh(gt/2) Re artanh(z)]`` with
    ``z = exp(-(i|k| + gt)/2)``.  ``k = 0`` is read as ``k -> 0+``.
    """
    k, gt = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(gt, dtype=float))
    s = np.where(k < 0, -1.0, 1.0)
    z = np.exp(-(1j * np.abs(k) + gt) / 2)
    re = np.where(gt == 0, 0.0, _re_atanh(np.where(gt == 0, 0.5, z)))
    out = 1j * s / np.pi * (np.cos(k / 2) * (np.exp(-gt) - 1) + 2 * np.sinh(gt / 2) * re)
    return _out(out)


def ck_alt(noise, k, gt):
    """Coherence under dephasing (``(i/pi) sgn(k) cos(k/2)(1 - e^{-gt})``) or
    fermion loss/gain (zero).  Spin-flip noise is forwarded to :func:`ck_tfim_xy`."""
    noise = NoiseKind(noise)
    if noise == NoiseKind.XY:
        return ck_tfim_xy(k, gt)
    k, gt = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(gt, dtype=float))
    if noise == NoiseKind.FREE_FERMION:
        return _out(np.zeros(k.shape, dtype=complex))
    s = np.where(k < 0, -1.0, 1.0)
    return _out(1j / np.pi * s * np.cos(k / 2) * (1 - np.exp(-gt)))


def nk_alt(noise, k, gt, g: float = 1.0, J: float = 1.0):
    """Occupation under dephasing, ``n_inf (1 - e^{-gt})`` with
    ``n_inf = (1 - cos(theta_k) F(0))/2``, or under fermion loss and gain,
    ``(1 - e^{-2gt})/2``."""
    noise = NoiseKind(noise)
    k, gt = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(gt, dtype=float))
    if noise == NoiseKind.FREE_FERMION:
        return _out(0.5 * (1 - np.exp(-2 * gt)))
    if noise == NoiseKind.XY:
        if g != J:
            raise ValueError("spin-flip closed form is for the critical chain; use nk_tfim_general")
        return nk_tfim_xy(k, gt)
    F0 = (2 / np.pi) if g == J else pair_correlator_table(0, g, J)[0][0]
    th = bogoliubov_angle(k, g, J, side=1)
    return _out(0.5 * (1 - np.cos(th) * F0) * (1 - np.exp(-gt)))


def _ntot_series(gt: float) -> float:
    dmax = min(int(math.ceil(36.0 / gt)), SERIES_MAX_TERMS)
    d = np.arange(1, dmax + 1, dtype=float)
    terms = np.exp(-d * gt) * (1 + 4 * d * d) / (1 - 4 * d * d) ** 2
    return 0.5 - (2 / np.pi ** 2) * math.exp(-gt) - (4 / np.pi ** 2) * float(np.sum(terms[::-1]))


def _ntot_quad(gt: float) -> float:
    f = lambda k: float(nk_tfim_xy(k, gt))
    pts = [p for p in (gt, 10 * gt, 100 * gt) if p < np.pi]
    val, _ = integrate.quad(f, 0.0, np.pi, points=pts, epsabs=1e-15, epsrel=1e-12, limit=500)
    return val / np.pi


def ntot_tfim_xy(gt):
    """Quasiparticle density ``(1/2pi) int n_k dk``.

    The exponentially convergent series is summed for ``gt >= 3.6e-5``;
    below that the closed-form occupation is integrated over ``k``.
    """
    def one(x):
        if x == 0:
            return 0.0
        return _ntot_series(x) if x >= SERIES_MIN_GT else _ntot_quad(x)
    gt = np.asarray(gt, dtype=float)
    if gt.ndim == 0:
        return one(float(gt))
    return np.vectorize(one, otypes=[float])(gt)


def ntot_tfim_xy_asymptotic(gt, regime):
    """``-(1/pi^2) gt log(gt)`` at short times, ``1/2 - (38/9pi^2) e^{-gt}`` at long times."""
    regime = Regime(regime)
    gt = np.asarray(gt, dtype=float)
    if regime == Regime.SHORT:
        return _out(-gt * np.log(gt) / np.pi ** 2)
    return _out(0.5 - 38 / (9 * np.pi ** 2) * np.exp(-gt))


def ntot_rate_tfim_xy(gt):
    """``d n / d(gt)`` from the series (for ``gt > 0``)."""
    def one(x):
        dmax = min(int(math.ceil(36.0 / x)), SERIES_MAX_TERMS)
        d = np.arange(1, dmax + 1, dtype=float)
        terms = d * np.exp(-d * x) * (1 + 4 * d * d) / (1 - 4 * d * d) ** 2
        return (2 / np.pi ** 2) * math.exp(-x) + (4 / np.pi ** 2) * float(np.sum(terms[::-1]))
    gt = np.asarray(gt, dtype=float)
    if gt.ndim == 0:
        return one(float(gt))
    return np.vectorize(one, otypes=[float])(gt)


def qp_rate_t0(k, g: float = 1.0, J: float = 1.0, gamma: float = 1.0):
    """Initial production rate ``d n_k/dt`` at ``t = 0``.

    Critical chain: ``(2 gamma/pi)(J/eps_k + eps_k/8J)``, divergent at ``k = 0``.
    Otherwise the time derivative of the lattice series,
    ``gamma [cos(th) F(0)/2 + sum_d d (cos(kd) cos(th) F(d) + sin(kd) sin(th) A(d))]``.
    """
    k_arr = np.asarray(k, dtype=float)
    if g == J:
        eps = 4.0 * J * np.abs(np.sin(k_arr / 2))
        with np.errstate(divide="ignore"):
            out = np.where(eps == 0, np.inf, (2 * gamma / np.pi) * (J / eps + eps / (8 * J)))
        return _tag(out, eps == 0) if out.ndim == 0 else out
    dmax = _series_terms(0.0, g, J)
    F, A = pair_correlator_table(dmax, g, J)
    d = np.arange(dmax + 1)
    kk = np.atleast_1d(k_arr)
    th = bogoliubov_angle(kk, g, J)
    cosk = np.cos(np.outer(kk, d[1:]))
    sink = np.sin(np.outer(kk, d[1:]))
    tail = np.cos(th) * (cosk @ (d[1:] * F[1:])) + np.sin(th) * (sink @ (d[1:] * A[1:]))
    out = gamma * (0.5 * np.cos(th) * F[0] + tail)
    return _out(out if k_arr.ndim else out[0])


def total_rate_near_critical(g: float, J: float = 1.0, gamma: float = 1.0):
    """Momentum-averaged initial rate ``(1/2pi) int qp_rate_t0 dk``.

    By Parseval this is ``gamma [F(0)^2/2 + sum_d d (F(d)^2 + A(d)^2)]``,
    which diverges logarithmically as ``g -> J``.
    """
    if g == J:
        return Tagged(math.inf, "divergent")
    xi = 1.0 / abs(math.log(g / J))
    dmax = int(min(max(64, math.ceil(25 * xi)), 4 * 10 ** 6))
    F, A = pair_correlator_table(dmax, g, J)
    d = np.arange(dmax + 1)
    return float(gamma * (0.5 * F[0] ** 2 + np.sum((d[1:] * (F[1:] ** 2 + A[1:] ** 2))[::-1])))


# ---------------------------------------------------------------------------
# XX chain

def nk_xx(k, gt):
    """Plane-wave occupation ``1/2 + (2/pi) Re arctan(e^{ik - gt})`` of the
    half-filled XX chain, equal to ``1/2 + [arccot(e^{-ik+gt}) + arccot(e^{ik+gt})]/pi``."""
    k, gt = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(gt, dtype=float))
    z = np.exp(1j * k - gt)
    re = 0.5 * np.arctan2(2 * z.real, 1 - np.abs(z) ** 2)
    return _out(0.5 + (2 / np.pi) * re)


def nk_xx_series(k, gt, dmax: Optional[int] = None):
    """``1/2 + 2 sum_{d>0} e^{-d gt} cos(kd) sin(pi d/2)/(pi d)``."""
    if dmax is None:
        dmax = _series_terms(float(gt))
    d = np.arange(1, dmax + 1, dtype=float)
    terms = np.exp(-d * gt) * np.cos(k * d) * np.sin(np.pi * d / 2) / (np.pi * d)
    return float(0.5 + 2 * np.sum(terms[::-1]))


def teff_xx_limits(k, gt, regime, J: float = 1.0):
    """Long times ``(pi J/2) sinh(gt)``; short times ``|eps| / log(pi |eps|/(2 J gt))``."""
    regime = Regime(regime)
    k, gt = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(gt, dtype=float))
    if regime == Regime.LONG:
        return _out(0.5 * np.pi * J * np.sinh(gt))
    eps = np.abs(2 * J * np.cos(k))
    with np.errstate(divide="ignore", invalid="ignore"):
        return _out(eps / np.log(np.pi * eps / (2 * J * gt)))


def dilog(x):
    """Real dilogarithm ``Li2(x)`` for ``x <= 1``."""
    return spence(1.0 - np.asarray(x, dtype=float))


def npos_xx(gt):
    """Occupied fraction of positive-energy modes,
    ``1/2 - (2/pi^2)(Li2(e^{-gt}) - Li2(-e^{-gt}))``."""
    u = np.exp(-np.asarray(gt, dtype=float))
    return _out(0.5 - (2 / np.pi ** 2) * (dilog(u) - dilog(-u)))


def npos_rate_xx(gt):
    """``d npos / d(gt) = -(2/pi^2) log tanh(gt/2)``."""
    gt = np.asarray(gt, dtype=float)
    with np.errstate(divide="ignore"):
        return _out(-(2 / np.pi ** 2) * np.log(np.tanh(gt / 2)))


def qp_rate_xx(k, gt, gamma: float = 1.0):
    """``d<d_k^dag d_k>/dt = -(2 gamma/pi) cos(k) cosh(gt)/(cos(2k) + cosh(2gt))``.

    Divergent at the Fermi points ``k = +-pi/2`` when ``gt = 0``.
    """
    k, gt = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(gt, dtype=float))
    den = np.cos(2 * k) + np.cosh(2 * gt)
    sing = (gt == 0) & (np.abs(np.cos(k)) < 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(2 * gamma / np.pi) * np.cos(k) * np.cosh(gt) / den
    out = np.where(sing, np.inf, out)
    return _tag(out, sing) if out.ndim == 0 else out
