"""Gaussian fermionic states of spin chains.

Conventions used throughout the package
---------------------------------------
Spin up is an occupied fermion, ``n = (1 + Z)/2``.  The Jordan-Wigner map is
``c_j = prod_{i<j}(-Z_i) sigma^-_j`` and the Majorana operators are

    gamma_{2j}   = c_j + c_j^dag
    gamma_{2j+1} = i (c_j^dag - c_j)

so that ``Z_j = i gamma_{2j} gamma_{2j+1}``, ``X_j = S_j gamma_{2j}`` and
``Y_j = S_j gamma_{2j+1}`` up to sign, with ``S_j`` the string on sites ``i<j``.
A state is stored through the real antisymmetric matrix ``M`` defined by
``<gamma_m gamma_n> = delta_mn + i M_mn``.  The vacuum has
``M_{2j,2j+1} = +1`` and total parity ``Pf(M) = +1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate
from scipy.linalg import toeplitz

__all__ = [
    "ModelParams",
    "MajoranaCovariance",
    "SpectralPoint",
    "DegeneratePointError",
    "QuadratureError",
    "as_matrix",
    "dispersion",
    "bogoliubov_angle",
    "spectral_point",
    "critical_pair_correlator",
    "pair_correlator_general",
    "pair_correlator_table",
    "fermion_correlators",
    "covariance_from_correlators",
    "build_ground_state",
    "separation_profiles",
    "quasiparticle_occupation",
    "quasiparticle_coherence",
    "pfaffian",
    "majorana_string_expectation",
    "parity_sign",
    "energy",
    "vacuum",
    "random_gaussian_state",
]

TFIM = "tfim"
XX = "xx"
OBC = "obc"
PBC = "pbc"


class DegeneratePointError(ValueError):
    """Raised where the Bogoliubov angle has a removable singularity."""


class QuadratureError(RuntimeError):
    """Raised when a correlator integral does not reach its tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class ModelParams:
    """Chain parameters.

    Parameters
    ----------
    kind : {"tfim", "xx"}
        Transverse-field Ising chain ``-J X X + g Z`` or XX chain
        ``-(J/2)(XX + YY)``.
    J : float
        Coupling, must be positive.
    g : float
        Transverse field (ignored for the XX chain).
    size : int or None
        Number of sites; ``None`` means the infinite chain.
    boundary : {"obc", "pbc"}
        Boundary condition for finite chains.
    """

    kind: str = TFIM
    J: float = 1.0
    g: float = 1.0
    size: Optional[int] = None
    boundary: str = OBC

    def __post_init__(self):
        kind = str(self.kind).lower()
        boundary = str(self.boundary).lower()
        if kind not in (TFIM, XX):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if boundary not in (OBC, PBC):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if not self.J > 0:
            raise ValueError("J must be positive")
        if self.size is not None and (int(self.size) != self.size or self.size < 1):
            raise ValueError("size must be a positive integer or None")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "boundary", boundary)
        if self.size is not None:
            object.__setattr__(self, "size", int(self.size))

    @property
    def thermodynamic(self) -> bool:
        return self.size is None

    @property
    def critical(self) -> bool:
        return self.kind == XX or self.g == self.J


class MajoranaCovariance:
    """Real antisymmetric Majorana covariance ``M`` of an ``n_sites`` chain.

    Parameters
    ----------
    matrix : array_like, shape (2N, 2N)
        The antisymmetric part; ``<gamma_m gamma_n> = delta_mn + i M_mn``.
    check : bool
        Verify antisymmetry to 1e-14 (relative to the largest entry).
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix, check: bool = True):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError("covariance must be a square matrix of even dimension")
        if check:
            scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
            if m.size and np.max(np.abs(m + m.T)) > 1e-14 * scale:
                raise ValueError("covariance is not antisymmetric")
        self.matrix = m

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0] // 2

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __repr__(self):
        return f"MajoranaCovariance(n_sites={self.n_sites})"

    def copy(self) -> "MajoranaCovariance":
        return MajoranaCovariance(self.matrix.copy(), check=False)

    def is_physical(self, tol: float = 1e-10) -> bool:
        """All singular values of ``M`` are at most ``1 + tol``."""
        if self.matrix.size == 0:
            return True
        return bool(np.linalg.norm(self.matrix, 2) <= 1 + tol)

    def purity_error(self) -> float:
        """``max |M^2 + 1|``; zero for pure Gaussian states."""
        m = self.matrix
        return float(np.max(np.abs(m @ m + np.eye(m.shape[0])))) if m.size else 0.0


CovarianceLike = Union[MajoranaCovariance, np.ndarray]


def as_matrix(M: CovarianceLike) -> np.ndarray:
    """Return the underlying ``ndarray`` of a covariance."""
    if isinstance(M, MajoranaCovariance):
        return M.matrix
    return np.asarray(M, dtype=float)


@dataclass(frozen=True)
class SpectralPoint:
    k: float
    energy: float
    angle: Optional[float]


# ---------------------------------------------------------------------------
# Spectrum

def dispersion(k, params: ModelParams):
    """Single-particle energy at wavevector ``k``.

    TFIM: ``2 sqrt(J^2 + g^2 - 2 g J cos k)`` (non-negative).
    XX: ``-2 J cos k`` (signed).
    """
    k = np.asarray(k, dtype=float)
    if params.kind == XX:
        out = -2.0 * params.J * np.cos(k)
    else:
        J, g = params.J, params.g
        out = 2.0 * np.sqrt(np.maximum((g - J * np.cos(k)) ** 2 + (J * np.sin(k)) ** 2, 0.0))
    return out[()] if out.ndim == 0 else out


def bogoliubov_angle(k, g: float, J: float = 1.0, side: Optional[int] = None):
    """Bogoliubov angle with ``eps cos(theta) = 2g - 2J cos k``,
    ``eps sin(theta) = 2J sin k``.

    At the removable singularity ``g = J, k = 0`` a :class:`DegeneratePointError`
    is raised unless ``side`` (+1 or -1) selects the one-sided limit
    ``theta -> side * pi/2``.
    """
    k = np.asarray(k, dtype=float)
    num = J * np.sin(k)
    den = g - J * np.cos(k)
    degenerate = (num == 0) & (den == 0)
    theta = np.arctan2(num, den)
    if np.any(degenerate):
        if side is None:
            raise DegeneratePointError("Bogoliubov angle undefined at g = J, k = 0; pass side=+1 or -1")
        theta = np.where(degenerate, np.sign(side) * np.pi / 2, theta)
    return theta[()] if theta.ndim == 0 else theta


def spectral_point(k: float, params: ModelParams) -> SpectralPoint:
    energy = float(dispersion(k, params))
    angle = None
    if params.kind == TFIM:
        angle = float(bogoliubov_angle(k, params.g, params.J, side=1 if k >= 0 else -1))
    return SpectralPoint(float(k), energy, angle)


# ---------------------------------------------------------------------------
# Pair correlators F_cos(d) = (1/2pi) int cos(kd) cos(theta_k) dk and
# A_sin(d) = (1/2pi) int sin(kd) sin(theta_k) dk.

COS = "cos"
SIN = "sin"


def _which(which) -> str:
    w = str(which).lower()
    if w in ("cos", "costheta"):
        return COS
    if w in ("sin", "sintheta"):
        return SIN
    raise ValueError(f"unknown correlator kind {which!r}")


def critical_pair_correlator(d, which="cos"):
    """Critical-point pair correlators.

    ``cos``: ``(2/pi)/(1 - 4 d^2)``; ``sin``: ``-(4 d/pi)/(1 - 4 d^2)``.
    """
    d = np.asarray(d, dtype=float)
    if _which(which) == COS:
        out = (2.0 / np.pi) / (1.0 - 4.0 * d * d)
    else:
        out = -(4.0 * d / np.pi) / (1.0 - 4.0 * d * d)
    return out[()] if out.ndim == 0 else out


def pair_correlator_general(d: int, g: float, J: float = 1.0, which="cos", tol: float = 1e-12) -> float:
    """Pair correlator at arbitrary field by adaptive quadrature.

    The integrand is even (``cos``) or odd (``sin``) in ``k`` so the integral is
    folded onto ``[0, pi]`` and evaluated with an oscillatory weight.  When the
    gap ``|g - J|`` is small the interval is split at a scale proportional to
    the gap so the sharp feature near ``k = 0`` is resolved separately.
    """
    w = _which(which)
    d = int(d)
    if w == SIN and d == 0:
        return 0.0
    sign = 1.0
    if w == SIN and d < 0:
        d, sign = -d, -1.0
    d = abs(d)

    def f(k):
        th = np.arctan2(J * np.sin(k), g - J * np.cos(k))
        return np.cos(th) if w == COS else np.sin(th)

    gap = abs(g - J) / J
    breaks = [0.0]
    if gap < 0.5:
        for s in (gap, 4 * gap, 16 * gap, 64 * gap):
            if 1e-14 < s < np.pi / 2:
                breaks.append(s)
    breaks.append(np.pi)
    weight = "cos" if w == COS else "sin"
    total, err = 0.0, 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if d == 0:
            val, e = integrate.quad(f, a, b, epsabs=tol / 4, epsrel=0, limit=500)
        else:
            val, e = integrate.quad(f, a, b, weight=weight, wvar=d, epsabs=tol / 4, epsrel=0, limit=500)
        total += val
        err += e
    if err > tol:
        raise QuadratureError(f"pair correlator d={d} did not converge", err)
    return sign * total / np.pi


def pair_correlator_table(dmax: int, g: float, J: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """``F_cos(d)`` and ``A_sin(d)`` for ``d = 0..dmax`` on the infinite chain.

    Uses the closed form at ``g = J``.  Otherwise the Fourier coefficients are
    obtained from the trapezoidal rule on a periodic grid, which converges
    exponentially for a gapped chain; the grid is doubled until two successive
    estimates agree to 1e-14.
    """
    d = np.arange(dmax + 1)
    if g == J:
        return critical_pair_correlator(d, COS), critical_pair_correlator(d, SIN)
    gap = abs(g - J) / J
    L = 1 << max(10, int(np.ceil(np.log2(max(4 * (dmax + 1), 64.0 / gap)))))
    prev = None
    while True:
        k = 2 * np.pi * np.arange(L) / L
        th = np.arctan2(J * np.sin(k), g - J * np.cos(k))
        c = np.fft.fft(np.cos(th)).real / L
        s = -np.fft.fft(np.sin(th)).imag / L
        cur = (c[: dmax + 1].copy(), s[: dmax + 1].copy())
        if prev is not None:
            diff = max(np.max(np.abs(cur[0] - prev[0])), np.max(np.abs(cur[1] - prev[1])))
            if diff < 1e-14:
                return cur
        if L > (1 << 26):
            raise QuadratureError("pair correlator table did not converge", diff)
        prev = cur
        L *= 2


# ---------------------------------------------------------------------------
# Conversions between Majorana and fermion correlators.

def fermion_correlators(M: CovarianceLike) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``G_mn = <c_m^dag c_n>`` and ``F_mn = <c_m c_n>``."""
    m = as_matrix(M)
    ee, eo = m[0::2, 0::2], m[0::2, 1::2]
    oe, oo = m[1::2, 0::2], m[1::2, 1::2]
    n = ee.shape[0]
    G = 0.5 * np.eye(n) - 0.25 * (eo - oe) + 0.25j * (ee + oo)
    F = -0.25 * (eo + oe) + 0.25j * (ee - oo)
    return G, F


def covariance_from_correlators(G, F) -> MajoranaCovariance:
    """Inverse of :func:`fermion_correlators`."""
    G = np.asarray(G, dtype=complex)
    F = np.asarray(F, dtype=complex)
    n = G.shape[0]
    s_plus = 4 * G.imag           # ee + oo
    s_minus = 4 * F.imag          # ee - oo
    d_minus = -4 * (G.real - 0.5 * np.eye(n))   # eo - oe
    d_plus = -4 * F.real          # eo + oe
    m = np.zeros((2 * n, 2 * n))
    m[0::2, 0::2] = 0.5 * (s_plus + s_minus)
    m[1::2, 1::2] = 0.5 * (s_plus - s_minus)
    m[0::2, 1::2] = 0.5 * (d_plus + d_minus)
    m[1::2, 0::2] = 0.5 * (d_plus - d_minus)
    m = 0.5 * (m - m.T)
    return MajoranaCovariance(m, check=False)


def _blocks_to_matrix(ee, eo, oe, oo) -> np.ndarray:
    n = ee.shape[0]
    m = np.empty((2 * n, 2 * n))
    m[0::2, 0::2] = ee
    m[0::2, 1::2] = eo
    m[1::2, 0::2] = oe
    m[1::2, 1::2] = oo
    return m


def _toeplitz_from_profile(prof: np.ndarray, W: int) -> np.ndarray:
    """Matrix ``X[a, b] = prof(a - b)`` with ``prof`` indexed by ``d + W - 1``."""
    col = prof[W - 1:]            # d = a - b >= 0, first column
    row = prof[W - 1::-1]         # d = -(b), first row
    return toeplitz(col, row)


def _translation_invariant_state(g_prof, f_prof, W: int) -> MajoranaCovariance:
    """Build ``M`` from separation profiles ``g(d) = <c^dag_m c_{m-d}>``, ``f(d) = <c_m c_{m-d}>``.

    Profiles are indexed by ``d + W - 1`` for ``d = -(W-1)..W-1``.
    """
    d = np.arange(-(W - 1), W)
    s_plus = 4 * g_prof.imag
    s_minus = 4 * f_prof.imag
    d_minus = -4 * (g_prof.real - 0.5 * (d == 0))
    d_plus = -4 * f_prof.real
    ee = _toeplitz_from_profile(0.5 * (s_plus + s_minus), W)
    oo = _toeplitz_from_profile(0.5 * (s_plus - s_minus), W)
    eo = _toeplitz_from_profile(0.5 * (d_plus + d_minus), W)
    oe = _toeplitz_from_profile(0.5 * (d_plus - d_minus), W)
    return MajoranaCovariance(_blocks_to_matrix(ee, eo, oe, oo), check=False)


def _window_size(window) -> int:
    if window is None:
        raise ValueError("an infinite chain needs a finite window")
    if isinstance(window, (tuple, list, range)):
        if len(window) == 2 and not isinstance(window, range):
            start, stop = window
        else:
            start, stop = window[0], window[-1] + 1
        W = int(stop) - int(start)
    else:
        W = int(window)
    if W < 1:
        raise ValueError("window must contain at least one site")
    return W


def build_ground_state(params: ModelParams, window=None) -> MajoranaCovariance:
    """Ground-state covariance.

    Infinite chains are materialized on a window of ``window`` sites (an integer
    or a ``(start, stop)`` pair); entries depend only on separation.  Finite open
    chains use the normal modes of the quadratic generator.  Finite periodic
    chains use momentum sums in the even-parity sector (antiperiodic grid for
    the TFIM; for the XX chain the grid matching the parity of the half-filled
    sector).
    """
    if params.thermodynamic:
        W = _window_size(window)
        d = np.arange(-(W - 1), W)
        if params.kind == XX:
            with np.errstate(invalid="ignore", divide="ignore"):
                g_prof = np.where(d == 0, 0.5, np.sin(np.pi * d / 2) / (np.pi * np.where(d == 0, 1, d)))
            f_prof = np.zeros_like(g_prof)
        else:
            fc, fs = pair_correlator_table(W - 1, params.g, params.J)
            ad = np.abs(d)
            Fc = fc[ad]
            As = np.sign(d) * fs[ad]
            g_prof = 0.5 * (d == 0) - 0.5 * Fc
            f_prof = 0.5 * As
        return _translation_invariant_state(g_prof.astype(complex), f_prof.astype(complex), W)

    N = params.size
    if params.kind == XX and N % 2:
        raise ValueError("the zero-magnetization sector needs an even number of sites")
    if params.boundary == PBC:
        return _periodic_ground_state(params)
    from .dynamics import quadratic_generator, ground_state_of
    return ground_state_of(quadratic_generator(params, sector="open"))


def _periodic_ground_state(params: ModelParams) -> MajoranaCovariance:
    N, J = params.size, params.J
    j = np.arange(N)
    if params.kind == TFIM:
        k = 2 * np.pi * (j + 0.5) / N
        th = bogoliubov_angle(k, params.g, J)
        occ = np.sin(th / 2) ** 2
        pair = -0.5j * np.sin(th)
    else:
        half = N // 2
        k = 2 * np.pi * (j + (0.5 if half % 2 == 0 else 0.0)) / N
        k = np.where(k > np.pi, k - 2 * np.pi, k)
        occ = (np.abs(k) < np.pi / 2).astype(float)
        pair = np.zeros(N, dtype=complex)
    # correlators depend on m - n only; sum over k once per separation
    sep = np.arange(-(N - 1), N)
    phase = np.exp(1j * np.multiply.outer(sep, k))
    idx = np.subtract.outer(j, j) + N - 1
    G = (phase @ occ / N)[idx]
    F = (phase @ pair / N)[idx]
    return covariance_from_correlators(G, F)


# ---------------------------------------------------------------------------
# Quasiparticle observables

def separation_profiles(M: CovarianceLike, mode: str = "window"):
    """Separation-resolved correlators of a (twisted) translation-invariant state.

    Returns ``(d, g, f)`` with ``g(d)`` and ``f(d)`` the averages of
    ``<c_m^dag c_n>`` and ``<c_m c_n>`` over pairs with ``m - n = d``.
    In ``"chain"`` mode diagonals are summed and divided by the chain length,
    which reproduces the ``(1/N) sum_mn`` double sum exactly.
    """
    m = as_matrix(M)
    W = m.shape[0] // 2
    blocks = {
        "ee": m[0::2, 0::2], "eo": m[0::2, 1::2],
        "oe": m[1::2, 0::2], "oo": m[1::2, 1::2],
    }
    d = np.arange(-(W - 1), W)
    prof = {}
    for name, B in blocks.items():
        vals = np.empty(2 * W - 1)
        for i, dd in enumerate(d):
            diag = np.diagonal(B, offset=-dd)
            vals[i] = diag.sum() / (W if mode == "chain" else diag.size)
        prof[name] = vals
    weight = 1.0 if mode == "window" else (W - np.abs(d)) / W
    g = (0.5 * (d == 0) * weight - 0.25 * (prof["eo"] - prof["oe"])
         + 0.25j * (prof["ee"] + prof["oo"]))
    f = -0.25 * (prof["eo"] + prof["oe"]) + 0.25j * (prof["ee"] - prof["oo"])
    return d, g, f


def _fourier(d, prof, k):
    """``sum_d e^{-ikd} prof(d)`` for an array of ``k``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    N = (d.size + 1) // 2
    if k.size == N and N > 64 and d[0] == -(N - 1):
        # antiperiodic grid k = 2 pi (j + 1/2)/N (any order, mod 2 pi): fold d mod N, FFT
        j = np.mod(k * N / (2 * np.pi) - 0.5, N)
        ji = np.rint(j).astype(int)
        if np.allclose(j, ji, atol=1e-6) and np.unique(ji % N).size == N:
            q = prof[N - 1:].astype(complex)
            q[1:] -= prof[:N - 1]
            r = np.arange(N)
            return np.fft.fft(q * np.exp(-1j * np.pi * r / N))[ji % N]
    return np.exp(-1j * np.outer(k, d)) @ prof


def _default_mode(params: ModelParams) -> str:
    return "window" if params.thermodynamic else "chain"


def _angles(k, params: ModelParams):
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return bogoliubov_angle(k, params.g, params.J, side=1)


def quasiparticle_occupation(M: CovarianceLike, k, params: ModelParams, mode: Optional[str] = None,
                             profiles=None):
    """Occupation ``<beta_k^dag beta_k>`` of a translation-invariant state.

    With ``beta_k = cos(theta/2) d_k + i sin(theta/2) d_{-k}^dag`` and
    ``d_k = N^{-1/2} sum_j e^{ijk} c_j``.  For the XX chain the plane-wave
    occupation ``<d_k^dag d_k>`` is returned.

    Parameters
    ----------
    mode : {"window", "chain"}, optional
        ``"window"`` treats ``M`` as a window of an infinite translation-invariant
        state (separation averages); ``"chain"`` evaluates the finite-chain
        double sum.  Defaults to ``"window"`` for infinite chains.
    profiles : tuple, optional
        Precomputed output of :func:`separation_profiles`.
    """
    mode = mode or _default_mode(params)
    d, g, f = profiles if profiles is not None else separation_profiles(M, mode)
    scalar = np.ndim(k) == 0
    k = np.atleast_1d(np.asarray(k, dtype=float))
    Gk = _fourier(d, g, k)
    if params.kind == XX:
        out = Gk.real
    else:
        Gmk = _fourier(d, g, -k)
        Fk = _fourier(d, f, k)
        # p(d) = <c_m^dag c_{m-d}^dag> = conj(<c_{m-d} c_m>) = conj(f(-d))
        Pk = _fourier(d, np.conj(f[::-1]), k)
        th = _angles(k, params)
        c2, s2 = np.cos(th / 2) ** 2, np.sin(th / 2) ** 2
        out = (c2 * Gk + s2 * (1 - Gmk) + 0.5j * np.sin(th) * (Pk - Fk)).real
    return out[0] if scalar else out


def quasiparticle_coherence(M: CovarianceLike, k, params: ModelParams, mode: Optional[str] = None,
                            profiles=None):
    """Anomalous coherence ``C_k = <beta_{-k} beta_k>`` (TFIM).

    Only ``|C_k|`` is independent of the phase convention of ``beta_k``.
    """
    if params.kind != TFIM:
        raise ValueError("coherence is defined for the Ising chain")
    mode = mode or _default_mode(params)
    d, g, f = profiles if profiles is not None else separation_profiles(M, mode)
    scalar = np.ndim(k) == 0
    k = np.atleast_1d(np.asarray(k, dtype=float))
    Gk = _fourier(d, g, k)
    Gmk = _fourier(d, g, -k)
    Fmk = _fourier(d, f, -k)
    Pmk = _fourier(d, np.conj(f[::-1]), -k)
    th = _angles(k, params)
    c2, s2 = np.cos(th / 2) ** 2, np.sin(th / 2) ** 2
    # <beta_k beta_{-k}>, negated by anticommutation
    out = -(c2 * Fmk + s2 * Pmk + 0.5j * np.sin(th) * (Gmk + Gk - 1))
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# Pfaffians, strings, parity

def pfaffian(A) -> complex:
    """Pfaffian of an antisymmetric matrix by Parlett-Reid elimination with pivoting."""
    A = np.array(A, dtype=np.result_type(np.asarray(A).dtype, float), copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("pfaffian needs a square matrix")
    if n == 0:
        return A.dtype.type(1)
    if n % 2:
        return A.dtype.type(0)
    pf = A.dtype.type(1)
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        if A[k + 1, k] == 0:
            return A.dtype.type(0)
        pf = pf * A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            col = A[k + 2:, k + 1].copy()
            A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return pf


def majorana_string_expectation(M: CovarianceLike, indices: Sequence[int]) -> complex:
    """``<gamma_{i1} gamma_{i2} ... >`` of a Gaussian state via Wick's theorem."""
    idx = [int(i) for i in indices]
    if len(set(idx)) != len(idx):
        raise ValueError("Majorana indices must be distinct")
    if not idx:
        return 1.0 + 0j
    if len(idx) % 2:
        return 0j
    m = as_matrix(M)
    K = 1j * m[np.ix_(idx, idx)]
    return complex(pfaffian(K))


def parity_sign(M: CovarianceLike, tol: float = 1e-8) -> int:
    """Fermion parity ``Pf(M)`` of a pure Gaussian state, as +1 or -1."""
    m = as_matrix(M)
    err = float(np.max(np.abs(m @ m + np.eye(m.shape[0])))) if m.size else 0.0
    if err > tol:
        raise ValueError(f"parity is a sign only for pure states (|M^2 + 1| = {err:.2e})")
    return 1 if pfaffian(m) > 0 else -1


def energy(M: CovarianceLike, A) -> float:
    """``<H>`` for ``H = (i/4) sum A_mn gamma_m gamma_n``, equal to ``tr(A M)/4``."""
    A = np.asarray(getattr(A, "matrix", A))
    return 0.25 * float(np.sum(A * as_matrix(M).T))


def vacuum(n_sites: int) -> MajoranaCovariance:
    m = np.zeros((2 * n_sites, 2 * n_sites))
    i = np.arange(n_sites)
    m[2 * i, 2 * i + 1] = 1.0
    m[2 * i + 1, 2 * i] = -1.0
    return MajoranaCovariance(m, check=False)


def random_gaussian_state(n_sites: int, rng=None, pure: bool = False) -> MajoranaCovariance:
    """Random Gaussian state ``O (+) lambda_j [[0,1],[-1,0]] O^T``."""
    from scipy.stats import special_ortho_group

    rng = np.random.default_rng(rng)
    n = 2 * n_sites
    O = special_ortho_group.rvs(n, random_state=rng) if n > 1 else np.eye(n)
    lam = np.ones(n_sites) if pure else rng.uniform(-1, 1, n_sites)
    core = np.zeros((n, n))
    i = np.arange(n_sites)
    core[2 * i, 2 * i + 1] = lam
    core[2 * i + 1, 2 * i] = -lam
    m = O @ core @ O.T
    return MajoranaCovariance(0.5 * (m - m.T), check=False)
