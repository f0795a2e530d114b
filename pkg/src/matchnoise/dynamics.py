"""Coherent and dissipative evolution of Majorana covariances.

A quadratic Hamiltonian ``H = (i/4) sum_mn A_mn gamma_m gamma_n`` rotates the
Majoranas as ``gamma(t) = exp(A t) gamma``, so ``M -> O M O^T`` with
``O = exp(A t)``.  Noise acts entrywise (see :mod:`matchnoise.channels`).
Combined dynamics are integrated by Strang splitting.

Periodic chains are not free after Jordan-Wigner; the boundary bond carries
the total parity.  The state is kept as a pair of unnormalized sector
covariances evolving under the even (antiperiodic) and odd (periodic) sector
Hamiltonians while parity-flipping noise moves weight between them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .channels import CONTINUOUS, DampingTable, NoiseModel, _pair_sum
from .gaussian import (
    PBC, TFIM,
    MajoranaCovariance, ModelParams, as_matrix, bogoliubov_angle, quasiparticle_occupation,
)

__all__ = [
    "OPEN", "PERIODIC_EVEN", "PERIODIC_ODD",
    "QuadraticGenerator",
    "quadratic_generator",
    "normal_modes",
    "ground_state_of",
    "mode_occupations",
    "propagator",
    "unitary_step",
    "evolve_master",
    "ParityResolvedState",
    "parity_mixing_step",
    "evolve_pbc",
    "CirculantParityState",
    "evolve_pbc_circulant",
    "finite_chain_occupations",
]

OPEN = "open"
PERIODIC_EVEN = "periodic_even"
PERIODIC_ODD = "periodic_odd"
_SECTORS = (OPEN, PERIODIC_EVEN, PERIODIC_ODD)
_DENSE_LIMIT = 600


@dataclass(frozen=True)
class QuadraticGenerator:
    """Real antisymmetric ``A`` of ``H = (i/4) sum A_mn gamma_m gamma_n``."""

    matrix: np.ndarray
    sector: str = OPEN

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0] // 2

    def hamiltonian_energy(self, M) -> float:
        return 0.25 * float(np.sum(self.matrix * as_matrix(M).T))


# Majorana expansion of fermion bilinears, c = (g_e + i g_o)/2, c^dag = (g_e - i g_o)/2.
# Entries are the coefficients of (g_{2i+mu} g_{2l+nu}) for (mu, nu) in
# ((0,0), (0,1), (1,0), (1,1)).
_CDAG_C = (0.25, 0.25j, -0.25j, 0.25)
_CDAG_CDAG = (0.25, -0.25j, -0.25j, -0.25)
_C_C = (0.25, 0.25j, 0.25j, -0.25)


def _add(K, i, l, coeffs, value):
    for (mu, nu), c in zip(((0, 0), (0, 1), (1, 0), (1, 1)), coeffs):
        K[2 * i + mu, 2 * l + nu] += value * c


def quadratic_generator(params: Optional[ModelParams] = None, sector: str = OPEN, *,
                        hopping: Optional[Sequence[complex]] = None,
                        pairing: Optional[Sequence[complex]] = None,
                        field: Optional[Sequence[float]] = None,
                        n_sites: Optional[int] = None) -> QuadraticGenerator:
    """Generator of ``sum_j J_j c_j^dag c_{j+1} + Jt_j c_j^dag c_{j+1}^dag + D_j c_j^dag c_j + h.c.``.

    Either pass ``params`` (TFIM: ``J_j = Jt_j = -J``, ``D_j = g``; XX: ``J_j = -J``)
    or raw coefficient lists.  Bond lists have ``N - 1`` entries for an open
    chain and ``N`` for a periodic one, the last being the bond from site
    ``N-1`` to site 0.  In the even sector that bond enters with a minus sign,
    in the odd sector with a plus sign.
    """
    sector = str(sector).lower()
    if sector not in _SECTORS:
        raise ValueError(f"unknown sector {sector!r}")
    if params is not None:
        if params.size is None:
            raise ValueError("a generator needs a finite chain")
        N = params.size
        nb = N - 1 if sector == OPEN else N
        hopping = np.full(nb, -params.J, dtype=complex)
        pairing = np.full(nb, -params.J if params.kind == TFIM else 0.0, dtype=complex)
        field = np.full(N, params.g if params.kind == TFIM else 0.0)
    else:
        if field is not None:
            N = len(field)
        elif n_sites is not None:
            N = int(n_sites)
        else:
            raise ValueError("cannot infer the number of sites")
        nb = N - 1 if sector == OPEN else N
        hopping = np.zeros(nb, complex) if hopping is None else np.asarray(hopping, dtype=complex)
        pairing = np.zeros(nb, complex) if pairing is None else np.asarray(pairing, dtype=complex)
        field = np.zeros(N) if field is None else np.asarray(field, dtype=float)
    if len(field) != N or len(hopping) != nb or len(pairing) != nb:
        raise ValueError(f"expected {N} fields and {nb} bonds for sector {sector!r}")

    K = np.zeros((2 * N, 2 * N), dtype=complex)
    for j in range(N):
        _add(K, j, j, _CDAG_C, 2.0 * field[j])
    for j in range(nb):
        l = (j + 1) % N
        sign = -1.0 if (sector == PERIODIC_EVEN and l == 0) else 1.0
        Jh, Jp = sign * hopping[j], sign * pairing[j]
        _add(K, j, l, _CDAG_C, Jh)
        _add(K, l, j, _CDAG_C, np.conj(Jh))
        _add(K, j, l, _CDAG_CDAG, Jp)
        _add(K, l, j, _C_C, np.conj(Jp))
    A = -2j * (K - K.T)
    if np.max(np.abs(A.imag)) > 1e-12:
        raise ValueError("coefficients do not define a Hermitian Hamiltonian")
    A = A.real
    A = 0.5 * (A - A.T)
    return QuadraticGenerator(A, sector)


def normal_modes(gen, select: Optional[Tuple[int, int]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Single-particle energies and an orthogonal ``O`` with
    ``O^T A O = (+) eps_j [[0, 1], [-1, 0]]``, ``eps_j >= 0`` ascending.

    Generators with only even-odd couplings (real Hamiltonians) reduce to the
    singular value decomposition of that ``N x N`` block.  Generators that
    couple only neighbouring Majoranas (open Ising chains) map to a real
    symmetric tridiagonal problem; ``select = (lo, hi)`` then returns just
    modes ``lo..hi-1`` and the matching ``2 (hi - lo)`` columns of ``O``.
    """
    A = np.asarray(getattr(gen, "matrix", gen), dtype=float)
    n = A.shape[0] // 2
    off = np.diagonal(A, 1)
    if n > 1 and not np.any(np.triu(A, 2)):
        lo, hi = select if select is not None else (0, n)
        lo, hi = max(0, lo), min(n, hi)
        return _tridiagonal_modes(off, n, lo, hi)
    O = np.zeros((2 * n, 2 * n))
    if not A[0::2, 0::2].any() and not A[1::2, 1::2].any():
        B = A[0::2, 1::2]
        U, s, Vt = scipy.linalg.svd(B)
        order = np.argsort(s, kind="stable")
        s, U, V = s[order], U[:, order], Vt.T[:, order]
        # A y = s x and A x = -s y for x = (u on even), y = (v on odd)
        O[0::2, 0::2] = U
        O[1::2, 1::2] = V
        return _select(s, O, select)
    w, vec = np.linalg.eigh(1j * A)
    pos = w[n:]
    vec = vec[:, n:]
    x = np.sqrt(2) * vec.real
    y = np.sqrt(2) * vec.imag
    # iA v = w v gives A x = w y and A y = -w x; basis (y, x) has A_{01} = +w
    O[:, 0::2] = y
    O[:, 1::2] = x
    order = np.argsort(pos, kind="stable")
    idx = np.empty(2 * n, dtype=int)
    idx[0::2] = 2 * order
    idx[1::2] = 2 * order + 1
    return _select(pos[order], O[:, idx], select)


def _select(eps, O, select):
    if select is None:
        return eps, O
    lo, hi = select
    return eps[lo:hi], O[:, 2 * lo: 2 * hi]


def _tridiagonal_modes(off: np.ndarray, n: int, lo: int, hi: int):
    # With D = diag(i^m), D^dag (iA) D is real symmetric tridiagonal with
    # off-diagonal -A_{m,m+1}; an eigenvector u gives v = D u for iA.
    w, u = scipy.linalg.eigh_tridiagonal(np.zeros(2 * n), -off, select="i",
                                         select_range=(n + lo, n + hi - 1))
    m = np.arange(2 * n)
    phase = 1j ** m
    v = phase[:, None] * u
    O = np.empty((2 * n, 2 * (hi - lo)))
    O[:, 0::2] = np.sqrt(2) * v.imag
    O[:, 1::2] = np.sqrt(2) * v.real
    return w, O


def ground_state_of(gen, modes=None) -> MajoranaCovariance:
    """Covariance of the lowest-energy state of a quadratic generator."""
    eps, O = modes if modes is not None else normal_modes(gen)
    n = len(eps)
    if np.any(eps < 1e-12):
        warnings.warn("generator has zero modes; the ground state is degenerate", RuntimeWarning)
    core = np.zeros((2 * n, 2 * n))
    i = np.arange(n)
    core[2 * i, 2 * i + 1] = 1.0
    core[2 * i + 1, 2 * i] = -1.0
    m = O @ core @ O.T
    return MajoranaCovariance(0.5 * (m - m.T), check=False)


def mode_occupations(M, gen=None, modes=None, select=None) -> Tuple[np.ndarray, np.ndarray]:
    """Energies and occupations ``n_j = (1 - (O^T M O)_{2j,2j+1})/2`` of normal modes.

    ``select`` (boolean mask or index array over modes) limits the work to a
    subset, e.g. the low-energy part of a large chain.
    """
    eps, O = modes if modes is not None else normal_modes(gen)
    idx = np.arange(len(eps)) if select is None else np.arange(len(eps))[select]
    m = as_matrix(M)
    a = O[:, 2 * idx]
    b = O[:, 2 * idx + 1]
    vals = np.einsum("ij,ij->j", a, m @ b)
    return eps[idx], 0.5 * (1.0 - vals)


# ---------------------------------------------------------------------------
# Propagators

def _prune(X, tol=1e-30):
    X = X.tocsr()
    X.data[np.abs(X.data) < tol] = 0.0
    X.eliminate_zeros()
    return X


def propagator(gen, dt: float, sparse: Optional[bool] = None):
    """``O = exp(A dt)``.

    Small generators use scaling-and-squaring with a Pade kernel.  Large ones
    are local, so ``O`` is banded; it is built by a truncated Taylor series of
    the scaled sparse generator followed by repeated squaring.
    """
    A = np.asarray(getattr(gen, "matrix", gen), dtype=float)
    n = A.shape[0]
    if sparse is None:
        sparse = n > _DENSE_LIMIT
    if not sparse:
        return scipy.linalg.expm(A * dt)
    B = sp.csr_matrix(A * dt)
    norm = abs(B).sum(axis=0).max() if B.nnz else 0.0
    s = max(0, int(math.ceil(math.log2(norm / 0.25)))) if norm > 0.25 else 0
    B = B / (2 ** s)
    O = sp.identity(n, format="csr")
    term = sp.identity(n, format="csr")
    for k in range(1, 60):
        term = _prune(term @ B / k)
        if term.nnz == 0 or abs(term).max() < 1e-20:
            break
        O = O + term
    O = _prune(O)
    for _ in range(s):
        O = _prune(O @ O)
    return O


def _congruence(O, M: np.ndarray) -> np.ndarray:
    """``O M O^T`` for antisymmetric ``M``."""
    if sp.issparse(O):
        T = O @ M
        # O M O^T = -(O (O M)^T) because M^T = -M
        out = O @ np.ascontiguousarray(T.T)
        np.negative(out, out=out)
        return out
    return O @ M @ O.T


def unitary_step(M, gen, dt: float, O=None) -> MajoranaCovariance:
    """Coherent evolution ``M -> O M O^T`` with ``O = exp(A dt)``."""
    if O is None:
        O = propagator(gen, dt)
    return MajoranaCovariance(_congruence(O, as_matrix(M)), check=False)


def _steps(t_total: float, dt: float) -> Tuple[int, float]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_total < 0:
        raise ValueError("t_total must be non-negative")
    n = max(1, int(math.ceil(t_total / dt - 1e-12))) if t_total > 0 else 0
    return n, (t_total / n if n else 0.0)


def evolve_master(M, gen, noise: NoiseModel, t_total: float, dt: float = 1e-2,
                  check_convergence: bool = False, tol: float = 1e-6) -> MajoranaCovariance:
    """Strang-split Hamiltonian plus Pauli-noise evolution.

    Each step applies half the noise, the full unitary rotation, then half the
    noise.  Consecutive half steps are merged.  With ``check_convergence`` the
    run is repeated at ``dt/2`` and a warning is issued if the results differ by
    more than ``tol``.
    """
    if noise.mode != CONTINUOUS:
        raise ValueError("evolve_master needs continuous noise")
    if getattr(gen, "sector", OPEN) != OPEN:
        raise ValueError("periodic chains are evolved with evolve_pbc")
    n, h = _steps(t_total, dt)
    m = as_matrix(M).copy()
    if n == 0:
        return MajoranaCovariance(m, check=False)
    O = propagator(gen, h)
    table = DampingTable(noise)
    size = m.shape[0]
    block = 512
    full = None
    if size * size * 8 <= 1 << 30:
        full = np.empty((size, size))
        for s0 in range(0, size, block):
            s1 = min(s0 + block, size)
            full[s0:s1] = np.exp(-h * table.rows(s0, s1))

    def damp(x, scale):
        for s0 in range(0, size, block):
            s1 = min(s0 + block, size)
            if scale == 1.0 and full is not None:
                x[s0:s1] *= full[s0:s1]
            else:
                x[s0:s1] *= np.exp(-scale * h * table.rows(s0, s1))

    damp(m, 0.5)
    for step in range(n):
        m = _congruence(O, m)
        damp(m, 1.0 if step < n - 1 else 0.5)
    out = MajoranaCovariance(m, check=False)
    if check_convergence:
        ref = evolve_master(M, gen, noise, t_total, h / 2)
        err = float(np.max(np.abs(ref.matrix - m)))
        if err > tol:
            warnings.warn(f"evolve_master: halving dt changed the result by {err:.2e}", RuntimeWarning)
    return out


# ---------------------------------------------------------------------------
# Parity-resolved evolution

@dataclass
class ParityResolvedState:
    """Unnormalized even/odd sector covariances and sector weights.

    ``gamma_plus = w_+ M_+`` where ``M_+`` is the normalized covariance of the
    even part of the state; the physical covariance is the sum.
    """

    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    w_plus: float = 1.0
    w_minus: float = 0.0

    @classmethod
    def from_state(cls, M, parity: int = 1) -> "ParityResolvedState":
        m = as_matrix(M).copy()
        z = np.zeros_like(m)
        return cls(m, z, 1.0, 0.0) if parity > 0 else cls(z, m, 0.0, 1.0)

    @classmethod
    def ground_state(cls, params: ModelParams) -> "ParityResolvedState":
        from .gaussian import build_ground_state
        return cls.from_state(build_ground_state(params), 1)

    def total(self) -> MajoranaCovariance:
        return MajoranaCovariance(self.gamma_plus + self.gamma_minus, check=False)

    def copy(self) -> "ParityResolvedState":
        return ParityResolvedState(self.gamma_plus.copy(), self.gamma_minus.copy(), self.w_plus, self.w_minus)


def _split_noise(noise: NoiseModel):
    """Parity-flipping (X, Y and odd strings) and parity-preserving parts."""
    ps = np.asarray(noise.per_site)
    flip = ps.copy()
    flip[:, 2] = 0.0
    keep = np.zeros_like(ps)
    keep[:, 2] = ps[:, 2]
    flip_x = tuple((s, v) for s, v in noise.extra_strings if s.flips_parity)
    keep_x = tuple((s, v) for s, v in noise.extra_strings if not s.flips_parity)
    return NoiseModel(noise.mode, flip, flip_x), NoiseModel(noise.mode, keep, keep_x)


def _mixing_factors(noise: NoiseModel, dt: float, rows: np.ndarray, cols: np.ndarray):
    """Multipliers of ``S = G+ + G-`` and ``D = G+ - G-`` for the given entries,
    and of the weight difference.

    Continuous noise: ``S`` decays with the usual rate ``R_f + R_z``; ``D`` with
    ``2K - R_f + R_z``, ``K`` being the summed Lindblad coefficients of the
    flipping terms.  Discrete noise: ``S`` takes the usual factor and ``D`` the
    product of ``1 - 2p`` over flipping terms that commute and preserving
    terms that anticommute.
    """
    flip, keep = _split_noise(noise)
    if noise.mode == CONTINUOUS:
        Rf = DampingTable(flip).values(rows, cols)
        Rz = DampingTable(keep).values(rows, cols)
        twoK = float(flip.per_site.sum()) + sum(v for _, v in flip.extra_strings)
        s_fac = np.exp(-(Rf + Rz) * dt)
        d_fac = np.exp(-(twoK - Rf + Rz) * dt)
        w_fac = math.exp(-twoK * dt)
        return s_fac, d_fac, w_fac
    tf, tk = DampingTable(flip), DampingTable(keep)
    s_fac = tf.values(rows, cols) * tk.values(rows, cols)
    # product of (1 - 2p) over all flipping terms divided by the anticommuting
    # ones, done with log/sign/zero bookkeeping to survive p = 1/2
    c = 1.0 - 2.0 * flip.per_site
    c_all = [c.ravel()] + [np.array([1 - 2 * v]) for _, v in flip.extra_strings]
    c_all = np.concatenate(c_all)
    log_all = np.log(np.abs(np.where(c_all == 0, 1.0, c_all))).sum()
    neg_all = int((c_all < 0).sum())
    zero_all = int((c_all == 0).sum())
    logf = _pair_sum(tf._log, rows, cols)
    negf = _pair_sum(tf._neg, rows, cols)
    zerof = _pair_sum(tf._zero, rows, cols)
    for par, p in tf._extra:
        anti = par[rows] != par[cols]
        cp = 1 - 2 * p
        logf = logf + np.where(anti & (cp != 0), np.log(abs(cp) if cp != 0 else 1.0), 0.0)
        negf = negf + np.where(anti & (cp < 0), 1.0, 0.0)
        zerof = zerof + np.where(anti & (cp == 0), 1.0, 0.0)
    zero_c = zero_all - np.rint(zerof)
    neg_c = neg_all - np.rint(negf)
    comm = np.where(zero_c > 0, 0.0, np.exp(log_all - logf) * np.where(neg_c % 2 == 1, -1.0, 1.0))
    d_fac = comm * tk.values(rows, cols)
    w_fac = 0.0 if zero_all else math.exp(log_all) * (-1.0 if neg_all % 2 else 1.0)
    return s_fac, d_fac, w_fac


def parity_mixing_step(state: ParityResolvedState, noise: NoiseModel, dt: float = 0.0,
                       inplace: bool = False) -> ParityResolvedState:
    """Apply Pauli noise to a parity-resolved state.

    Entry by entry the pair ``(G+, G-)`` is mixed by the 2x2 kernel of the
    parity-flipping terms; parity-preserving terms damp within each sector.
    For discrete noise ``dt`` is ignored.
    """
    out = state if inplace else state.copy()
    n = out.gamma_plus.shape[0]
    if 2 * noise.n_sites != n:
        raise ValueError("noise model and state sizes differ")
    block = 512
    w_fac = 1.0
    for s0 in range(0, n, block):
        s1 = min(s0 + block, n)
        rows = np.arange(s0, s1)[:, None]
        cols = np.arange(n)[None, :]
        s_fac, d_fac, w_fac = _mixing_factors(noise, dt, rows, cols)
        gp, gm = out.gamma_plus[s0:s1], out.gamma_minus[s0:s1]
        S = (gp + gm) * s_fac
        D = (gp - gm) * d_fac
        gp[...] = 0.5 * (S + D)
        gm[...] = 0.5 * (S - D)
    ws, wd = out.w_plus + out.w_minus, (out.w_plus - out.w_minus) * w_fac
    out.w_plus, out.w_minus = 0.5 * (ws + wd), 0.5 * (ws - wd)
    return out


def evolve_pbc(state: ParityResolvedState, params: ModelParams, noise: NoiseModel,
               t_total: float, dt: float = 1e-2) -> ParityResolvedState:
    """Strang interleave of sector-resolved rotations and parity mixing.

    The even part rotates under the antiperiodic (even-sector) generator and
    the odd part under the periodic one.
    """
    if params.boundary != PBC or params.size is None:
        raise ValueError("evolve_pbc needs a finite periodic chain")
    if noise.mode != CONTINUOUS:
        raise ValueError("evolve_pbc needs continuous noise")
    n, h = _steps(t_total, dt)
    out = state.copy()
    if n == 0:
        return out
    Op = propagator(quadratic_generator(params, PERIODIC_EVEN), h)
    Om = propagator(quadratic_generator(params, PERIODIC_ODD), h)
    parity_mixing_step(out, noise, h / 2, inplace=True)
    for step in range(n):
        out.gamma_plus = _congruence(Op, out.gamma_plus)
        out.gamma_minus = _congruence(Om, out.gamma_minus)
        parity_mixing_step(out, noise, h if step < n - 1 else h / 2, inplace=True)
    return out


# ---------------------------------------------------------------------------
# Translation-invariant fast path for uniform periodic chains.
#
# A uniform periodic chain with uniform noise stays translation invariant in
# spin language.  The even sector is then a twisted circulant,
# G+[2a+mu, 2b+nu] = -G+[2a+mu, 2(b+N)+nu], and the odd sector a plain
# circulant, so each is fixed by its first block row: r[mu, 2 Delta + nu]
# for Delta = 0..N-1.  Rotations are diagonal in momentum (2x2 blocks on the
# antiperiodic or periodic grid) and the noise acts on the rows directly.

_TWIST = {PERIODIC_EVEN: 0.5, PERIODIC_ODD: 0.0}


@dataclass
class CirculantParityState:
    """First block rows (shape ``(2, 2N)``) of both sector covariances."""

    row_plus: np.ndarray
    row_minus: np.ndarray
    w_plus: float = 1.0
    w_minus: float = 0.0

    @property
    def n_sites(self) -> int:
        return self.row_plus.shape[1] // 2

    @classmethod
    def ground_state(cls, params: ModelParams) -> "CirculantParityState":
        """Ground state built from momentum sums in O(N log N).

        The Ising ground state and the XX ground state with ``N/2`` even lie
        in the even sector (antiperiodic grid); the XX ground state with
        ``N/2`` odd lies in the odd sector.
        """
        N = params.size
        if params.boundary != PBC or N is None:
            raise ValueError("needs a finite periodic chain")
        j = np.arange(N)
        if params.kind == TFIM:
            phi = 0.5
            k = 2 * np.pi * (j + phi) / N
            th = bogoliubov_angle(k, params.g, params.J)
            occ = np.sin(th / 2) ** 2
            pair = -0.5j * np.sin(th)
        else:
            if N % 2:
                raise ValueError("the zero-magnetization sector needs an even number of sites")
            phi = 0.5 if (N // 2) % 2 == 0 else 0.0
            k = 2 * np.pi * (j + phi) / N
            k = np.where(k > np.pi, k - 2 * np.pi, k)
            occ = (np.abs(k) < np.pi / 2).astype(float)
            pair = np.zeros(N, dtype=complex)
        # X(a = 0, b = Delta) = (1/N) sum_k e^{-ik Delta} x_k
        phase = np.exp(-1j * np.pi * 2 * phi * j / N)
        G = phase * np.fft.fft(occ) / N
        F = phase * np.fft.fft(pair) / N
        row = _rows_from_correlators(G, F)
        if phi == 0.5:
            return cls(row, np.zeros_like(row), 1.0, 0.0)
        return cls(np.zeros_like(row), row, 0.0, 1.0)

    @classmethod
    def from_parity_resolved(cls, state: ParityResolvedState) -> "CirculantParityState":
        return cls(state.gamma_plus[:2].copy(), state.gamma_minus[:2].copy(), state.w_plus, state.w_minus)

    def copy(self) -> "CirculantParityState":
        return CirculantParityState(self.row_plus.copy(), self.row_minus.copy(), self.w_plus, self.w_minus)

    @staticmethod
    def _expand(row: np.ndarray, twist: float) -> np.ndarray:
        N = row.shape[1] // 2
        out = np.empty((2 * N, 2 * N))
        for a in range(N):
            shifted = np.roll(row, 2 * a, axis=1)
            if twist:
                shifted[:, : 2 * a] *= -1.0
            out[2 * a: 2 * a + 2] = shifted
        return out

    def to_parity_resolved(self) -> ParityResolvedState:
        return ParityResolvedState(self._expand(self.row_plus, 1.0), self._expand(self.row_minus, 0.0),
                                   self.w_plus, self.w_minus)

    def total(self) -> MajoranaCovariance:
        return self.to_parity_resolved().total()

    def chain_profiles(self):
        """Separation profiles of the total state in the finite-chain
        (``(1/N) sum_mn``) normalization, for :func:`quasiparticle_occupation`."""
        N = self.n_sites
        delta = np.arange(-(N - 1), N)          # Delta = b - a
        weight = (N - np.abs(delta)) / N
        prof = {}
        for name, (mu, nu) in {"ee": (0, 0), "eo": (0, 1), "oe": (1, 0), "oo": (1, 1)}.items():
            rp = self.row_plus[mu, nu::2]
            rm = self.row_minus[mu, nu::2]
            idx = np.mod(delta, N)
            x = rp[idx] * np.where(delta < 0, -1.0, 1.0) + rm[idx]
            # profile over d = a - b = -Delta
            prof[name] = (weight * x)[::-1]
        d = -delta[::-1]
        wd = weight[::-1]
        g = (0.5 * (d == 0) * wd - 0.25 * (prof["eo"] - prof["oe"])
             + 0.25j * (prof["ee"] + prof["oo"]))
        f = -0.25 * (prof["eo"] + prof["oe"]) + 0.25j * (prof["ee"] - prof["oo"])
        return d, g, f

    def occupations(self, params: ModelParams, k=None):
        """Quasiparticle occupations on the antiperiodic grid (or given ``k``)."""
        N = self.n_sites
        if k is None:
            k = 2 * np.pi * (np.arange(N) + 0.5) / N
            k = np.where(k > np.pi, k - 2 * np.pi, k)
            k = np.sort(k)
        return k, quasiparticle_occupation(None, k, params, profiles=self.chain_profiles())


def _rows_from_correlators(G: np.ndarray, F: np.ndarray) -> np.ndarray:
    """First block row of ``M`` from ``<c_0^dag c_Delta>`` and ``<c_0 c_Delta>``."""
    N = G.shape[0]
    delta = (np.arange(N) == 0)
    s_plus, s_minus = 4 * G.imag, 4 * F.imag
    d_minus, d_plus = -4 * (G.real - 0.5 * delta), -4 * F.real
    row = np.empty((2, 2 * N))
    row[0, 0::2] = 0.5 * (s_plus + s_minus)
    row[1, 1::2] = 0.5 * (s_plus - s_minus)
    row[0, 1::2] = 0.5 * (d_plus + d_minus)
    row[1, 0::2] = 0.5 * (d_plus - d_minus)
    row[0, 0] = row[1, 1] = 0.0
    return row


def _generator_row(params: ModelParams, sector: str) -> np.ndarray:
    """First block row of the (twisted) circulant generator.

    Bonds are nearest-neighbour, so the row of an ``N``-site chain equals that
    of a 4-site chain with the column of site 3 moved to site ``N - 1``.
    """
    N = params.size
    if N <= 4:
        return quadratic_generator(params, sector).matrix[:2].copy()
    small = quadratic_generator(ModelParams(params.kind, params.J, params.g, 4, PBC), sector).matrix[:2]
    row = np.zeros((2, 2 * N))
    row[:, :4] = small[:, :4]
    row[:, 2 * N - 2:] = small[:, 6:8]
    return row


def _circulant_symbol(params: ModelParams, sector: str) -> Tuple[np.ndarray, np.ndarray]:
    """Momentum grid and 2x2 blocks ``A(k)`` of a (twisted) circulant generator."""
    row = _generator_row(params, sector)
    N = params.size
    phi = _TWIST[sector]
    k = 2 * np.pi * (np.arange(N) + phi) / N
    sym = np.empty((N, 2, 2), dtype=complex)
    for mu in range(2):
        for nu in range(2):
            sym[:, mu, nu] = _twisted_fft(row[mu, nu::2], phi)
    return k, sym


def _twisted_fft(x: np.ndarray, phi: float) -> np.ndarray:
    N = x.shape[-1]
    return np.fft.fft(x * np.exp(-2j * np.pi * phi * np.arange(N) / N), axis=-1)


def _twisted_ifft(y: np.ndarray, phi: float) -> np.ndarray:
    N = y.shape[-1]
    return np.fft.ifft(y, axis=-1) * np.exp(2j * np.pi * phi * np.arange(N) / N)


def _rotate_rows(row: np.ndarray, Ok: np.ndarray, phi: float) -> np.ndarray:
    N = row.shape[1] // 2
    g = np.empty((N, 2, 2), dtype=complex)
    for mu in range(2):
        for nu in range(2):
            g[:, mu, nu] = _twisted_fft(row[mu, nu::2], phi)
    g = Ok @ g @ np.conj(np.transpose(Ok, (0, 2, 1)))
    out = np.empty_like(row)
    for mu in range(2):
        for nu in range(2):
            out[mu, nu::2] = _twisted_ifft(g[:, mu, nu], phi).real
    return out


def _expm_2x2(a: np.ndarray) -> np.ndarray:
    """Batched exponential of 2x2 matrices ``a`` (shape ``(n, 2, 2)``).

    With ``a = m I + B``, ``tr B = 0``: ``exp(a) = e^m (cosh(s) I + sinh(s)/s B)``,
    ``s^2 = -det B``.
    """
    m = 0.5 * (a[:, 0, 0] + a[:, 1, 1])
    B = a - m[:, None, None] * np.eye(2)
    s2 = -(B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0])
    s = np.sqrt(s2.astype(complex))
    small = np.abs(s) < 1e-8
    ch = np.cosh(s)
    sh = np.where(small, 1 + s2 / 6, np.sinh(s) / np.where(small, 1, s))
    return np.exp(m)[:, None, None] * (ch[:, None, None] * np.eye(2) + sh[:, None, None] * B)


def evolve_pbc_circulant(state: CirculantParityState, params: ModelParams, noise: NoiseModel,
                         t_total: float, dt: float = 1e-2) -> CirculantParityState:
    """Same Strang scheme as :func:`evolve_pbc` for uniform chains and noise, in
    O(N log N) per step."""
    if params.boundary != PBC or params.size is None:
        raise ValueError("needs a finite periodic chain")
    if noise.mode != CONTINUOUS or not noise.uniform:
        raise ValueError("the circulant path needs uniform continuous noise")
    N = state.n_sites
    if noise.n_sites != N:
        noise = noise.resized(N)
    n, h = _steps(t_total, dt)
    out = state.copy()
    if n == 0:
        return out
    blocks = {}
    for sec in (PERIODIC_EVEN, PERIODIC_ODD):
        _, sym = _circulant_symbol(params, sec)
        blocks[sec] = _expm_2x2(sym * h)
    rows = np.arange(2)[:, None]
    cols = np.arange(2 * N)[None, :]
    half = _mixing_factors(noise, h / 2, rows, cols)
    full = _mixing_factors(noise, h, rows, cols)

    def mix(fac):
        s_fac, d_fac, w_fac = fac
        S = (out.row_plus + out.row_minus) * s_fac
        D = (out.row_plus - out.row_minus) * d_fac
        out.row_plus, out.row_minus = 0.5 * (S + D), 0.5 * (S - D)
        ws, wd = out.w_plus + out.w_minus, (out.w_plus - out.w_minus) * w_fac
        out.w_plus, out.w_minus = 0.5 * (ws + wd), 0.5 * (ws - wd)

    mix(half)
    for step in range(n):
        out.row_plus = _rotate_rows(out.row_plus, blocks[PERIODIC_EVEN], _TWIST[PERIODIC_EVEN])
        out.row_minus = _rotate_rows(out.row_minus, blocks[PERIODIC_ODD], _TWIST[PERIODIC_ODD])
        mix(full if step < n - 1 else half)
    return out


# ---------------------------------------------------------------------------
# Finite-chain spectra

def finite_chain_occupations(params: ModelParams, gt: float, gamma: float = 1.0, dt: float = 1e-2,
                             n_modes: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Positive single-particle energies and occupations of a finite Ising chain
    started in its ground state and evolved under its Hamiltonian plus spin-flip
    noise (``NoiseModel.xy``) for ``t = gt/gamma``.

    Periodic chains use the circulant parity-resolved path and report the
    ``k > 0`` half of the antiperiodic grid; open chains report normal modes.
    ``n_modes`` keeps only the lowest modes (open chains skip the rest).
    """
    N = params.size
    if params.kind != TFIM or N is None:
        raise ValueError("needs a finite Ising chain")
    noise = NoiseModel.xy(N, gamma)
    t = gt / gamma
    if params.boundary == PBC:
        state = evolve_pbc_circulant(CirculantParityState.ground_state(params), params, noise, t, dt)
        k, n = state.occupations(params)
        pos = k > 0
        k, n = k[pos], n[pos]
        eps = 2 * np.sqrt((params.g - params.J * np.cos(k)) ** 2 + (params.J * np.sin(k)) ** 2)
        order = np.argsort(eps, kind="stable")
        eps, n = eps[order], n[order]
        if n_modes is not None:
            eps, n = eps[:n_modes], n[:n_modes]
        return eps, n
    gen = quadratic_generator(params, OPEN)
    M = evolve_master(ground_state_of(gen), gen, noise, t, dt)
    modes = normal_modes(gen, select=None if n_modes is None else (0, n_modes))
    return mode_occupations(M, modes=modes)
