"""Brute-force references: dense density matrices, sign-trajectory sampling,
and the Wick comparison for spin-spin correlators.

Nothing here uses the covariance machinery for the answer it produces.  Dense
states are built from explicit Pauli matrices with site 0 as the leftmost
tensor factor; Majoranas come from an explicit Jordan-Wigner construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

__all__ = [
    "MAX_SITES",
    "DenseState",
    "KrausChannel",
    "HamiltonianStep",
    "LindbladSegment",
    "pauli_matrix",
    "jw_majoranas",
    "spin_hamiltonian",
    "majorana_hamiltonian",
    "dense_channel_oracle",
    "TrajectoryEnsemble",
    "TrajectoryResult",
    "sample_sign_trajectories",
    "wick_comparator",
]

MAX_SITES = 8

_I2 = np.eye(2, dtype=complex)
_PAULI = {
    "I": _I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _check_sites(n: int):
    if not 1 <= n <= MAX_SITES:
        raise ValueError(f"dense backend supports 1..{MAX_SITES} sites, got {n}")


def pauli_matrix(n_sites: int, ops) -> np.ndarray:
    """Dense matrix of a Pauli string given as ``{site: axis}`` or a string like ``"XIZ"``."""
    _check_sites(n_sites)
    if isinstance(ops, str):
        ops = {j: a for j, a in enumerate(ops)}
    out = np.ones((1, 1), dtype=complex)
    for j in range(n_sites):
        out = np.kron(out, _PAULI[str(ops.get(j, "I")).upper()])
    return out


@lru_cache(maxsize=None)
def jw_majoranas(n_sites: int) -> Tuple[np.ndarray, ...]:
    """``gamma_{2j} = c_j + c_j^dag`` and ``gamma_{2j+1} = i(c_j^dag - c_j)`` with
    ``c_j = prod_{i<j}(-Z_i) sigma^-_j`` and spin up occupied."""
    _check_sites(n_sites)
    sm = np.array([[0, 0], [1, 0]], dtype=complex)   # |up><down|^dag: lowers up -> down
    out = []
    for j in range(n_sites):
        c = np.ones((1, 1), dtype=complex)
        for i in range(n_sites):
            f = -_PAULI["Z"] if i < j else (sm if i == j else _I2)
            c = np.kron(c, f)
        cd = c.conj().T
        out.append(c + cd)
        out.append(1j * (cd - c))
    for g in out:
        g.setflags(write=False)
    return tuple(out)


def spin_hamiltonian(kind: str, n_sites: int, J: float = 1.0, g: float = 1.0,
                     periodic: bool = False) -> np.ndarray:
    """``-J sum X X + g sum Z`` (TFIM) or ``-(J/2) sum (X X + Y Y)`` (XX) in the spin basis."""
    _check_sites(n_sites)
    dim = 2 ** n_sites
    H = np.zeros((dim, dim), dtype=complex)
    bonds = [(j, j + 1) for j in range(n_sites - 1)]
    if periodic and n_sites > 2:
        bonds.append((n_sites - 1, 0))
    kind = kind.lower()
    for a, b in bonds:
        if kind == "tfim":
            H -= J * pauli_matrix(n_sites, {a: "X", b: "X"})
        else:
            H -= 0.5 * J * (pauli_matrix(n_sites, {a: "X", b: "X"}) + pauli_matrix(n_sites, {a: "Y", b: "Y"}))
    if kind == "tfim":
        for j in range(n_sites):
            H += g * pauli_matrix(n_sites, {j: "Z"})
    return H


def majorana_hamiltonian(A) -> np.ndarray:
    """Dense ``H = (i/4) sum_mn A_mn gamma_m gamma_n``."""
    A = np.asarray(getattr(A, "matrix", A), dtype=float)
    n = A.shape[0] // 2
    gam = jw_majoranas(n)
    H = np.zeros_like(gam[0])
    for m in range(2 * n):
        for k in range(2 * n):
            if A[m, k] != 0:
                H += 0.25j * A[m, k] * (gam[m] @ gam[k])
    return 0.5 * (H + H.conj().T)


# ---------------------------------------------------------------------------
# Dense states

class DenseState:
    """Density matrix of at most :data:`MAX_SITES` spins."""

    def __init__(self, rho, check: bool = True):
        rho = np.asarray(rho, dtype=complex)
        n = int(round(math.log2(rho.shape[0])))
        if rho.shape != (2 ** n, 2 ** n):
            raise ValueError("density matrix must be 2^N x 2^N")
        _check_sites(n)
        if check:
            if abs(np.trace(rho) - 1) > 1e-12:
                raise ValueError("density matrix must have unit trace")
            if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
                raise ValueError("density matrix must be Hermitian")
            if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-10:
                raise ValueError("density matrix must be positive semidefinite")
        self.rho = rho
        self.n_sites = n

    @classmethod
    def pure(cls, psi) -> "DenseState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def ground_state(cls, H) -> "DenseState":
        w, v = np.linalg.eigh(H)
        if w[1] - w[0] < 1e-9:
            raise ValueError("ground state is degenerate")
        return cls.pure(v[:, 0])

    @classmethod
    def from_covariance(cls, M) -> "DenseState":
        """Gaussian state ``2^-N prod_j (1 - lambda_j i g'_{2j} g'_{2j+1})`` in the
        normal-mode Majoranas of ``M``."""
        M = np.asarray(getattr(M, "matrix", M), dtype=float)
        n = M.shape[0] // 2
        T, Z = scipy.linalg.schur(M, output="real")
        gam = jw_majoranas(n)
        rot = [sum(Z[m, a] * gam[m] for m in range(2 * n)) for a in range(2 * n)]
        rho = np.eye(2 ** n, dtype=complex)
        a = 0
        while a < 2 * n:
            if a + 1 < 2 * n and abs(T[a + 1, a]) > 1e-13:
                P = 1j * rot[a] @ rot[a + 1]
                rho = rho @ (np.eye(2 ** n) - T[a, a + 1] * P)
                a += 2
            else:
                a += 1          # zero eigenvalue, no factor
        return cls(rho / 2 ** n, check=False)

    def expectation(self, op) -> complex:
        return complex(np.trace(self.rho @ op))

    def pauli_expectation(self, ops) -> float:
        return float(self.expectation(pauli_matrix(self.n_sites, ops)).real)

    def covariance(self) -> np.ndarray:
        """``M_mn = Im <gamma_m gamma_n>`` for ``m != n``."""
        gam = jw_majoranas(self.n_sites)
        n = 2 * self.n_sites
        M = np.zeros((n, n))
        for m in range(n):
            gm = self.rho @ gam[m]
            for k in range(m + 1, n):
                # tr(rho g_m g_k) = sum_ij (rho g_m)_ij (g_k)_ji
                val = np.sum(gm * gam[k].T)
                M[m, k] = val.imag
                M[k, m] = -val.imag
        return M

    def parity_projected(self, parity: int) -> "DenseState":
        """Unnormalized ``P rho P`` with ``P = (1 + s Pi)/2``, ``Pi = prod (-Z)``."""
        Pi = np.ones(1)
        for j in range(self.n_sites):
            Pi = np.kron(Pi, np.array([-1.0, 1.0]))
        keep = Pi == parity
        out = self.rho * np.outer(keep, keep)
        return DenseState(out, check=False)


# ---------------------------------------------------------------------------
# Program items

@dataclass(frozen=True)
class KrausChannel:
    """Per-site and correlated Pauli flips; each term is its own channel
    ``rho -> (1 - p) rho + p P rho P``, applied in sequence."""

    terms: Tuple[Tuple[dict, float], ...]

    @classmethod
    def from_noise(cls, noise) -> "KrausChannel":
        terms = []
        for j, row in enumerate(np.asarray(noise.per_site)):
            for axis, p in zip("XYZ", row):
                if p:
                    terms.append(({j: axis}, float(p)))
        for s, p in noise.extra_strings:
            terms.append(({j: s.axis(j) for j in s.support}, float(p)))
        return cls(tuple(terms))


@dataclass(frozen=True)
class HamiltonianStep:
    """``rho -> U rho U^dag`` with ``U = exp(-i H dt)``."""

    H: np.ndarray
    dt: float


@dataclass(frozen=True)
class LindbladSegment:
    """``d rho/dt = -i[H, rho] + sum r/2 (P rho P - rho)`` over Pauli terms ``(P, r)``."""

    H: Optional[np.ndarray]
    terms: Tuple[Tuple[dict, float], ...]
    t: float

    @classmethod
    def from_noise(cls, H, noise, t: float) -> "LindbladSegment":
        return cls(H, KrausChannel.from_noise(noise).terms, float(t))


def _conjugate(rho: np.ndarray, ops: dict, n: int) -> np.ndarray:
    """``P rho P`` for a Pauli string ``P`` by tensor reshaping."""
    out = rho.reshape((2,) * (2 * n))
    for j, axis in ops.items():
        s = _PAULI[axis]
        out = np.tensordot(s, out, axes=([1], [j]))
        out = np.moveaxis(out, 0, j)
        out = np.tensordot(out, s, axes=([n + j], [0]))   # P^dag = P
        out = np.moveaxis(out, -1, n + j)
    return out.reshape(rho.shape)


def dense_channel_oracle(initial: Union[DenseState, np.ndarray], program: Iterable) -> DenseState:
    """Run a sequence of :class:`KrausChannel`, :class:`HamiltonianStep` and
    :class:`LindbladSegment` items on a dense state.

    Lindblad segments are integrated with an adaptive eighth-order
    Runge-Kutta method at relative tolerance 1e-10 (absolute 1e-12).
    """
    state = initial if isinstance(initial, DenseState) else DenseState(initial)
    rho = state.rho.copy()
    n = state.n_sites
    for item in program:
        if isinstance(item, KrausChannel):
            for ops, p in item.terms:
                rho = (1 - p) * rho + p * _conjugate(rho, ops, n)
        elif isinstance(item, HamiltonianStep):
            U = scipy.linalg.expm(-1j * np.asarray(item.H) * item.dt)
            rho = U @ rho @ U.conj().T
        elif isinstance(item, LindbladSegment):
            rho = _lindblad(rho, item, n)
        else:
            raise TypeError(f"unknown program item {item!r}")
    return DenseState(0.5 * (rho + rho.conj().T), check=False)


def _lindblad(rho: np.ndarray, seg: LindbladSegment, n: int) -> np.ndarray:
    if seg.t < 0:
        raise ValueError("segment duration must be non-negative")
    if seg.t == 0:
        return rho
    H = None if seg.H is None else np.asarray(seg.H, dtype=complex)
    dim = rho.shape[0]
    total = sum(r for _, r in seg.terms)

    def rhs(_, y):
        r = y.view(complex).reshape(dim, dim)
        out = -0.5 * total * r
        for ops, rate in seg.terms:
            out = out + 0.5 * rate * _conjugate(r, ops, n)
        if H is not None:
            out = out - 1j * (H @ r - r @ H)
        return out.reshape(-1).view(float)

    y0 = np.ascontiguousarray(rho).reshape(-1).view(float).copy()
    sol = solve_ivp(rhs, (0.0, seg.t), y0, method="DOP853", rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise RuntimeError(f"Lindblad integration failed: {sol.message}")
    return sol.y[:, -1].copy().view(complex).reshape(dim, dim)


# ---------------------------------------------------------------------------
# Sign trajectories

@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Random X and Y flips, each applied on every site with probability ``p``.

    Use :meth:`from_time` for the flip probability equivalent to spin-flip
    noise of strength ``gamma`` acting for a time ``t``.
    """

    base: np.ndarray
    p: float
    samples: int
    seed: int = 0
    batch: int = 1000

    @staticmethod
    def flip_probability(gamma_t: float) -> float:
        return 0.5 * (1.0 - math.exp(-0.5 * gamma_t))

    @classmethod
    def from_time(cls, base, gamma_t: float, samples: int, seed: int = 0) -> "TrajectoryEnsemble":
        return cls(np.asarray(getattr(base, "matrix", base), dtype=float),
                   cls.flip_probability(gamma_t), samples, seed)


@dataclass(frozen=True)
class TrajectoryResult:
    mean: np.ndarray
    stderr: np.ndarray
    samples: int


def _batch_signs(rng: np.random.Generator, count: int, n_sites: int, p: float) -> np.ndarray:
    """Majorana sign vectors for ``count`` random flip patterns.

    A Pauli ``P`` conjugates ``gamma_m`` to ``-gamma_m`` when they anticommute.
    ``gamma_{2s}`` carries Z on sites below ``s`` and X at ``s``;
    ``gamma_{2s+1}`` carries Y at ``s``.
    """
    fx = rng.random((count, n_sites)) < p
    fy = rng.random((count, n_sites)) < p
    xbit = fx ^ fy                     # X or Y present (up to phase)
    zbit = fy
    below = np.cumsum(xbit, axis=1) - xbit
    even = (below + zbit) % 2
    odd = (below + (xbit ^ zbit)) % 2
    par = np.empty((count, 2 * n_sites), dtype=np.int8)
    par[:, 0::2] = even
    par[:, 1::2] = odd
    return 1.0 - 2.0 * par


def sample_sign_trajectories(ens: TrajectoryEnsemble, workers: int = 1) -> TrajectoryResult:
    """Monte Carlo average of sign-conjugated covariances.

    Every batch of samples draws from its own counter-based generator keyed by
    ``(seed, batch index)``, so the result does not depend on how batches are
    distributed over workers.
    """
    if ens.samples < 1:
        raise ValueError("need at least one sample")
    base = np.asarray(ens.base, dtype=float)
    n_sites = base.shape[0] // 2
    starts = list(range(0, ens.samples, ens.batch))

    def run(b):
        count = min(ens.batch, ens.samples - starts[b])
        rng = np.random.Generator(np.random.Philox(key=[ens.seed, b]))
        s = _batch_signs(rng, count, n_sites, ens.p)
        return s.T @ s

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(len(starts))))
    else:
        parts = [run(b) for b in range(len(starts))]
    corr = sum(parts) / ens.samples
    mean = corr * base
    n = ens.samples
    var = np.clip(1.0 - corr ** 2, 0.0, None) * n / max(n - 1, 1)
    stderr = np.abs(base) * np.sqrt(var / n)
    return TrajectoryResult(mean, stderr, n)


# ---------------------------------------------------------------------------
# Wick comparison

def _connected_zz(M: np.ndarray, m: int, n: int) -> float:
    a, b, c, d = 2 * m, 2 * m + 1, 2 * n, 2 * n + 1
    return -M[a, c] * M[b, d] + M[a, d] * M[b, c]


def wick_comparator(m: int, n: int, gamma_t: float, n_sites: int = 6, J: float = 1.0,
                    gamma: float = 1.0, initial: Optional[DenseState] = None):
    """Exact and Wick-predicted decay exponents of ``<<Z_m Z_n>>``.

    The critical open-chain Ising ground state (dense) is evolved under pure
    spin-flip noise of strength ``gamma`` (rates ``gamma/2`` per X and Y term)
    for ``t = gamma_t / gamma``.  The exact connected correlator comes from the
    dense state; the Wick value is built from its two-point functions.  Returns
    ``(exact, wick)`` exponents ``-log(C(t)/C(0)) / t``.
    """
    t = gamma_t / gamma
    if initial is None:
        initial = DenseState.ground_state(spin_hamiltonian("tfim", n_sites, J, J))
    N = initial.n_sites
    if t == 0:
        return 0.0, 0.0
    terms = tuple(({j: ax}, gamma / 2) for j in range(N) for ax in "XY")
    final = dense_channel_oracle(initial, [LindbladSegment(None, terms, t)])

    def exact(state):
        if m == n:
            z = state.pauli_expectation({m: "Z"})
            return 1.0 - z * z
        zz = state.pauli_expectation({m: "Z", n: "Z"})
        return zz - state.pauli_expectation({m: "Z"}) * state.pauli_expectation({n: "Z"})

    def wick(state):
        if m == n:
            return 1.0 - state.covariance()[2 * m, 2 * m + 1] ** 2
        return _connected_zz(state.covariance(), m, n)

    e = -math.log(exact(final) / exact(initial)) / t
    w = -math.log(wick(final) / wick(initial)) / t
    return e, w
