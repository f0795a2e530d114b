"""Pauli noise acting on Majorana covariances.

A Pauli channel maps every Pauli string to itself times a state-independent
factor, and ``gamma_m gamma_n`` is a Pauli string under Jordan-Wigner.  The
covariance therefore transforms entrywise, ``M_mn -> f_mn M_mn``.

Discrete noise on site ``j`` applies ``sigma^a_j`` with probability ``p_a``; a
string that anticommutes with the term picks up ``1 - 2 p_a``.  Continuous
noise is described by decay rates: a string anticommuting with the term
``(j, a)`` of rate ``r`` decays as ``exp(-r t)``.  In Lindblad form this is
``sum (r/2) D[sigma^a_j]``.  Evolving for a time ``t`` equals the discrete
channel with ``p = (1 - exp(-r t))/2``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Tuple, Union

import numpy as np

from .gaussian import MajoranaCovariance, as_matrix

__all__ = [
    "PauliString",
    "NoiseModel",
    "DampingTable",
    "majorana_image",
    "damping_factor_discrete",
    "damping_rate_continuous",
    "damping_table",
    "apply_channel",
    "evolve_noise",
    "pauli_string_damping",
    "to_discrete",
]

DISCRETE = "discrete"
CONTINUOUS = "continuous"
_AXES = "XYZ"


class PauliString:
    """Pauli string stored as symplectic bit masks (phase ignored).

    ``PauliString("XIZ")`` reads one letter per site from site 0;
    ``PauliString("X0 Z3")`` or ``PauliString({0: "X", 3: "Z"})`` name sites.
    """

    __slots__ = ("x", "z")

    def __init__(self, ops: Union[str, Mapping[int, str], None] = None, x: int = 0, z: int = 0):
        self.x, self.z = int(x), int(z)
        if ops is None:
            return
        if isinstance(ops, str):
            ops = ops.strip()
            if re.fullmatch(r"[IXYZ]*", ops):
                items = enumerate(ops)
            else:
                items = []
                for tok in ops.replace(",", " ").split():
                    m = re.fullmatch(r"([IXYZ])(\d+)", tok)
                    if not m:
                        raise ValueError(f"cannot parse Pauli token {tok!r}")
                    items.append((int(m.group(2)), m.group(1)))
        else:
            items = ops.items()
        for site, axis in items:
            self._set(int(site), str(axis).upper())

    def _set(self, site: int, axis: str):
        if axis not in "IXYZ":
            raise ValueError(f"unknown Pauli axis {axis!r}")
        bit = 1 << site
        self.x &= ~bit
        self.z &= ~bit
        if axis in "XY":
            self.x |= bit
        if axis in "YZ":
            self.z |= bit

    def axis(self, site: int) -> str:
        xb, zb = (self.x >> site) & 1, (self.z >> site) & 1
        return "IZXY"[2 * xb + zb]

    @property
    def support(self) -> Tuple[int, ...]:
        mask, out, j = self.x | self.z, [], 0
        while mask:
            if mask & 1:
                out.append(j)
            mask >>= 1
            j += 1
        return tuple(out)

    @property
    def flips_parity(self) -> bool:
        """Odd number of X/Y factors: anticommutes with the fermion parity."""
        return bin(self.x).count("1") % 2 == 1

    def anticommutes(self, other: "PauliString") -> bool:
        return (bin(self.x & other.z).count("1") + bin(self.z & other.x).count("1")) % 2 == 1

    def __mul__(self, other: "PauliString") -> "PauliString":
        return PauliString(x=self.x ^ other.x, z=self.z ^ other.z)

    def __eq__(self, other):
        return isinstance(other, PauliString) and self.x == other.x and self.z == other.z

    def __hash__(self):
        return hash((self.x, self.z))

    def __repr__(self):
        return "PauliString(" + repr(" ".join(f"{self.axis(j)}{j}" for j in self.support)) + ")"

    def label(self) -> str:
        return " ".join(f"{self.axis(j)}{j}" for j in self.support)


def majorana_image(m: int) -> PauliString:
    """Pauli string (up to phase) of ``gamma_m``: ``Z`` on sites below, then ``X`` or ``Y``."""
    s, t = divmod(int(m), 2)
    below = (1 << s) - 1
    return PauliString(x=1 << s, z=below | (t << s))


@dataclass(frozen=True)
class NoiseModel:
    """Per-site Pauli noise plus optional correlated strings.

    Parameters
    ----------
    mode : {"discrete", "continuous"}
    per_site : array, shape (N, 3)
        ``(p_x, p_y, p_z)`` probabilities or ``(r_x, r_y, r_z)`` decay rates.
    extra_strings : tuple of (PauliString, float)
        Correlated terms with their probability or rate.
    """

    mode: str
    per_site: np.ndarray
    extra_strings: Tuple[Tuple[PauliString, float], ...] = ()

    def __post_init__(self):
        mode = str(self.mode).lower()
        if mode not in (DISCRETE, CONTINUOUS):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        arr = np.array(self.per_site, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("per_site must have shape (N, 3)")
        extras = tuple((s if isinstance(s, PauliString) else PauliString(s), float(v))
                       for s, v in self.extra_strings)
        values = np.concatenate([arr.ravel(), [v for _, v in extras]])
        if mode == DISCRETE and np.any((values < 0) | (values > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if mode == CONTINUOUS and np.any(values < 0):
            raise ValueError("rates must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "per_site", arr)
        object.__setattr__(self, "extra_strings", extras)

    # constructors -------------------------------------------------------
    @classmethod
    def discrete(cls, n_sites: int, px=0.0, py=0.0, pz=0.0, extra_strings=()):
        return cls(DISCRETE, _broadcast(n_sites, px, py, pz), extra_strings)

    @classmethod
    def continuous(cls, n_sites: int, rx=0.0, ry=0.0, rz=0.0, extra_strings=()):
        return cls(CONTINUOUS, _broadcast(n_sites, rx, ry, rz), extra_strings)

    @classmethod
    def xy(cls, n_sites: int, gamma: float):
        """Spin-flip noise at strength ``gamma``: fermion pair correlators at
        distance ``d`` decay as ``exp(-gamma d t)``."""
        return cls.continuous(n_sites, gamma / 2, gamma / 2, 0.0)

    @classmethod
    def xy_channel(cls, n_sites: int, p: float):
        return cls.discrete(n_sites, p, p, 0.0)

    @classmethod
    def z_dephasing(cls, n_sites: int, gamma: float):
        """Dephasing at strength ``gamma``: off-site ``<c^dag c>`` decays as ``exp(-gamma t)``."""
        return cls.continuous(n_sites, 0.0, 0.0, gamma / 2)

    # properties ---------------------------------------------------------
    @property
    def n_sites(self) -> int:
        return self.per_site.shape[0]

    @property
    def uniform(self) -> bool:
        return not self.extra_strings and bool(np.all(self.per_site == self.per_site[:1]))

    def resized(self, n_sites: int) -> "NoiseModel":
        """Same uniform noise on a chain of another length."""
        if not self.uniform:
            raise ValueError("only uniform noise can be resized")
        return NoiseModel(self.mode, np.repeat(self.per_site[:1], n_sites, axis=0))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "per_site": self.per_site.tolist(),
            "extra_strings": [[s.label(), v] for s, v in self.extra_strings],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseModel":
        return cls(d["mode"], d["per_site"], tuple((PauliString(s), v) for s, v in d.get("extra_strings", ())))


def _broadcast(n_sites, a, b, c) -> np.ndarray:
    cols = [np.broadcast_to(np.asarray(v, dtype=float), (n_sites,)) for v in (a, b, c)]
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# Anticommutation counting.
#
# For Majoranas m, n on sites a <= b with types t = index mod 2, the single-site
# terms anticommuting with gamma_m gamma_n are: X and Y on every site strictly
# between a and b; on site a the pair {X, Z} (t_m = 0) or {Y, Z} (t_m = 1); on
# site b the pair {Y, Z} (t_n = 0) or {X, Z} (t_n = 1).  On a common site the
# set is {X, Y}.

def _pair_sum(values: np.ndarray, m, n) -> np.ndarray:
    """Sum of per-site values over the terms anticommuting with ``gamma_m gamma_n``.

    ``values`` has shape (N, 3) with columns for X, Y, Z.
    """
    vx, vy, vz = values[:, 0], values[:, 1], values[:, 2]
    prefix = np.concatenate([[0.0], np.cumsum(vx + vy)])
    m, n = np.broadcast_arrays(np.asarray(m), np.asarray(n))
    lo = np.minimum(m, n)
    hi = np.maximum(m, n)
    a, ta = lo // 2, lo % 2
    b, tb = hi // 2, hi % 2
    inner = prefix[b] - prefix[np.minimum(a + 1, b)]
    lo_term = np.where(ta == 0, vx[a] + vz[a], vy[a] + vz[a])
    hi_term = np.where(tb == 0, vy[b] + vz[b], vx[b] + vz[b])
    out = np.where(a < b, inner + lo_term + hi_term, vx[a] + vy[a])
    return np.where(m == n, 0.0, out)


def _string_parities(string: PauliString, n_majorana: int) -> np.ndarray:
    """1 where ``string`` anticommutes with ``gamma_m``."""
    n_sites = n_majorana // 2
    flip = np.array([(string.x >> j) & 1 for j in range(n_sites)], dtype=np.int64)
    zbit = np.array([(string.z >> j) & 1 for j in range(n_sites)], dtype=np.int64)
    below = np.concatenate([[0], np.cumsum(flip)])[:n_sites]
    # gamma_{2s} has X at s: anticommutes with Z or Y there (z bit set);
    # gamma_{2s+1} has Y at s: anticommutes with X or Z (x xor z set).
    at_even = zbit
    at_odd = flip ^ zbit
    out = np.empty(n_majorana, dtype=np.int64)
    out[0::2] = (below + at_even) % 2
    out[1::2] = (below + at_odd) % 2
    return out


class DampingTable:
    """Entrywise damping of a covariance under a noise model.

    Factors (discrete mode) or rates (continuous mode) are produced on demand
    from O(N) prefix sums; :meth:`dense` materializes the full table.
    """

    def __init__(self, noise: NoiseModel):
        self.noise = noise
        ps = noise.per_site
        self.n_sites = ps.shape[0]
        if noise.mode == DISCRETE:
            c = 1.0 - 2.0 * ps
            self._log = np.log(np.where(c == 0, 1.0, np.abs(c)))
            self._neg = (c < 0).astype(float)
            self._zero = (c == 0).astype(float)
        else:
            self._rates = ps
        self._extra = [(_string_parities(s, 2 * self.n_sites), v) for s, v in noise.extra_strings]

    @property
    def mode(self) -> str:
        return self.noise.mode

    def values(self, m, n) -> np.ndarray:
        """Factor (discrete) or rate (continuous) for broadcast index arrays."""
        m = np.asarray(m)
        n = np.asarray(n)
        if self.mode == DISCRETE:
            logf = _pair_sum(self._log, m, n)
            neg = _pair_sum(self._neg, m, n)
            zero = _pair_sum(self._zero, m, n)
            out = np.where(zero > 0.5, 0.0, np.exp(logf) * np.where(np.rint(neg) % 2 == 1, -1.0, 1.0))
            for par, p in self._extra:
                out = out * np.where(par[m] != par[n], 1.0 - 2.0 * p, 1.0)
        else:
            out = _pair_sum(self._rates, m, n)
            for par, r in self._extra:
                out = out + np.where(par[m] != par[n], r, 0.0)
        return out

    def rows(self, start: int, stop: int) -> np.ndarray:
        cols = np.arange(2 * self.n_sites)
        return self.values(np.arange(start, stop)[:, None], cols[None, :])

    def dense(self) -> np.ndarray:
        return self.rows(0, 2 * self.n_sites)


def damping_table(noise: NoiseModel) -> DampingTable:
    return DampingTable(noise)


def damping_factor_discrete(noise: NoiseModel, m: int, n: int) -> float:
    """Factor ``f_mn`` multiplying ``M_mn`` under a discrete Pauli channel."""
    if noise.mode != DISCRETE:
        raise ValueError("damping_factor_discrete needs a discrete noise model")
    if m == n:
        raise ValueError("m and n must differ")
    return float(DampingTable(noise).values(m, n))


def damping_rate_continuous(noise: NoiseModel, m: int, n: int) -> float:
    """Decay rate of ``M_mn`` under continuous Pauli noise."""
    if noise.mode != CONTINUOUS:
        raise ValueError("damping_rate_continuous needs a continuous noise model")
    if m == n:
        raise ValueError("m and n must differ")
    return float(DampingTable(noise).values(m, n))


def _check_size(M: np.ndarray, noise: NoiseModel):
    if M.shape[0] != 2 * noise.n_sites:
        raise ValueError(f"noise model has {noise.n_sites} sites, covariance has {M.shape[0] // 2}")


def _entrywise(M, noise: NoiseModel, transform, inplace: bool, block: int = 512) -> MajoranaCovariance:
    m = as_matrix(M)
    _check_size(m, noise)
    out = m if inplace else m.copy()
    table = DampingTable(noise)
    for start in range(0, out.shape[0], block):
        stop = min(start + block, out.shape[0])
        out[start:stop] *= transform(table.rows(start, stop))
    if inplace and isinstance(M, MajoranaCovariance):
        return M
    return MajoranaCovariance(out, check=False)


def apply_channel(M, noise: NoiseModel, inplace: bool = False) -> MajoranaCovariance:
    """One application of a discrete Pauli channel, ``M_mn -> f_mn M_mn``."""
    if noise.mode != DISCRETE:
        raise ValueError("apply_channel needs a discrete noise model; use evolve_noise")
    return _entrywise(M, noise, lambda f: f, inplace)


def evolve_noise(M, noise: NoiseModel, t: float, inplace: bool = False) -> MajoranaCovariance:
    """Pure-noise evolution for time ``t``: ``M_mn -> exp(-r_mn t) M_mn``."""
    if noise.mode != CONTINUOUS:
        raise ValueError("evolve_noise needs a continuous noise model")
    if t < 0:
        raise ValueError("t must be non-negative")
    return _entrywise(M, noise, lambda r: np.exp(-r * t), inplace)


def to_discrete(noise: NoiseModel, t: float) -> NoiseModel:
    """Discrete channel equal to continuous evolution for time ``t``."""
    if noise.mode != CONTINUOUS:
        raise ValueError("already discrete")
    p = 0.5 * (1.0 - np.exp(-noise.per_site * t))
    extras = tuple((s, 0.5 * (1.0 - np.exp(-r * t))) for s, r in noise.extra_strings)
    return NoiseModel(DISCRETE, p, extras)


def pauli_string_damping(noise: NoiseModel, string) -> float:
    """Factor (discrete) or decay rate (continuous) of a Pauli-string expectation."""
    s = string if isinstance(string, PauliString) else PauliString(string)
    if not (s.x or s.z):
        raise ValueError("string must not be the identity")
    ps = noise.per_site
    discrete = noise.mode == DISCRETE
    total = 1.0 if discrete else 0.0
    for j in s.support:
        if j >= noise.n_sites:
            raise ValueError(f"string acts on site {j} outside the chain")
        ax = s.axis(j)
        for col, term in enumerate(_AXES):
            if term != ax:
                total = total * (1 - 2 * ps[j, col]) if discrete else total + ps[j, col]
    for e, v in noise.extra_strings:
        if e.anticommutes(s):
            total = total * (1 - 2 * v) if discrete else total + v
    return float(total)
