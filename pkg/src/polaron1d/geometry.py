"""Spin sectors, ordered reference domains, and path-exit detection.

A sector with N electrons and S^3 eigenvalue M is labeled by the integer
p = N/2 - M, the number of down spins.  Its reference domain is

    D^{N,(p)} = { x in (-L, L)^N : x_1 < ... < x_p,  x_{p+1} < ... < x_N },

with each chain constraint vacuous when the chain has fewer than two
coordinates.  Ordering is strict: coincidences count as exits, since the
block-antisymmetric wavefunction vanishes there.

Path states are time-major arrays of shape (n_steps+1, N), or batched
(n_paths, n_steps+1, N); the helpers below accept both.

Survival between grid points is refined by the Brownian-bridge crossing
probability.  For a linear constraint with signed distances d1, d2 at
consecutive grid points (same side), a unit-diffusion bridge crosses with
probability exp(-2 d1 d2 / dt), so each step contributes a factor
(1 - exp(-2 d1 d2 / dt)) per constraint.  Walls x_i = +-L use coordinate
distances; adjacent-order planes x_i = x_{i+1} use the Euclidean distance
(x_{i+1} - x_i)/sqrt(2), which accounts for the plane's normal seeing the
difference of two independent Brownian coordinates.  Constraints are
applied independently (product form); corner correlations are a
second-order-in-dt bias we accept.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


def allowed_spins(N: int):
    """Admissible |total spin| values {N/2, N/2 - 1, ..., 1/2 or 0}."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return {Fraction(N, 2) - j for j in range(N // 2 + 1)}


@dataclass(frozen=True)
class SpinSector:
    """Sector labels: electron count N and down-spin count p (M = N/2 - p)."""

    N: int
    p: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if not 0 <= self.p <= self.N:
            raise ValueError(f"p must lie in 0..{self.N}, got {self.p}")

    @classmethod
    def from_M(cls, N: int, M) -> "SpinSector":
        p = Fraction(N, 2) - Fraction(M)
        if p.denominator != 1:
            raise ValueError(f"M={M} is not an S^3 eigenvalue for N={N}")
        return cls(N, int(p))

    @property
    def M(self) -> Fraction:
        return Fraction(self.N, 2) - self.p

    @property
    def block_sizes(self) -> tuple[int, int]:
        return self.p, self.N - self.p


@dataclass(frozen=True)
class OrderedDomain:
    """The ordered reference domain D^{N,(p)} inside the box (-L, L)^N."""

    sector: SpinSector
    L: float = 1.0

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError(f"L must be > 0, got {self.L}")

    @property
    def N(self) -> int:
        return self.sector.N

    @property
    def p(self) -> int:
        return self.sector.p

    @property
    def volume(self) -> float:
        """Lebesgue volume (2L)^N / (p! (N-p)!)."""
        from math import factorial

        p, q = self.sector.block_sizes
        return (2 * self.L) ** self.N / (factorial(p) * factorial(q))


def _check_dim(x: np.ndarray, N: int):
    if x.shape[-1] != N:
        raise ValueError(f"state dimension {x.shape[-1]} != N = {N}")


def contains(domain: OrderedDomain, x) -> np.ndarray | bool:
    """Strict membership of points x (shape (..., N)) in the ordered domain."""
    x = np.asarray(x, dtype=float)
    _check_dim(x, domain.N)
    p = domain.p
    ok = np.all(np.abs(x) < domain.L, axis=-1)
    if p >= 2:
        ok &= np.all(np.diff(x[..., :p], axis=-1) > 0, axis=-1)
    if domain.N - p >= 2:
        ok &= np.all(np.diff(x[..., p:], axis=-1) > 0, axis=-1)
    if ok.ndim == 0:
        return bool(ok)
    return ok


def first_exit(states, domain: OrderedDomain):
    """Smallest grid index whose state leaves the domain, or None.

    states has shape (n_steps+1, N) for a single path.
    """
    inside = contains(domain, np.asarray(states, dtype=float))
    bad = np.flatnonzero(~np.atleast_1d(inside))
    return int(bad[0]) if bad.size else None


def _constraint_distances(states: np.ndarray, domain: OrderedDomain) -> np.ndarray:
    """Signed distances to all active constraints, shape (..., n_constraints).

    Positive inside the domain.  Walls contribute 2N entries, the order
    chains p-1 and N-p-1 entries (Euclidean plane distances).
    """
    L, p, N = domain.L, domain.p, domain.N
    parts = [L - states, states + L]
    if p >= 2:
        parts.append(np.diff(states[..., :p], axis=-1) / np.sqrt(2.0))
    if N - p >= 2:
        parts.append(np.diff(states[..., p:], axis=-1) / np.sqrt(2.0))
    return np.concatenate(parts, axis=-1)


def survival_log_weights(states, domain: OrderedDomain, dt: float) -> np.ndarray:
    """log of the bridge-corrected survival weight, -inf where absorbed.

    states: (..., n_steps+1, N).  Returns shape (...).
    """
    states = np.asarray(states, dtype=float)
    _check_dim(states, domain.N)
    d = _constraint_distances(states, domain)
    alive = np.all(d > 0, axis=(-1, -2))
    # exponent of the bridge crossing probability per step and constraint
    expo = 2.0 * d[..., :-1, :] * d[..., 1:, :] / dt
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = np.where(alive[..., None, None], np.log1p(-np.exp(-expo)), -np.inf)
        out = np.sum(logw, axis=(-1, -2))
    return np.where(alive, out, -np.inf)


def survival_weight(states, domain: OrderedDomain, dt: float) -> float:
    """Bridge-corrected survival weight in [0, 1] for a single path."""
    logw = survival_log_weights(np.asarray(states, dtype=float), domain, dt)
    return float(np.exp(logw))


def uniform_ordered_points(rng: np.random.Generator, n: int, domain: OrderedDomain) -> np.ndarray:
    """n uniform samples on D^{N,(p)}: uniforms on the box, each block sorted."""
    x = rng.uniform(-domain.L, domain.L, size=(n, domain.N))
    p = domain.p
    x[:, :p] = np.sort(x[:, :p], axis=1)
    x[:, p:] = np.sort(x[:, p:], axis=1)
    return x
