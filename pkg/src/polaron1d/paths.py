"""Brownian path sampling, Ito sums, Girsanov weights.

Unit-diffusion paths (generator -(1/2) d^2/dx^2 per coordinate): increments
over a step of size dt are N(0, dt).  States are stored time-major,
(n_steps+1, N) per path, batched as (n_paths, n_steps+1, N).  Increments
are kept alongside states with states[j+1] - states[j] = increments[j]
holding exactly (increments are computed from states by difference after
the cumulative sum, so the identity is exact in floating point).

Stochastic integrals use the left-endpoint (Ito) convention throughout;
the retarded action's stochastic term is an Ito integral and no other
convention appears.

Reproducibility: every sampler takes an RngStream (master seed plus
stream index) and spawns numpy's PCG64 via default_rng([seed, index]),
so a path batch depends only on (seed, index, grid, x0) and never on
worker scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    beta: float
    n_steps: int

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.beta / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng([self.master_seed, self.stream_index])


@dataclass(frozen=True)
class PathSample:
    """A batch of discretized Brownian paths on a common time grid."""

    states: np.ndarray  # (n_paths, n_steps+1, N)
    grid: TimeGrid
    stream: RngStream | None = None

    def __post_init__(self):
        if self.states.ndim != 3:
            raise ValueError("states must have shape (n_paths, n_steps+1, N)")
        if self.states.shape[1] != self.grid.n_steps + 1:
            raise ValueError("states length does not match grid")

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def N(self) -> int:
        return self.states.shape[2]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.states, axis=1)


def sample_brownian(x0, grid: TimeGrid, stream: RngStream) -> PathSample:
    """Paths started at x0 (shape (n_paths, N) or (N,) broadcast to one path)."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    n_paths, N = x0.shape
    rng = stream.generator()
    dw = rng.normal(0.0, np.sqrt(grid.dt), size=(n_paths, grid.n_steps, N))
    states = np.empty((n_paths, grid.n_steps + 1, N))
    states[:, 0] = x0
    np.cumsum(dw, axis=1, out=states[:, 1:])
    states[:, 1:] += x0[:, None, :]
    return PathSample(states=states, grid=grid, stream=stream)


def refine_midpoint(path: PathSample, stream: RngStream) -> PathSample:
    """Coupled dt/2 refinement: Brownian-bridge midpoints between grid points.

    Endpoint values are reused unchanged, so x_beta is identical and
    dt -> 0 studies run on the same underlying Wiener path.
    """
    states = path.states
    n_paths, n_nodes, N = states.shape
    n_steps = n_nodes - 1
    half_dt = path.grid.dt / 2
    rng = stream.generator()
    mid = 0.5 * (states[:, :-1] + states[:, 1:])
    mid = mid + rng.normal(0.0, np.sqrt(half_dt / 2), size=(n_paths, n_steps, N))
    out = np.empty((n_paths, 2 * n_steps + 1, N))
    out[:, 0::2] = states
    out[:, 1::2] = mid
    grid = TimeGrid(path.grid.beta, 2 * n_steps)
    return PathSample(states=out, grid=grid, stream=path.stream)


def ito_integral(integrand, path: PathSample, coordinate: int | None = None):
    """Left-endpoint stochastic sum sum_j f_j (x_{j+1} - x_j).

    integrand: per-step values, shape (n_paths, n_steps) with a single
    coordinate selected, or (n_paths, n_steps, N) summed over coordinates
    when coordinate is None.
    """
    f = np.asarray(integrand, dtype=float)
    inc = path.increments
    if coordinate is not None:
        inc = inc[..., coordinate]
    if f.shape != inc.shape:
        raise ValueError(f"integrand shape {f.shape} != increments shape {inc.shape}")
    if f.ndim == 3:
        return np.sum(f * inc, axis=(1, 2))
    return np.sum(f * inc, axis=1)


def girsanov_log_weight(drift, path: PathSample) -> np.ndarray:
    """log of exp(sum Phi . dx - (1/2) sum |Phi|^2 dt) per path.

    drift: values at left endpoints, shape (n_paths, n_steps, N).
    """
    phi = np.asarray(drift, dtype=float)
    inc = path.increments
    if phi.shape != inc.shape:
        raise ValueError(f"drift shape {phi.shape} != increments shape {inc.shape}")
    dt = path.grid.dt
    return np.sum(phi * inc, axis=(1, 2)) - 0.5 * dt * np.sum(phi**2, axis=(1, 2))


def girsanov_weight(drift, path: PathSample) -> np.ndarray:
    return np.exp(girsanov_log_weight(drift, path))
