"""Feynman-Kac Monte Carlo estimation of partition functionals and energies.

The sampled quantity is Z_beta = <1|e^{-beta H}|1 x Omega> on the ordered
domain: paths start uniformly on D^{N,(p)}, are killed at the domain
boundary (bridge-corrected survival weights), and carry exp(S) with
S = S_el + S_eff,eps.  The estimate multiplies the sample mean by the
domain volume (2L)^N / (p! (N-p)!).

Randomness is organized per path block: block b draws start points from
generator key [seed, 2b] and Brownian increments from [seed, 2b + 1].
Results are therefore bit-identical for a fixed RunConfig regardless of
the worker count; threads only decide which core fills which block (the
heavy work is inside numpy, which releases the GIL).

The ratio variant estimates -(1/delta) log(Z_{beta+delta} / Z_beta),
which cancels the overlap prefactor at finite beta.  Both horizons are
evaluated on one extended path per sample (the [0, beta] restriction is
a prefix), so the two partition estimates are maximally coupled and the
log-ratio variance comes from a batch-means covariance, not independent
error bars.

Coupling sweeps exploit that S_eff is exactly linear in alpha (g_L =
sqrt(2) alpha / L enters every kernel once): the alpha = 1 action is
evaluated per path and scaled, which makes per-path monotonicity in
alpha exact rather than statistical and gives common random numbers
across the sweep for free.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .action import PotentialSpec, s_eff_decomposed, s_el
from .exact_diag import InvariantViolation
from .geometry import OrderedDomain, SpinSector, survival_log_weights, \
    uniform_ordered_points
from .kernels import CutoffSpec, ModelParams
from .paths import PathSample, RngStream, TimeGrid, sample_brownian

N_BATCHES = 32
PATH_BLOCK = 4096


@dataclass(frozen=True)
class RunConfig:
    """Complete, hashable description of one Monte Carlo run."""

    params: ModelParams
    sector: SpinSector
    grid: TimeGrid
    eps: float
    n_paths: int
    seed: int
    n_workers: int = 1
    variant: str = "ratio"
    delta: float | None = None
    pot: PotentialSpec | None = None
    cutoff: CutoffSpec | None = None
    path_block: int = PATH_BLOCK

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.n_workers < 1:
            raise ValueError(f"n_workers must be >= 1, got {self.n_workers}")
        if self.path_block < 1:
            raise ValueError("path_block must be >= 1")
        if self.variant not in ("plain", "ratio"):
            raise ValueError(f"variant must be 'plain' or 'ratio', got {self.variant!r}")
        if self.params.N != self.sector.N:
            raise ValueError(f"params.N = {self.params.N} != sector.N = {self.sector.N}")
        if abs(self.params.beta - self.grid.beta) > 1e-12:
            raise ValueError("params.beta and grid.beta disagree; keep one horizon")
        if self.variant == "ratio":
            d = self.delta_eff
            if d <= 0:
                raise ValueError(f"ratio variant needs delta > 0, got {d}")
            steps = d / self.grid.dt
            if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
                raise ValueError(
                    f"delta = {d} is not a whole number of grid steps (dt = {self.grid.dt})")

    @property
    def delta_eff(self) -> float:
        if self.delta is not None:
            return self.delta
        return self.grid.beta / 4

    @property
    def n_delta_steps(self) -> int:
        return int(round(self.delta_eff / self.grid.dt))

    @property
    def domain(self) -> OrderedDomain:
        return OrderedDomain(self.sector, self.params.L)


@dataclass(frozen=True)
class EnergyEstimate:
    value: float
    stderr: float
    n_effective: float
    config: RunConfig
    oracle_comparison: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.stderr >= 0 or np.isnan(self.stderr)):
            raise ValueError(f"stderr must be >= 0, got {self.stderr}")


def _block_ranges(n_paths: int, block: int):
    return [(b, lo, min(lo + block, n_paths))
            for b, lo in enumerate(range(0, n_paths, block))]


def _prefix(path: PathSample, n_steps: int, beta: float) -> PathSample:
    return PathSample(states=path.states[:, :n_steps + 1, :],
                      grid=TimeGrid(beta, n_steps), stream=path.stream)


def _simulate_block(config: RunConfig, block_idx: int, n_block: int,
                    extended: bool, unit_alpha: bool) -> dict:
    """Per-path log-survival, potential action, and unit-coupling S_eff.

    With `extended`, paths run to beta + delta and every quantity is also
    evaluated on the [0, beta] prefix.  S_eff is computed at alpha = 1
    (exact linearity) unless the config's alpha is already wanted.
    """
    domain = config.domain
    start_rng = np.random.default_rng([config.seed, 2 * block_idx])
    x0 = uniform_ordered_points(start_rng, n_block, domain)
    n_b = config.grid.n_steps
    if extended:
        grid = TimeGrid(config.grid.beta + config.delta_eff,
                        n_b + config.n_delta_steps)
    else:
        grid = config.grid
    path = sample_brownian(x0, grid, RngStream(config.seed, 2 * block_idx + 1))
    out = {"logs_full": survival_log_weights(path.states, domain, grid.dt)}
    if extended:
        out["logs_beta"] = survival_log_weights(
            path.states[:, :n_b + 1, :], domain, grid.dt)
    alpha = 1.0 if unit_alpha else config.params.alpha
    params = replace(config.params, alpha=alpha)
    if alpha == 0.0:
        zeros = np.zeros(n_block)
        out["s_eff_full"] = zeros
        out["s_el_full"] = s_el(path, config.pot)
        if extended:
            out["s_eff_beta"] = zeros
            out["s_el_beta"] = s_el(_prefix(path, n_b, config.grid.beta),
                                    config.pot)
        return out
    bd = s_eff_decomposed(path, config.eps, params, cutoff=config.cutoff,
                          pot=config.pot)
    out["s_eff_full"] = bd.s_eff
    out["s_el_full"] = bd.s_el
    if extended:
        bd_b = s_eff_decomposed(_prefix(path, n_b, config.grid.beta),
                                config.eps, params, cutoff=config.cutoff,
                                pot=config.pot)
        out["s_eff_beta"] = bd_b.s_eff
        out["s_el_beta"] = bd_b.s_el
    return out


def _collect(config: RunConfig, extended: bool, unit_alpha: bool = False) -> dict:
    """Run all blocks (threaded) and assemble per-path arrays in path order."""
    ranges = _block_ranges(config.n_paths, config.path_block)
    keys = ["logs_full", "s_eff_full", "s_el_full"]
    if extended:
        keys += ["logs_beta", "s_eff_beta", "s_el_beta"]
    arrays = {k: np.empty(config.n_paths) for k in keys}

    def run(task):
        block_idx, lo, hi = task
        res = _simulate_block(config, block_idx, hi - lo, extended, unit_alpha)
        for k in keys:
            arrays[k][lo:hi] = res[k]

    if config.n_workers == 1:
        for task in ranges:
            run(task)
    else:
        with ThreadPoolExecutor(max_workers=config.n_workers) as pool:
            list(pool.map(run, ranges))
    return arrays


def _weights(logs: np.ndarray, s_eff: np.ndarray, s_el: np.ndarray,
             alpha_scale: float | None = None) -> np.ndarray:
    s = s_eff if alpha_scale is None else alpha_scale * s_eff
    return np.exp(logs + s + s_el)


def _batch_means(per_path: np.ndarray) -> np.ndarray:
    n_batches = min(N_BATCHES, per_path.shape[-1])
    return np.array([chunk.mean(axis=-1)
                     for chunk in np.array_split(per_path, n_batches, axis=-1)]).T


def _mean_and_stderr(w: np.ndarray) -> tuple[float, float]:
    value = float(w.mean())
    means = _batch_means(w)
    if means.size < 2:
        return value, float("inf")
    return value, float(means.std(ddof=1) / np.sqrt(means.size))


def _n_effective(w: np.ndarray) -> float:
    total = w.sum()
    if total <= 0:
        return 0.0
    return float(total**2 / np.sum(w**2))


def partition_estimate(config: RunConfig) -> tuple[float, float]:
    """Volume-weighted survival average of e^S; stderr by 32 batch means.

    Zero survivors return (0.0, inf): a flagged estimate, not an error.
    """
    arrays = _collect(config, extended=False)
    w = _weights(arrays["logs_full"], arrays["s_eff_full"], arrays["s_el_full"])
    value, stderr = _mean_and_stderr(w)
    volume = config.domain.volume
    if value <= 0:
        return 0.0, float("inf")
    return volume * value, volume * stderr


def _log_ratio_stderr(w_num: np.ndarray, w_den: np.ndarray) -> float:
    """Delta-method stderr of log(mean(w_num)/mean(w_den)) on coupled paths."""
    means = np.stack([_batch_means(w_num), _batch_means(w_den)])
    n_batches = means.shape[-1]
    if n_batches < 2:
        return float("inf")
    cov = np.cov(means) / n_batches
    m_num, m_den = w_num.mean(), w_den.mean()
    grad = np.array([1 / m_num, -1 / m_den])
    var = float(grad @ cov @ grad)
    return float(np.sqrt(max(var, 0.0)))


def energy_estimate(config: RunConfig) -> EnergyEstimate:
    """-log Z_beta / beta (plain) or -(1/delta) log(Z_{beta+delta}/Z_beta)."""
    beta = config.grid.beta
    if config.variant == "plain":
        arrays = _collect(config, extended=False)
        w = _weights(arrays["logs_full"], arrays["s_eff_full"],
                     arrays["s_el_full"])
        z, se = _mean_and_stderr(w)
        volume = config.domain.volume
        diagnostics = {"z_value": volume * z, "z_stderr": volume * se,
                       "survival_fraction": float(np.mean(w > 0)),
                       "zero_survivors": bool(np.all(w == 0))}
        if z <= 0:
            return EnergyEstimate(float("inf"), float("inf"), 0.0, config,
                                  diagnostics=diagnostics)
        value = -np.log(volume * z) / beta
        stderr = se / (beta * z)
        return EnergyEstimate(float(value), float(stderr), _n_effective(w),
                              config, diagnostics=diagnostics)
    arrays = _collect(config, extended=True)
    w_beta = _weights(arrays["logs_beta"], arrays["s_eff_beta"],
                      arrays["s_el_beta"])
    w_full = _weights(arrays["logs_full"], arrays["s_eff_full"],
                      arrays["s_el_full"])
    delta = config.delta_eff
    diagnostics = {"survival_fraction": float(np.mean(w_beta > 0)),
                   "survival_fraction_extended": float(np.mean(w_full > 0)),
                   "zero_survivors": bool(np.all(w_full == 0))}
    if np.all(w_full == 0) or np.all(w_beta == 0):
        return EnergyEstimate(float("inf"), float("inf"), 0.0, config,
                              diagnostics=diagnostics)
    value = -np.log(w_full.mean() / w_beta.mean()) / delta
    stderr = _log_ratio_stderr(w_full, w_beta) / delta
    return EnergyEstimate(float(value), float(stderr), _n_effective(w_full),
                          config, diagnostics=diagnostics)


def _energy_from_weights(config: RunConfig, arrays: dict, alpha: float):
    """Energy + per-horizon weights for one alpha on shared unit-alpha arrays."""
    w_full = _weights(arrays["logs_full"], arrays["s_eff_full"],
                      arrays["s_el_full"], alpha_scale=alpha)
    if config.variant == "plain":
        if np.all(w_full == 0):
            return float("inf"), float("inf"), w_full, None
        z, se = _mean_and_stderr(w_full)
        volume = config.domain.volume
        value = -np.log(volume * z) / config.grid.beta
        stderr = se / (config.grid.beta * z)
        return float(value), float(stderr), w_full, None
    w_beta = _weights(arrays["logs_beta"], arrays["s_eff_beta"],
                      arrays["s_el_beta"], alpha_scale=alpha)
    if np.all(w_full == 0) or np.all(w_beta == 0):
        return float("inf"), float("inf"), w_full, w_beta
    delta = config.delta_eff
    value = -np.log(w_full.mean() / w_beta.mean()) / delta
    stderr = _log_ratio_stderr(w_full, w_beta) / delta
    return float(value), float(stderr), w_full, w_beta


def _paired_difference(config: RunConfig, lo_w, hi_w) -> tuple[float, float]:
    """E(hi) - E(lo) with the batch covariance of all shared weights."""
    if config.variant == "plain":
        w_lo, w_hi = lo_w[0], hi_w[0]
        diff = -np.log(w_hi.mean() / w_lo.mean()) / config.grid.beta
        stderr = _log_ratio_stderr(w_hi, w_lo) / config.grid.beta
        return float(diff), float(stderr)
    w_full_lo, w_beta_lo = lo_w
    w_full_hi, w_beta_hi = hi_w
    delta = config.delta_eff
    diff = (-np.log(w_full_hi.mean() / w_beta_hi.mean())
            + np.log(w_full_lo.mean() / w_beta_lo.mean())) / delta
    stacks = [w_full_hi, w_beta_hi, w_full_lo, w_beta_lo]
    means = np.stack([_batch_means(w) for w in stacks])
    if means.shape[-1] < 2:
        return float(diff), float("inf")
    cov = np.cov(means) / means.shape[-1]
    m = np.array([w.mean() for w in stacks])
    grad = np.array([-1 / m[0], 1 / m[1], 1 / m[2], -1 / m[3]]) / delta
    var = float(grad @ cov @ grad)
    return float(diff), float(np.sqrt(max(var, 0.0)))


def sweep_alpha(config: RunConfig, alphas) -> dict:
    """Common-random-number energy sweep over couplings.

    One set of paths and one unit-coupling action evaluation serve every
    alpha; per-path weights at different alphas are deterministic
    rescalings, so the paired differences in the report carry only the
    (small) variance of the shared sample, and per-path partition-weight
    monotonicity in alpha is exact.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("need at least one alpha")
    extended = config.variant == "ratio"
    arrays = _collect(config, extended=extended, unit_alpha=True)
    estimates = []
    weights = {}
    for a in alphas:
        cfg_a = replace(config, params=replace(config.params, alpha=a))
        value, stderr, w_full, w_beta = _energy_from_weights(config, arrays, a)
        weights[a] = (w_full, w_beta)
        diagnostics = {"survival_fraction": float(np.mean(w_full > 0)),
                       "zero_survivors": bool(np.all(w_full == 0))}
        estimates.append(EnergyEstimate(value, stderr, _n_effective(w_full),
                                        cfg_a, diagnostics=diagnostics))
    paired = []
    order = np.argsort(alphas)
    for i, j in zip(order[:-1], order[1:]):
        a_lo, a_hi = alphas[i], alphas[j]
        diff, stderr = _paired_difference(config, weights[a_lo], weights[a_hi])
        paired.append({"alpha_lo": a_lo, "alpha_hi": a_hi,
                       "difference": diff, "stderr": stderr})
    return {"estimates": estimates, "paired_differences": paired}


def ordering_check(config: RunConfig) -> dict:
    """N = 2 sector comparison: E(0) on D^{2,(1)} against E(1) on D^{2,(2)}.

    Uses one seed for both sectors (the Wiener increments are shared; only
    the start-point ordering differs).  Raises InvariantViolation when the
    symmetric sector fails to lie below the antisymmetric one beyond the
    combined 3 sigma.
    """
    if config.sector.N != 2:
        raise ValueError("ordering_check compares the two N = 2 sectors")
    report = {}
    for label, p in (("symmetric", 1), ("antisymmetric", 2)):
        cfg = replace(config, sector=SpinSector(2, p))
        est = energy_estimate(cfg)
        report[label] = est
    e0, e1 = report["symmetric"], report["antisymmetric"]
    sigma = float(np.hypot(e0.stderr, e1.stderr))
    report["difference"] = e1.value - e0.value
    report["combined_sigma"] = sigma
    report["survival_fractions"] = {
        1: e0.diagnostics["survival_fraction"],
        2: e1.diagnostics["survival_fraction"]}
    if not (e1.value - e0.value > 3 * sigma):
        raise InvariantViolation(
            "sector-ordering-mc",
            f"E(0) = {e0.value:.6f} +- {e0.stderr:.6f} not below "
            f"E(1) = {e1.value:.6f} +- {e1.stderr:.6f} beyond 3 sigma")
    return report
