"""Deterministic parallel Monte Carlo estimation and the lambda-convergence experiment.

Replicates are grouped in fixed-size blocks; block ``j`` draws from
``RngStream(seed, j, domain)``. Blocks are evaluated by a thread pool (the
numba kernels release the GIL) and their moment accumulators are merged in
block order, so every estimate is bitwise independent of the worker count.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numba import njit

from .bounds import telegraph_mgf, total_error_bound_sym
from .core_model import ModelParams, SimVariant, asian_call_spec
from .functionals import exp_avg_kernel
from .path_samplers import draw_reversals, position_kernel
from .rng import (
    DOMAIN_BROWNIAN,
    DOMAIN_GENERIC,
    DOMAIN_MGF,
    DOMAIN_TELEGRAPH,
    RngStream,
)

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 1 << 14
THREADS_ENV = "TELEGRAPH_THREADS"

# second-level keys inside DOMAIN_BROWNIAN
_PER_CELL = 0
_SHARED = 1


# --------------------------------------------------------------------------
# streaming moments


@njit(cache=True, nogil=True)
def _welford(values):
    n = 0
    mean = 0.0
    m2 = 0.0
    for x in values:
        n += 1
        delta = x - mean
        mean += delta / n
        m2 += delta * (x - mean)
    return n, mean, m2


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n: int


@dataclass
class MomentAccumulator:
    """Single-pass mean/variance accumulator (Welford) with Chan's merge."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def push_many(self, values: np.ndarray) -> None:
        n, mean, m2 = _welford(np.ascontiguousarray(values, dtype=np.float64))
        self.merge(MomentAccumulator(int(n), float(mean), float(m2)))

    def merge(self, other: "MomentAccumulator") -> None:
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / n
        self.m2 += other.m2 + delta * delta * self.n * other.n / n
        self.n = n

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    def estimate(self) -> MCEstimate:
        se = math.sqrt(self.variance / self.n) if self.n > 1 else 0.0
        return MCEstimate(self.mean, se, self.n)


# --------------------------------------------------------------------------
# block engine


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get(THREADS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def _check_finite(values: np.ndarray, offset: int) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise FloatingPointError(f"non-finite sample value at replicate {offset + row}")


def estimate_blocks(
    block_fn: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    stream: RngStream,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int | None = None,
) -> MCEstimate | list[MCEstimate]:
    """Estimate the mean of ``block_fn`` outputs over ``n`` replicates.

    ``block_fn(gen, m)`` returns ``m`` values, or an ``(m, q)`` array of ``q``
    observables on the same replicates, in which case a list of ``q``
    estimates is returned.
    """
    if n < 2:
        raise ValueError("need at least two replicates")
    n_blocks = -(-n // block_size)

    def run(j: int) -> list[MomentAccumulator]:
        start = j * block_size
        m = min(block_size, n - start)
        vals = np.asarray(block_fn(stream.substream(j).generator(), m), dtype=np.float64)
        _check_finite(vals, start)
        cols = vals.reshape(m, -1)
        accs = []
        for c in range(cols.shape[1]):
            acc = MomentAccumulator()
            acc.push_many(cols[:, c])
            accs.append(acc)
        return accs

    n_workers = min(resolve_workers(workers), n_blocks)
    if n_workers == 1:
        parts = [run(j) for j in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    totals = [MomentAccumulator() for _ in parts[0]]
    for part in parts:
        for total, acc in zip(totals, part):
            total.merge(acc)
    estimates = [t.estimate() for t in totals]
    return estimates if len(estimates) > 1 else estimates[0]


def mc_estimate(
    task: Callable[[np.random.Generator], float],
    n: int,
    seed: int,
    workers: int | None = None,
    domain: tuple[int, ...] = (DOMAIN_GENERIC,),
) -> MCEstimate:
    """Mean and standard error of ``task`` over ``n`` replicates.

    Replicate ``i`` receives the generator of ``RngStream(seed, i, domain)``.
    """
    if n < 2:
        raise ValueError("need at least two replicates")
    base = RngStream(seed, 0, domain)
    chunk = 1024

    def run(j: int) -> MomentAccumulator:
        acc = MomentAccumulator()
        for i in range(j * chunk, min(n, (j + 1) * chunk)):
            x = float(task(base.substream(i).generator()))
            if not math.isfinite(x):
                raise FloatingPointError(f"non-finite sample value at replicate {i}")
            acc.push(x)
        return acc

    n_chunks = -(-n // chunk)
    n_workers = min(resolve_workers(workers), n_chunks)
    if n_workers == 1:
        parts = [run(j) for j in range(n_chunks)]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    total = MomentAccumulator()
    for acc in parts:
        total.merge(acc)
    return total.estimate()


# --------------------------------------------------------------------------
# batched kernels


@njit(cache=True, nogil=True)
def telegraph_exp_avg_block(rng, m, lam, T, collated, pin, slope, b):
    """Exponential time averages on ``m`` exact paths; NaN marks an overflow."""
    out = np.empty(m)
    for k in range(m):
        sign, times = draw_reversals(rng, lam, T, collated)
        if pin:
            sign = 1
        val = exp_avg_kernel(times, sign, slope, b, T)
        out[k] = val if val >= 0.0 else np.nan
    return out


@njit(cache=True, nogil=True)
def telegraph_position_block(rng, m, lam, T, collated, pin, v):
    """Terminal positions ``X(T)`` of ``m`` exact paths."""
    out = np.empty(m)
    for k in range(m):
        sign, times = draw_reversals(rng, lam, T, collated)
        if pin:
            sign = 1
        out[k] = position_kernel(times, sign, v, T)
    return out


@njit(cache=True, nogil=True)
def bm_exp_avg_block(rng, m, n_steps, T, sigma2, drift, a, b):
    """Left-endpoint Riemann averages of ``exp(a x + b t)`` over ``m`` Brownian grid paths.

    Consumes the same normals, in the same order, as ``sample_bm_grid``.
    """
    dt = T / n_steps
    scale = math.sqrt(sigma2 * dt)
    out = np.empty(m)
    for k in range(m):
        x = 0.0
        acc = 0.0
        for i in range(n_steps):
            acc += math.exp(a * x + b * (i * dt))
            x += drift * dt + scale * rng.standard_normal()
        out[k] = acc * dt / T
    return out


# --------------------------------------------------------------------------
# experiment


def default_lambda_grid() -> tuple[float, ...]:
    return tuple(2.5 * k for k in range(1, 41))


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameter block of the lambda-convergence experiment.

    Per cell, ``a = sigma sqrt(lam)`` and ``b = -sigma^2 / 2``; ``L = T = v0 = 1``
    by default. With ``share_brownian`` the Brownian side, whose law does not
    depend on ``lam``, is estimated once per ``sigma`` (on common paths for
    all strikes) and reused across the ``lam`` grid.
    """

    strikes: tuple[float, ...] = (0.7, 1.0, 1.3)
    sigmas: tuple[float, ...] = (0.3, 0.5, 0.7)
    lambda_grid: tuple[float, ...] = field(default_factory=default_lambda_grid)
    n_samples: int = 10**7
    n_grid_steps: int = 10**4
    variant: SimVariant = SimVariant.ALTERNATING
    pin_initial_sign: bool = False
    seed: int = 1
    C: float = 1.0
    T: float = 1.0
    L: float = 1.0
    v0: float = 1.0
    standard_brownian: bool = False
    share_brownian: bool = False
    block_size: int = DEFAULT_BLOCK_SIZE
    workers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", SimVariant.parse(self.variant))
        for name in ("strikes", "sigmas", "lambda_grid"):
            values = tuple(float(x) for x in getattr(self, name))
            if not values:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, values)
        if self.n_samples < 2:
            raise ValueError("n_samples must be at least 2")
        if self.n_grid_steps < 1:
            raise ValueError("n_grid_steps must be at least 1")
        if any(lam <= 0 for lam in self.lambda_grid) or any(s <= 0 for s in self.sigmas):
            raise ValueError("rates and volatilities must be positive")

    def cells(self) -> list[tuple[int, float, float, float]]:
        """``(cell_index, K, sigma, lam)`` in output order."""
        out = []
        for sigma in self.sigmas:
            for K in self.strikes:
                for lam in self.lambda_grid:
                    out.append((len(out), K, sigma, lam))
        return out

    def brownian_sigma2(self, lam: float) -> float:
        if self.standard_brownian:
            return 1.0
        return self.v0**2 / (lam * self.L**2)


@dataclass(frozen=True)
class ExperimentRow:
    K: float
    sigma: float
    lam: float
    n: int
    est_brownian: float
    se_brownian: float
    est_telegraph: float
    se_telegraph: float
    error: float
    bound_per_C: float
    variant: str
    seed: int


def _payoff(values: np.ndarray, strikes: Sequence[float]) -> np.ndarray:
    return np.maximum(values[:, None] - np.asarray(strikes)[None, :], 0.0)


def telegraph_side(config: ExperimentConfig, cell: int, K: float, sigma: float, lam: float) -> MCEstimate:
    a = sigma * math.sqrt(lam)
    b = -0.5 * sigma**2
    slope = a * config.v0 / config.L
    collated = config.variant is SimVariant.COLLATED

    def block(gen, m):
        avg = telegraph_exp_avg_block(gen, m, lam, config.T, collated, config.pin_initial_sign, slope, b)
        return np.maximum(avg - K, 0.0)

    stream = RngStream(config.seed, 0, (DOMAIN_TELEGRAPH, cell))
    return estimate_blocks(block, config.n_samples, stream, config.block_size, config.workers)


def brownian_side(
    config: ExperimentConfig, key: tuple[int, ...], sigma: float, lam: float, strikes: Sequence[float]
) -> list[MCEstimate]:
    a = sigma * math.sqrt(lam)
    b = -0.5 * sigma**2
    sigma2 = config.brownian_sigma2(lam)

    def block(gen, m):
        avg = bm_exp_avg_block(gen, m, config.n_grid_steps, config.T, sigma2, 0.0, a, b)
        return _payoff(avg, strikes)

    stream = RngStream(config.seed, 0, (DOMAIN_BROWNIAN, *key))
    est = estimate_blocks(block, config.n_samples, stream, config.block_size, config.workers)
    return est if isinstance(est, list) else [est]


def _brownian_cache_key(config: ExperimentConfig, i_sigma: int, sigma: float) -> tuple:
    return (
        config.seed,
        i_sigma,
        sigma,
        config.strikes,
        config.n_samples,
        config.n_grid_steps,
        config.T,
        config.block_size,
        config.standard_brownian,
        config.v0,
        config.L,
    )


def run_experiment(
    config: ExperimentConfig,
    on_row: Callable[[ExperimentRow], None] | None = None,
    brownian_cache: dict | None = None,
) -> list[ExperimentRow]:
    """Estimate both expectations on every (K, sigma, lam) cell.

    ``on_row`` is called as soon as each cell completes. ``brownian_cache``
    (only used with ``share_brownian``) lets several runs, e.g. two
    simulation variants, reuse one set of Brownian estimates.
    """
    if config.share_brownian and config.standard_brownian:
        raise ValueError("the standard-Brownian audit mode depends on lam and cannot be shared")
    cache = brownian_cache if brownian_cache is not None else {}
    rows = []
    for cell, K, sigma, lam in config.cells():
        i_sigma = config.sigmas.index(sigma)
        if config.share_brownian:
            ckey = _brownian_cache_key(config, i_sigma, sigma)
            if ckey not in cache:
                logger.info("brownian side sigma=%g (shared over lambda)", sigma)
                cache[ckey] = brownian_side(config, (_SHARED, i_sigma), sigma, 1.0, config.strikes)
            bm = cache[ckey][config.strikes.index(K)]
        else:
            bm = brownian_side(config, (_PER_CELL, cell), sigma, lam, (K,))[0]
        tel = telegraph_side(config, cell, K, sigma, lam)
        a = sigma * math.sqrt(lam)
        params = ModelParams.symmetric(lam, config.v0, config.T, config.L)
        bound = total_error_bound_sym(asian_call_spec(a, -0.5 * sigma**2), params, 1.0).total
        row = ExperimentRow(
            K=K,
            sigma=sigma,
            lam=lam,
            n=config.n_samples,
            est_brownian=bm.mean,
            se_brownian=bm.std_error,
            est_telegraph=tel.mean,
            se_telegraph=tel.std_error,
            error=bm.mean - tel.mean,
            bound_per_C=bound,
            variant=config.variant.value,
            seed=config.seed,
        )
        logger.info("cell %d K=%g sigma=%g lam=%g error=%.3e", cell, K, sigma, lam, row.error)
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows


# --------------------------------------------------------------------------
# regression


@dataclass(frozen=True)
class RegressionFit:
    intercept: float
    slope: float
    n_points: int
    r_squared: float
    n_negative: int = 0


def ols_loglog(points: Iterable[tuple[float, float]]) -> RegressionFit:
    """OLS fit of ``ln|error|`` on ``ln lambda``.

    Negative errors enter through their absolute value and are counted in
    ``n_negative``.
    """
    pts = [(float(lam), float(err)) for lam, err in points]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    if any(err == 0 or not math.isfinite(err) for _, err in pts):
        raise ValueError("errors must be finite and nonzero")
    if any(lam <= 0 for lam, _ in pts):
        raise ValueError("lambda values must be positive")
    x = np.log([lam for lam, _ in pts])
    y = np.log([abs(err) for _, err in pts])
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    if sxx == 0:
        raise ValueError("all lambda values are equal")
    yc = y - y.mean()
    slope = float(np.dot(xc, yc)) / sxx
    intercept = float(y.mean() - slope * x.mean())
    syy = float(np.dot(yc, yc))
    resid = y - (intercept + slope * x)
    r2 = 1.0 - float(np.dot(resid, resid)) / syy if syy > 0 else 1.0
    n_neg = sum(1 for _, err in pts if err < 0)
    return RegressionFit(intercept, slope, len(pts), r2, n_neg)


# --------------------------------------------------------------------------
# MGF check


@dataclass(frozen=True)
class MgfCheck:
    s: float
    empirical: float
    analytic: float
    z_score: float
    std_error: float


def validate_mgf(
    lam: float,
    a: float,
    s_list: Sequence[float],
    n: int,
    seed: int,
    variant: SimVariant | str = SimVariant.ALTERNATING,
    v0: float = 1.0,
    L: float = 1.0,
    pin_initial_sign: bool = False,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int | None = None,
) -> list[MgfCheck]:
    """Compare the empirical ``E[exp(2 a X(s)/L)]`` with the closed-form MGF."""
    if n < 10**4:
        raise ValueError("validate_mgf needs n >= 10**4")
    variant = SimVariant.parse(variant)
    collated = variant is SimVariant.COLLATED
    out = []
    for k, s in enumerate(s_list):
        analytic = telegraph_mgf(a, lam, v0, L, s)
        if s == 0 or a == 0:
            out.append(MgfCheck(s, 1.0, analytic, 0.0, 0.0))
            continue

        def block(gen, m, s=s):
            x = telegraph_position_block(gen, m, lam, s, collated, pin_initial_sign, v0)
            return np.exp(2.0 * a * x / L)

        stream = RngStream(seed, 0, (DOMAIN_MGF, k))
        est = estimate_blocks(block, n, stream, block_size, workers)
        z = (est.mean - analytic) / est.std_error if est.std_error > 0 else 0.0
        out.append(MgfCheck(s, est.mean, analytic, z, est.std_error))
    return out

