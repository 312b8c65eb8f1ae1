"""Exact telegraph path sampling and Brownian grid paths.

A symmetric telegraph path is fully described by its initial velocity sign and
its ordered reversal times, so sampling is exact: no time stepping is involved.
The per-path samplers are numba kernels that take a ``numpy.random.Generator``;
numba reproduces numpy's generator algorithms bit for bit, so the scalar API
below and the batched Monte Carlo kernels see identical draws for a stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core_model import SimVariant
from .rng import RngStream, as_generator


@dataclass(frozen=True, eq=False)
class TelegraphPath:
    """Symmetric telegraph path with speed ``v`` on ``[0, T]``.

    The velocity on segment i (1-based, between consecutive jump times) is
    ``initial_sign * (-1)**(i-1) * v``.
    """

    initial_sign: int
    jump_times: np.ndarray
    T: float
    v: float

    def __post_init__(self):
        if self.initial_sign not in (1, -1):
            raise ValueError("initial_sign must be +1 or -1")
        if not (self.T > 0 and self.v > 0):
            raise ValueError("T and v must be positive")
        times = np.array(self.jump_times, dtype=np.float64)
        if times.ndim != 1:
            raise ValueError("jump_times must be one-dimensional")
        if times.size and (times[0] < 0 or times[-1] > self.T or np.any(np.diff(times) < 0)):
            raise ValueError("jump_times must be ascending within [0, T]")
        times.flags.writeable = False
        object.__setattr__(self, "jump_times", times)

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.size)

    def position(self, t) -> np.ndarray | float:
        return position_at(self, t)


@dataclass(frozen=True, eq=False)
class AsymmetricPath:
    """Same-rate asymmetric path written as drift plus a signed symmetric path."""

    drift_rate: float
    sign: int
    sym: TelegraphPath

    @property
    def T(self) -> float:
        return self.sym.T

    def position(self, t):
        return self.drift_rate * np.asarray(t, dtype=np.float64) + self.sign * position_at(self.sym, t)


@dataclass(frozen=True, eq=False)
class GridPath:
    n_steps: int
    dt: float
    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64)
        if pos.shape != (self.n_steps + 1,):
            raise ValueError("positions must have n_steps + 1 entries")
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


# --------------------------------------------------------------------------
# numba kernels


@njit(cache=True, nogil=True)
def draw_reversals(rng, lam, T, collated):
    """Draw (initial_sign, jump_times) for one path.

    The sign is always drawn first, so pinning it downstream leaves the jump
    times unchanged.
    """
    sign = 1 if rng.random() < 0.5 else -1
    if collated:
        n = rng.poisson(2.0 * lam * T)
        times = np.sort(rng.uniform(0.0, T, n))
        return sign, times
    cap = int(lam * T + 10.0 * math.sqrt(lam * T) + 16.0)
    buf = np.empty(cap)
    scale = 1.0 / lam
    n = 0
    t = rng.exponential(scale)
    while t < T:
        if n == buf.size:
            grown = np.empty(2 * buf.size)
            grown[:n] = buf[:n]
            buf = grown
        buf[n] = t
        n += 1
        t += rng.exponential(scale)
    return sign, buf[:n].copy()


@njit(cache=True, nogil=True)
def position_kernel(times, sign, v, t):
    x = 0.0
    left = 0.0
    s = sign
    for k in range(times.size):
        right = times[k]
        if right >= t:
            break
        x += s * (right - left)
        left = right
        s = -s
    x += s * (t - left)
    return v * x


@njit(cache=True, nogil=True)
def _bm_increments(rng, n_steps, dt, sigma2, drift):
    scale = math.sqrt(sigma2 * dt)
    pos = np.empty(n_steps + 1)
    pos[0] = 0.0
    x = 0.0
    for i in range(n_steps):
        x += drift * dt + scale * rng.standard_normal()
        pos[i + 1] = x
    return pos


# --------------------------------------------------------------------------
# public API


def sample_sym_path(
    lam: float,
    v: float,
    T: float,
    variant: SimVariant | str,
    rng: RngStream | np.random.Generator,
    pin_initial_sign: bool = False,
) -> TelegraphPath:
    """Sample one exact symmetric telegraph path.

    Args:
        lam: Clock rate (> 0).
        v: Speed (> 0).
        T: Horizon (> 0).
        variant: ``COLLATED`` draws Poisson(2 lam T) sorted uniform flip
            times; ``ALTERNATING`` accumulates Exp(lam) dwell times.
        rng: Stream or generator to draw from.
        pin_initial_sign: Force the initial velocity to ``+v``. The sign draw
            is still consumed.
    """
    if not (lam > 0 and v > 0 and T > 0):
        raise ValueError("lam, v and T must be positive")
    variant = SimVariant.parse(variant)
    sign, times = draw_reversals(as_generator(rng), float(lam), float(T), variant is SimVariant.COLLATED)
    if pin_initial_sign:
        sign = 1
    return TelegraphPath(int(sign), times, float(T), float(v))


def position_at(path: TelegraphPath, t):
    """Position of ``path`` at time(s) ``t`` in ``[0, T]``."""
    ts = np.asarray(t, dtype=np.float64)
    if np.any(ts < 0) or np.any(ts > path.T) or np.any(np.isnan(ts)):
        raise ValueError(f"t must lie in [0, {path.T}]")
    if ts.ndim == 0:
        return position_kernel(path.jump_times, path.initial_sign, path.v, float(ts))
    times = path.jump_times
    nodes = np.concatenate(([0.0], times))
    signs = path.initial_sign * np.where(np.arange(nodes.size) % 2 == 0, 1.0, -1.0)
    node_pos = np.concatenate(([0.0], np.cumsum(signs[:-1] * np.diff(nodes))))
    k = np.searchsorted(times, ts, side="left")
    return path.v * (node_pos[k] + signs[k] * (ts - nodes[k]))


def galilean_asym(sym: TelegraphPath, sign: int, v0: float, v0_star: float) -> AsymmetricPath:
    """Asymmetric path ``((v0 - v0*)/2) t + sign * sym(t)``.

    ``sym`` must move at speed ``|v0 + v0*|/2``. With ``sym`` started in the
    + direction, ``sign`` is +1 when the initial velocity is ``v0`` and -1
    when it is ``-v0*``.
    """
    v = 0.5 * (v0 + v0_star)
    if v == 0:
        raise ValueError("v0 + v0_star must be nonzero")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not math.isclose(sym.v, abs(v), rel_tol=1e-12):
        raise ValueError(f"symmetric path speed {sym.v} does not match (v0 + v0*)/2 = {v}")
    if v < 0:
        # negative mean speed: absorb the sign so the symmetric part keeps v > 0
        sign = -sign
    return AsymmetricPath(drift_rate=0.5 * (v0 - v0_star), sign=sign, sym=sym)


def sample_bm_grid(
    sigma2: float,
    drift: float,
    T: float,
    n_steps: int,
    rng: RngStream | np.random.Generator,
) -> GridPath:
    """Brownian motion with drift on ``n_steps`` equidistant steps of ``[0, T]``."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    dt = T / n_steps
    pos = _bm_increments(as_generator(rng), int(n_steps), dt, float(sigma2), float(drift))
    return GridPath(int(n_steps), dt, pos)


def sample_telegraph_grid(path: TelegraphPath, n_steps: int) -> GridPath:
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    dt = path.T / n_steps
    times = np.arange(n_steps + 1) * dt
    times[-1] = path.T
    return GridPath(int(n_steps), dt, position_at(path, times))
