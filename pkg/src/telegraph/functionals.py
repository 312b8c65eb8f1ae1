"""Exponential path functionals on exact telegraph paths and on grid paths.

On a telegraph path the exponent ``a X(s)/L + b s`` is piecewise linear, so
``int exp(.)`` splits into closed-form segment terms

    A_i = exp(p_i) * (exp(c_i * D_i) - 1) / c_i,

with ``p_i`` the exponent at the segment start, ``c_i = s_i a v / L + b`` the
slope and ``D_i`` the segment length. Each term is evaluated as
``D_i * exp(p_i) * expm1(c_i D_i) / (c_i D_i)`` so slopes at (or near) zero
need no special branch beyond the series fallback of :func:`expm1_ratio`.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .core_model import Affine, Identity, ObservableSpec, eval_f, eval_g
from .path_samplers import GridPath, TelegraphPath

MAX_EXPONENT = 700.0
_SERIES_CUTOFF = 1e-8


class NonlinearF(ValueError):
    """Raised when a closed-form evaluation is asked for a nonlinear inner function."""


@njit(cache=True, nogil=True)
def expm1_ratio(x):
    """``(exp(x) - 1) / x`` with the removable singularity at 0 filled in."""
    if abs(x) < _SERIES_CUTOFF:
        return 1.0 + x * (0.5 + x / 6.0)
    return math.expm1(x) / x


@njit(cache=True, nogil=True)
def exp_avg_kernel(times, sign, slope, b, T):
    """(1/T) int_0^T exp(slope * Y(s) + b s) ds for the unit-speed path Y.

    ``slope`` is ``a * v / L``. Returns -1.0 if an exponent exceeds
    ``MAX_EXPONENT`` (numba kernels cannot raise with formatted messages).
    """
    total = 0.0
    y = 0.0
    left = 0.0
    s = sign
    n = times.size
    for k in range(n + 1):
        right = times[k] if k < n else T
        d = right - left
        p = slope * y + b * left
        c = s * slope + b
        if p > MAX_EXPONENT or p + c * d > MAX_EXPONENT:
            return -1.0
        total += d * math.exp(p) * expm1_ratio(c * d)
        y += s * d
        left = right
        s = -s
    return total / T


def _overflow(a, b):
    raise OverflowError(
        f"exponent exceeds {MAX_EXPONENT} for a={a}, b={b}; parameters are outside the representable range"
    )


def exact_exp_avg_integral(path: TelegraphPath, a: float, b: float, L: float = 1.0) -> float:
    """Closed-form ``(1/T) int_0^T exp(a X(s)/L + b s) ds`` on an exact path."""
    value = exp_avg_kernel(path.jump_times, path.initial_sign, a * path.v / L, float(b), path.T)
    if value < 0:
        _overflow(a, b)
    return value


def weight_squared_exact(path: TelegraphPath, a: float, b: float, L: float = 1.0) -> float:
    """Squared weight ``(1/T) int exp(2 a X/L + 2 b s) ds``."""
    return exact_exp_avg_integral(path, 2.0 * a, 2.0 * b, L)


def _linear_scale(spec: ObservableSpec) -> float:
    if isinstance(spec.f_kind, (Identity, Affine)):
        return spec.f_kind.scale
    raise NonlinearF(
        f"f of kind {type(spec.f_kind).__name__} does not commute with the time average; use grid_functional"
    )


def exact_functional(path: TelegraphPath, spec: ObservableSpec, L: float = 1.0, strike_shift: float = 0.0) -> float:
    """``g(l_f * avg - strike_shift)`` with the average taken in closed form.

    Only linear ``f`` (Identity, Affine) is accepted.
    """
    scale = _linear_scale(spec)
    avg = exact_exp_avg_integral(path, spec.a, spec.b, L)
    return eval_g(spec, scale * avg - strike_shift)


def grid_functional(path: GridPath, spec: ObservableSpec, strike_shift: float = 0.0) -> float:
    """Left-endpoint Riemann version of the observable on a grid path."""
    x = path.positions[:-1]
    t = np.arange(path.n_steps) * path.dt
    expo = spec.a * x + spec.b * t
    if expo.max(initial=-np.inf) > MAX_EXPONENT:
        _overflow(spec.a, spec.b)
    avg = float(np.sum(eval_f(spec, np.exp(expo))) * path.dt / path.T)
    return eval_g(spec, avg - strike_shift)
