"""Independent reference computations used by the tests.

Nothing here calls the package's closed forms; values frozen below were
computed with mpmath at 30 significant digits.
"""

import numpy as np

# mpmath (mp.dps = 30) evaluations of the printed formulas
W2_SYM_100_100 = 0.0790788439107894655867720753137
W2_SYM_1_1 = 3.17741002251547469101156932646
W2_SYM_4_2 = 1.73638485112437561834432870730
BM_MOMENT_SEC3 = 1.04638093005789286525441803939  # a=3, b=-0.045, T=1, sigma2=0.01
TEL_BOUND_SEC3 = 2.18603082592224294008785208118  # a=3, b=-0.045, lam=T*=L*=100
TEL_BOUND_SIMPLE_SEC3 = 2.86665882912068051555138110249
MGF_HALF_1_1_1_1 = 1.30467797396402097250362305963  # a=0.5, lam=1, v0=1, L=1, s=1
TOTAL_SEC3 = 0.593435516326571649145382998133
TWO_SEGMENT_AVG = 1.29744254140025629369730157563  # 2 (e^0.5 - 1)
STRAIGHT_CALL = 5.15963543818381042085451472280  # (e^2.955 - 1)/2.955 - 1


def knot_positions(initial_sign, jump_times, T, v):
    knots = np.concatenate(([0.0], np.asarray(jump_times, dtype=float), [T]))
    signs = initial_sign * (-1.0) ** np.arange(knots.size - 1)
    return knots, np.concatenate(([0.0], np.cumsum(v * signs * np.diff(knots))))


def interp_positions(initial_sign, jump_times, T, v, t):
    """Telegraph positions by linear interpolation between knot values."""
    knots, xs = knot_positions(initial_sign, jump_times, T, v)
    return np.interp(t, knots, xs)


def riemann_exp_avg(initial_sign, jump_times, T, v, a, b, L, n_steps):
    """Left-endpoint Riemann sum of (1/T) int exp(a X/L + b s) ds."""
    dt = T / n_steps
    t = np.arange(n_steps) * dt
    x = interp_positions(initial_sign, jump_times, T, v, t)
    return float(np.exp(a * x / L + b * t).sum() * dt / T)


def two_speed_position(v_first, v_second, jump_times, t):
    """Integrate a velocity alternating v_first, v_second, ... directly."""
    pos = 0.0
    left = 0.0
    vel = v_first
    other = v_second
    for tj in jump_times:
        if tj >= t:
            break
        pos += vel * (tj - left)
        left = tj
        vel, other = other, vel
    return pos + vel * (t - left)
