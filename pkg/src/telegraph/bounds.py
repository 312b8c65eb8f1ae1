"""Closed-form error bounds and weight moments for the telegraph/Brownian comparison.

Every Wasserstein-type quantity is expressed in units of the absolute
constant ``C``, which is not known explicitly and is therefore a parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core_model import ModelParams, ObservableSpec, derive_scalings

MAX_EXPONENT = 700.0


def _expm1_ratio(x: float) -> float:
    if abs(x) < 1e-8:
        return 1.0 + x / 2.0 + x * x / 6.0
    return math.expm1(x) / x


def _positive(**kw):
    for name, value in kw.items():
        if not (value > 0 and math.isfinite(value)):
            raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class BoundReport:
    """Assembled error bound ``prefactor * w2_bound * (sqrt(m_tel) + sqrt(m_bm))``.

    ``w2_bound`` and ``total`` scale linearly with ``C``.
    """

    w2_bound: float
    m_brownian: float
    m_telegraph_bound: float
    prefactor: float
    total: float
    C: float

    def as_dict(self) -> dict[str, float]:
        return {
            "w2_bound": self.w2_bound,
            "m_brownian": self.m_brownian,
            "m_telegraph_bound": self.m_telegraph_bound,
            "prefactor": self.prefactor,
            "total": self.total,
            "C": self.C,
        }


def w2_bound_sym(T_star: float, L_star: float, C: float = 1.0) -> float:
    """Average-path W2 bound between the rescaled telegraph process and its Brownian limit.

    Evaluated term by term as printed:
    ``C sqrt(T*/L*^2) T*^(-1/4) (sqrt(ln(T*+3)) + T*^(-3/4)) + C/L*``.
    """
    _positive(T_star=T_star, L_star=L_star, C=C)
    head = math.sqrt(T_star / L_star**2) * T_star**-0.25
    return C * head * (math.sqrt(math.log(T_star + 3.0)) + T_star**-0.75) + C / L_star


def w2_bound_asym(params: ModelParams, C: float = 1.0) -> float:
    if params.is_symmetric:
        raise ValueError("w2_bound_asym expects asymmetric same-rate parameters")
    s = derive_scalings(params)
    return w2_bound_sym(s.T_star, s.L_star, C)


def brownian_weight_moment(a: float, b: float, T: float, sigma2: float) -> float:
    """Exact ``E[W_{a,b}(B)^2]`` for Brownian motion with diffusivity ``sigma2``.

    With ``x = 2 T (a^2 sigma2 + b)`` this is ``expm1(x) / x`` (1 at x = 0).
    """
    _positive(T=T)
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    x = 2.0 * T * (a * a * sigma2 + b)
    if x > MAX_EXPONENT:
        raise OverflowError(f"exponent {x} exceeds {MAX_EXPONENT}")
    return _expm1_ratio(x)


def telegraph_weight_moment_bound(a: float, b: float, lam: float, T_star: float, L_star: float) -> float:
    """Upper bound on ``E[W_{a,b}(X/L)^2]`` for the symmetric telegraph process."""
    _positive(lam=lam, T_star=T_star, L_star=L_star)
    q = math.sqrt(1.0 + 4.0 * a * a / L_star**2)
    expo = 2.0 * T_star * b / lam + 4.0 * a * a * T_star / L_star**2 / (1.0 + q)
    if expo > MAX_EXPONENT:
        raise OverflowError(f"exponent {expo} exceeds {MAX_EXPONENT}")
    return (1.0 + 1.0 / q) * max(1.0, math.exp(expo))


def telegraph_weight_moment_bound_simple(a: float, T_star: float, L_star: float) -> float:
    """Cruder bound ``2 max(1, exp(4 a^2 T*/L*^2))``, valid at the risk-neutral b."""
    _positive(T_star=T_star, L_star=L_star)
    expo = 4.0 * a * a * T_star / L_star**2
    if expo > MAX_EXPONENT:
        raise OverflowError(f"exponent {expo} exceeds {MAX_EXPONENT}")
    return 2.0 * max(1.0, math.exp(expo))


def risk_neutral_b(a: float, sigma2: float) -> float:
    return -0.5 * a * a * sigma2


def telegraph_mgf(a: float, lam: float, v0: float, L: float, s: float) -> float:
    """``E[exp(2 a X(s) / L)]`` for the symmetric process with flip rate ``lam``.

    Uses ``rho = sqrt(lam^2 + 4 a^2 v0^2 / L^2)`` and is evaluated as
    ``0.5 e^{s(rho-lam)} (1 + lam/rho) + 0.5 e^{-s(rho+lam)} (1 - lam/rho)``,
    which equals ``e^{-lam s}(cosh(s rho) + (lam/rho) sinh(s rho))`` without
    overflowing for large ``lam s``.
    """
    if s < 0:
        raise ValueError("s must be non-negative")
    _positive(lam=lam, L=L)
    rho = math.sqrt(lam * lam + 4.0 * a * a * v0 * v0 / (L * L))
    r = lam / rho
    return 0.5 * math.exp(s * (rho - lam)) * (1.0 + r) + 0.5 * math.exp(-s * (rho + lam)) * (1.0 - r)


def _require_symmetric(params: ModelParams):
    if not params.is_symmetric:
        raise ValueError("symmetric-mode parameters required")


def total_error_bound_sym(spec: ObservableSpec, params: ModelParams, C: float = 1.0) -> BoundReport:
    _require_symmetric(params)
    s = derive_scalings(params)
    w2 = w2_bound_sym(s.T_star, s.L_star, C)
    m_bm = brownian_weight_moment(spec.a, spec.b, params.T, s.sigma2)
    m_tel = telegraph_weight_moment_bound(spec.a, spec.b, params.lam, s.T_star, s.L_star)
    prefactor = abs(spec.a) * spec.kappa_f * spec.kappa_g
    total = prefactor * w2 * (math.sqrt(m_tel) + math.sqrt(m_bm))
    return BoundReport(w2, m_bm, m_tel, prefactor, total, C)


def total_error_bound_asym(spec: ObservableSpec, params: ModelParams, C: float = 1.0) -> BoundReport:
    """Asymmetric same-rate bound; the drift enters the moments as ``b -> b + d``."""
    if params.is_symmetric:
        raise ValueError("asymmetric same-rate parameters required")
    s = derive_scalings(params)
    w2 = w2_bound_sym(s.T_star, s.L_star, C)
    b_shift = spec.b + s.drift
    m_bm = brownian_weight_moment(spec.a, b_shift, params.T, s.sigma2)
    m_tel = telegraph_weight_moment_bound(spec.a, b_shift, params.lam, s.T_star, s.L_star)
    prefactor = math.sqrt(2.0) * abs(spec.a) * spec.kappa_f * spec.kappa_g
    total = prefactor * w2 * (math.sqrt(m_tel) + math.sqrt(m_bm))
    return BoundReport(w2, m_bm, m_tel, prefactor, total, C)


def integrability_thresholds(T_star: float, L_star: float) -> tuple[float, float]:
    """Thresholds on ``a`` for ``E[W(B)^2]`` with ``W(X) = exp(a ||X||_Ave^2) ||X||_Ave``.

    Finite below ``a_low``, infinite above ``a_high``, where
    ``a * sigma2 * T`` is compared with 1/2 and 3/2 and
    ``sigma2 * T = T* / L*^2``.
    """
    _positive(T_star=T_star, L_star=L_star)
    var_T = T_star / L_star**2
    return 0.5 / var_T, 1.5 / var_T
