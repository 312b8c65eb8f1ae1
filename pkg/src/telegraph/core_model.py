"""Model parameters, derived Kac-regime scalings and exponential observables."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Mode(enum.Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


class SimVariant(enum.Enum):
    """How velocity reversals are generated on [0, T].

    ``COLLATED`` flips at every ring of the superposed two-clock process
    (flip count ~ Poisson(2 lambda T), sorted uniform jump times).
    ``ALTERNATING`` flips after i.i.d. Exp(lambda) dwell times (flip rate lambda).
    """

    COLLATED = "collated"
    ALTERNATING = "alternating"

    @classmethod
    def parse(cls, value: "SimVariant | str") -> "SimVariant":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class ModelParams:
    """Raw inputs of the two-clock telegraph model.

    Units are documentation only: ``lam``/``lam_star`` are rates (1/time),
    ``v0``/``v0_star`` speeds (length/time), ``T`` a horizon and ``L`` a
    spatial scale. The start point is always 0.

    Use :meth:`symmetric` or :meth:`asymmetric` rather than the raw
    constructor; the mode is declared, never inferred.
    """

    lam: float
    lam_star: float
    v0: float
    v0_star: float
    T: float
    L: float
    mode: Mode = Mode.ASYMMETRIC

    def __post_init__(self):
        for name in ("lam", "lam_star", "T", "L"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.lam != self.lam_star:
            raise ValueError("only same-rate models (lam == lam_star) are supported")
        if self.mode is Mode.SYMMETRIC:
            if self.v0 == 0 or self.v0_star != -self.v0:
                raise ValueError("symmetric mode requires v0 != 0 and v0_star == -v0")
        elif self.v0 + self.v0_star == 0:
            raise ValueError("asymmetric mode requires v0 + v0_star != 0")

    @classmethod
    def symmetric(cls, lam: float, v0: float, T: float, L: float) -> "ModelParams":
        return cls(lam, lam, v0, -v0, T, L, Mode.SYMMETRIC)

    @classmethod
    def asymmetric(cls, lam: float, v0: float, v0_star: float, T: float, L: float) -> "ModelParams":
        return cls(lam, lam, v0, v0_star, T, L, Mode.ASYMMETRIC)

    @property
    def is_symmetric(self) -> bool:
        return self.mode is Mode.SYMMETRIC

    @property
    def v_eff(self) -> float:
        """Speed of the symmetric part, v0 in symmetric mode, (v0 + v0*)/2 otherwise."""
        if self.is_symmetric:
            return self.v0
        return 0.5 * (self.v0 + self.v0_star)


@dataclass(frozen=True)
class Scalings:
    T_star: float
    L_star: float
    sigma2: float
    drift: float
    v_eff: float


def derive_scalings(params: ModelParams) -> Scalings:
    """Dimensionless time/length, Brownian diffusivity and drift for ``params``.

    ``sigma2`` is returned as ``lam / L_star**2``, which equals
    ``v_eff**2 / (lam * L**2)``. The drift is forced to 0 in symmetric mode.
    """
    v = params.v_eff
    if v == 0:
        raise ValueError("effective speed is zero: no motion scale")
    T_star = params.lam * params.T
    L_star = params.lam * params.L / abs(v)
    sigma2 = params.lam / L_star**2
    if params.is_symmetric:
        drift = 0.0
    else:
        drift = (params.v0 - params.v0_star) / (2.0 * params.L)
    return Scalings(T_star=T_star, L_star=L_star, sigma2=sigma2, drift=drift, v_eff=v)


@dataclass(frozen=True)
class Identity:
    def __call__(self, x):
        return x

    @property
    def lipschitz(self) -> float:
        return 1.0

    @property
    def scale(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Affine:
    """``x -> slope * x``."""

    slope: float

    def __call__(self, x):
        return self.slope * x

    @property
    def lipschitz(self) -> float:
        return abs(self.slope)

    @property
    def scale(self) -> float:
        return self.slope


@dataclass(frozen=True)
class CallFloor:
    """``x -> max(slope * x, floor)``."""

    slope: float
    floor: float

    def __call__(self, x):
        y = np.maximum(self.slope * x, self.floor)
        return float(y) if np.ndim(y) == 0 else y

    @property
    def lipschitz(self) -> float:
        return abs(self.slope)


FunctionKind = Identity | Affine | CallFloor


@dataclass(frozen=True)
class ObservableSpec:
    """Exponential path observable ``g((1/T) int_0^T f(exp(a X(s) + b s)) ds)``.

    The Lipschitz constants are read off the kinds so they are always exact.
    """

    a: float
    b: float
    f_kind: FunctionKind = field(default_factory=Identity)
    g_kind: FunctionKind = field(default_factory=Identity)

    @property
    def kappa_f(self) -> float:
        return self.f_kind.lipschitz

    @property
    def kappa_g(self) -> float:
        return self.g_kind.lipschitz


def lipschitz_kappa(spec: ObservableSpec) -> float:
    return 2.0 * abs(spec.a) * spec.kappa_f * spec.kappa_g


def eval_f(spec: ObservableSpec, x):
    return spec.f_kind(x)


def eval_g(spec: ObservableSpec, x):
    return spec.g_kind(x)


def asian_call_spec(a: float, b: float) -> ObservableSpec:
    """Observable of the arithmetic Asian call: f identity, g = max(. , 0) after the strike shift."""
    return ObservableSpec(a=a, b=b, f_kind=Identity(), g_kind=CallFloor(1.0, 0.0))
