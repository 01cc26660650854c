from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import DomainError


class RegimeTag(str, Enum):
    UNDERDAMPED = "underdamped"
    OVERDAMPED = "overdamped"
    CRITICAL = "critical"

    @property
    def code(self) -> int:
        return {"overdamped": -1, "critical": 0, "underdamped": 1}[self.value]


class TrajectoryMethod(str, Enum):
    EXACT_DUHAMEL = "exact_duhamel"
    STEPPED = "stepped"
    ANALYTIC_OVERDAMPED = "analytic_overdamped"
    ANALYTIC_SUBCRITICAL = "analytic_subcritical"
    ANALYTIC_SMALL_DELTA = "analytic_small_delta"
    ANALYTIC_P1 = "analytic_p1"
    ANALYTIC_MODAL = "analytic_modal"


class SpectrumMethod(str, Enum):
    CARDANO = "cardano"
    NUMERIC = "numeric"
    EXPANSION = "expansion"


class Branch(str, Enum):
    SUPERCRITICAL = "supercritical"
    SUBCRITICAL = "subcritical"
    P1 = "p1"


@dataclass(frozen=True)
class VParams:
    """One symmetric V-system: decay rate, splitting, dipole alignment, occupation."""

    gamma: float = 1.0
    delta: float = 0.0
    p: float = 0.0
    nbar: float = 0.0

    @property
    def r(self) -> float:
        return self.nbar * self.gamma

    @property
    def x(self) -> float:
        if self.nbar == 0:
            raise DomainError("nbar", self.nbar, "nbar > 0 for x = 1/nbar")
        return 1.0 / self.nbar

    @property
    def y(self) -> float:
        """Splitting in units of gamma."""
        return self.delta / self.gamma

    def dimensionless(self) -> Tuple[float, float, float]:
        return self.y, self.p, self.nbar

    def with_y(self, y: float) -> "VParams":
        return replace(self, delta=y * self.gamma)

    def as_dict(self) -> Dict[str, float]:
        return {"gamma": self.gamma, "delta": self.delta, "p": self.p, "nbar": self.nbar}


class _Bounds(BaseModel):
    model_config = ConfigDict(allow_inf_nan=False)

    gamma: float = Field(gt=0)
    delta: float = Field(ge=0)
    p: float = Field(ge=0, le=1)
    nbar: float = Field(ge=0)


def validate(params: VParams) -> VParams:
    """Check the physical domain; the first offending field becomes a DomainError."""
    values = {}
    for name in _Bounds.model_fields:
        raw = getattr(params, name)
        try:
            values[name] = float(raw)
        except (TypeError, ValueError) as exc:
            raise DomainError(name, raw, "a finite real number") from exc
    try:
        _Bounds(**values)
    except ValidationError as exc:
        error = exc.errors()[0]
        name = str(error["loc"][0])
        raise DomainError(name, getattr(params, name), error["msg"]) from exc
    return params


@dataclass(frozen=True)
class StateVector:
    """Reduced Liouville vector [rho_aa, Re rho_ab, Im rho_ab]."""

    rho_aa: float
    rho_ab_re: float
    rho_ab_im: float

    @property
    def rho_bb(self) -> float:
        return self.rho_aa

    @property
    def rho_cc(self) -> float:
        return 1.0 - 2.0 * self.rho_aa

    @property
    def rho_ab(self) -> complex:
        return complex(self.rho_ab_re, self.rho_ab_im)

    def population_ratio(self) -> float:
        if self.rho_cc == 0:
            return math.inf
        return self.rho_aa / self.rho_cc

    def positivity_violation(self) -> float:
        """Largest violated margin of the admissibility conditions, 0 if admissible."""
        margins = (
            -self.rho_aa,
            self.rho_aa - 0.5,
            math.hypot(self.rho_ab_re, self.rho_ab_im) - self.rho_aa,
        )
        return max(0.0, *margins)

    def is_admissible(self, tol: float = 1e-9) -> bool:
        return self.positivity_violation() <= tol

    def as_array(self) -> np.ndarray:
        return np.array([self.rho_aa, self.rho_ab_re, self.rho_ab_im], dtype=float)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "StateVector":
        return cls(float(values[0]), float(values[1]), float(values[2]))

    @classmethod
    def ground(cls) -> "StateVector":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    discriminant_value: float


@dataclass(frozen=True, eq=False)
class Generator:
    a_matrix: np.ndarray
    drive: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    method: TrajectoryMethod
    params: Optional[VParams] = None

    def __post_init__(self) -> None:
        if self.times.ndim != 1 or self.times.size < 1:
            raise DomainError("times", self.times.shape, "a non-empty 1-D grid")
        if self.values.shape != (self.times.size, 3):
            raise DomainError("values", self.values.shape, "shape (len(times), 3)")
        if self.times[0] < 0:
            raise DomainError("times[0]", float(self.times[0]), "times[0] >= 0")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("times", "non-monotone", "strictly increasing times")

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def states(self) -> List[StateVector]:
        return [StateVector.from_array(row) for row in self.values]

    @property
    def rho_aa(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def rho_ab_re(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def rho_ab_im(self) -> np.ndarray:
        return self.values[:, 2]


@dataclass(frozen=True, eq=False)
class Spectrum:
    lambdas: np.ndarray
    eigvecs: np.ndarray
    method: SpectrumMethod

    def slowest(self) -> complex:
        return complex(self.lambdas[int(np.argmin(np.abs(self.lambdas)))])


@dataclass(frozen=True, eq=False)
class DiscriminantCoeffs:
    """Coefficients d0..d6 of 108 D / gamma^6 as a polynomial in nbar."""

    d: np.ndarray
    p: float
    y: float

    def __getitem__(self, k: int) -> float:
        return float(self.d[k])

    @property
    def d6(self) -> float:
        return float(self.d[6])

    def evaluate(self, nbar: float) -> float:
        return float(np.polynomial.polynomial.polyval(nbar, self.d))

    def scale(self, nbar: float) -> float:
        return max(1.0, abs(self.d6) * nbar**6)


@dataclass(frozen=True, eq=False)
class ZCoeffs:
    """Coefficients of lambda_j / r = sum_k z_jk x^k, j = 1..3 stored as rows 0..2."""

    z: np.ndarray
    k_factor: complex
    f: np.ndarray
    p: float
    y: float

    @property
    def order(self) -> int:
        return self.z.shape[1] - 1

    def z_jk(self, j: int, k: int) -> complex:
        return complex(self.z[j - 1, k])

    def f_jk(self, j: int, k: int) -> complex:
        return complex(self.f[j - 1, k - 1])

    def lambdas(self, params: VParams, order: int = 2) -> np.ndarray:
        powers = params.x ** np.arange(order + 1)
        return params.r * (self.z[:, : order + 1] @ powers)


@dataclass(frozen=True)
class Lifetime:
    tau_exact: float
    tau_formula: float
    branch: Branch
    p_critical: float
    tau_weak_pumping: float
    ratio: float


@dataclass(frozen=True, eq=False)
class EigenvectorSeries:
    """Series for the first two eigenvector components in powers of x."""

    L: np.ndarray
    a: np.ndarray
    b: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class EigenvectorExpansion:
    vmatrix: np.ndarray
    cofactors: np.ndarray
    det: float
    t1: float
    t2: float
    m: np.ndarray


@dataclass(frozen=True, eq=False)
class TrajectoryCoeffs:
    p: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    t1: float
    t2: float
    m: np.ndarray
    F: np.ndarray
    L0: np.ndarray
    z0: np.ndarray
    f: np.ndarray = field(repr=False)

    def as_dict(self) -> Dict[str, float]:
        out: Dict[str, float] = {"p": self.p, "T1": self.t1, "T2": self.t2}
        for prefix, values in (("A", self.A), ("B", self.B), ("C", self.C), ("m", self.m)):
            for index, value in enumerate(values, start=1):
                out[f"{prefix}{index}"] = float(value)
        for j in range(3):
            out[f"F{j + 1}1"] = float(self.F[j, 0])
            out[f"F{j + 1}2"] = float(self.F[j, 1])
            out[f"L{j + 1}0"] = float(self.L0[j])
        return out


__all__ = [
    "Branch",
    "DiscriminantCoeffs",
    "EigenvectorExpansion",
    "EigenvectorSeries",
    "Generator",
    "Lifetime",
    "Regime",
    "RegimeTag",
    "Spectrum",
    "SpectrumMethod",
    "StateVector",
    "Trajectory",
    "TrajectoryCoeffs",
    "TrajectoryMethod",
    "VParams",
    "ZCoeffs",
    "validate",
]
