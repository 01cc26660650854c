"""Parallel phase-diagram sweeps over two parameter axes."""
from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from ..config import get_settings
from ..errors import DomainError, VSystemError
from ..models import VParams, validate
from ..utils.tables import format_value
from .regime import classify, discriminant_direct, slope_f
from .spectral import coherence_lifetime, critical_p, eigenvalues_cardano, z_expansion

_logger = logging.getLogger(__name__)


class AxisName(str, Enum):
    NBAR = "nbar"
    DELTA_OVER_GAMMA = "delta_over_gamma"
    P = "p"


class Spacing(str, Enum):
    LINEAR = "linear"
    LOG = "log"


class Quantity(str, Enum):
    DISCRIMINANT = "discriminant"
    REGIME = "regime"
    LAMBDA1_MAG = "lambda1_mag"
    LAMBDA2_MAG = "lambda2_mag"
    LAMBDA3_MAG = "lambda3_mag"
    LIFETIME = "lifetime"
    SLOPE_F = "slope_f"
    EPSILON = "epsilon"


class Axis(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: AxisName
    min: float
    max: float
    points: int
    spacing: Spacing = Spacing.LINEAR

    @field_validator("points")
    @classmethod
    def _points(cls, value: int) -> int:
        if value < 2:
            raise ValueError("an axis needs at least 2 points")
        return value

    @model_validator(mode="after")
    def _bounds(self) -> "Axis":
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError("axis bounds must be finite")
        if not self.min < self.max:
            raise ValueError("axis min must be below max")
        if self.spacing is Spacing.LOG and self.min <= 0:
            raise ValueError("log spacing needs min > 0")
        return self

    def values(self) -> np.ndarray:
        if self.spacing is Spacing.LOG:
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)


class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    axis1: Axis
    axis2: Axis
    quantity: Quantity
    fixed: Dict[str, float] = {}
    gamma: float = 1.0

    @field_validator("gamma")
    @classmethod
    def _gamma(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("gamma must be positive")
        return value

    @model_validator(mode="after")
    def _complete(self) -> "GridSpec":
        if self.axis1.name == self.axis2.name:
            raise ValueError("the two axes must sweep different parameters")
        swept = {self.axis1.name.value, self.axis2.name.value}
        unknown = set(self.fixed) - {name.value for name in AxisName}
        if unknown:
            raise ValueError(f"unknown fixed parameters: {sorted(unknown)}")
        overlap = swept & set(self.fixed)
        if overlap:
            raise ValueError(f"fixed values given for swept axes: {sorted(overlap)}")
        missing = {name.value for name in AxisName} - swept - set(self.fixed)
        if missing:
            raise ValueError(f"missing fixed values for {sorted(missing)}")
        return self

    def header(self) -> Dict[str, Any]:
        """gamma, delta, p and nbar for output headers; a swept one reads min:max:points:spacing."""
        point: Dict[str, Any] = {"gamma": self.gamma}
        for key, name in (("delta", "delta_over_gamma"), ("p", "p"), ("nbar", "nbar")):
            scale = self.gamma if key == "delta" else 1.0
            if name in self.fixed:
                point[key] = self.fixed[name] * scale
                continue
            axis = self.axis1 if self.axis1.name.value == name else self.axis2
            point[key] = ":".join(
                [format_value(axis.min * scale), format_value(axis.max * scale), str(axis.points), axis.spacing.value]
            )
        return point

    def params_at(self, value1: float, value2: float) -> VParams:
        values = dict(self.fixed)
        values[self.axis1.name.value] = value1
        values[self.axis2.name.value] = value2
        return VParams(
            gamma=self.gamma,
            delta=values["delta_over_gamma"] * self.gamma,
            p=values["p"],
            nbar=values["nbar"],
        )


@dataclass(frozen=True)
class SweepRow:
    axis1: float
    axis2: float
    value: float
    error: str = ""


@dataclass
class SweepTable:
    grid: GridSpec
    rows: List[SweepRow] = field(default_factory=list)

    @property
    def columns(self) -> Tuple[str, str, str, str]:
        return (self.grid.axis1.name.value, self.grid.axis2.name.value, self.grid.quantity.value, "error")

    def values(self) -> np.ndarray:
        """Cell values reshaped to (axis1 points, axis2 points)."""
        return np.array([row.value for row in self.rows]).reshape(
            self.grid.axis1.points, self.grid.axis2.points
        )


def evaluate_cell(quantity: Quantity, params: VParams) -> float:
    y, p, nbar = params.dimensionless()
    if quantity is Quantity.DISCRIMINANT:
        return discriminant_direct(params)
    if quantity is Quantity.REGIME:
        return float(classify(params).tag.code)
    if quantity in (Quantity.LAMBDA1_MAG, Quantity.LAMBDA2_MAG, Quantity.LAMBDA3_MAG):
        label = (Quantity.LAMBDA1_MAG, Quantity.LAMBDA2_MAG, Quantity.LAMBDA3_MAG).index(quantity)
        return float(abs(eigenvalues_cardano(params).lambdas[label]))
    if quantity is Quantity.LIFETIME:
        return coherence_lifetime(params).tau_exact
    if quantity is Quantity.SLOPE_F:
        return slope_f(p)
    return 1.0 - critical_p(nbar, y)


def _run_row(grid: GridSpec, value1: float) -> List[SweepRow]:
    rows = []
    for value2 in grid.axis2.values():
        try:
            value = evaluate_cell(grid.quantity, grid.params_at(value1, float(value2)))
            error = ""
        except (VSystemError, ArithmeticError) as exc:
            _logger.debug(
                "Sweep cell failed",
                extra={"axis1": value1, "axis2": float(value2), "error": str(exc)},
            )
            value, error = math.nan, f"{type(exc).__name__}: {exc}"
        rows.append(SweepRow(float(value1), float(value2), float(value), error))
    return rows


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit count, or VSYSTEM_WORKERS when None; 0 means one per CPU."""
    if workers is None:
        return get_settings().workers
    if workers < 0:
        raise DomainError("workers", workers, "workers >= 0")
    return workers or os.cpu_count() or 1


def run(grid: GridSpec, workers: Optional[int] = None) -> SweepTable:
    """Evaluate every cell; rows come back in axis1-major order for any worker count."""
    workers = resolve_workers(workers)
    started = time.perf_counter()
    axis1 = [float(value) for value in grid.axis1.values()]
    job = partial(_run_row, grid)
    if workers == 1:
        chunks = [job(value) for value in axis1]
    else:
        with Pool(workers) as pool:
            chunks = pool.map(job, axis1)
    table = SweepTable(grid=grid, rows=[row for chunk in chunks for row in chunk])
    _logger.info(
        "Sweep finished",
        extra={
            "quantity": grid.quantity.value,
            "cells": len(table.rows),
            "failed": sum(1 for row in table.rows if row.error),
            "workers": workers,
            "elapsed": time.perf_counter() - started,
        },
    )
    return table


@dataclass(frozen=True, eq=False)
class ZTermTable:
    """|z_jk x^k| for j = 1..3, k = 0..2 along an alignment grid."""

    p: np.ndarray
    magnitudes: np.ndarray
    nbar: float
    delta_over_gamma: float
    errors: List[str]

    def dominates(self, j: int) -> np.ndarray:
        """True where the k = 0 term exceeds both corrections for eigenvalue j."""
        row = self.magnitudes[:, j - 1, :]
        return (row[:, 0] > row[:, 1]) & (row[:, 0] > row[:, 2])

    def crossing(self, j: int = 2) -> Optional[Tuple[float, float]]:
        """Grid interval where |z_j0| first drops below |z_j2 x^2|."""
        gap = self.magnitudes[:, j - 1, 0] - self.magnitudes[:, j - 1, 2]
        for index in range(1, gap.size):
            if np.isfinite(gap[index - 1]) and np.isfinite(gap[index]) and gap[index - 1] > 0 >= gap[index]:
                return float(self.p[index - 1]), float(self.p[index])
        return None


def zjk_magnitudes(
    p_grid: Sequence[float], nbar: float, delta_over_gamma: float, gamma: float = 1.0
) -> ZTermTable:
    validate(VParams(gamma=gamma, delta=delta_over_gamma * gamma, nbar=nbar))
    if not nbar > 0:
        raise DomainError("nbar", nbar, "nbar > 0 for x = 1/nbar")
    x = 1.0 / nbar
    scale = x ** np.arange(3)
    grid = np.asarray(p_grid, dtype=float)
    magnitudes = np.full((grid.size, 3, 3), math.nan)
    errors = []
    for index, p in enumerate(grid):
        params = VParams(gamma=gamma, delta=delta_over_gamma * gamma, p=float(p), nbar=nbar)
        try:
            z = z_expansion(params).z
        except VSystemError as exc:
            errors.append(f"{type(exc).__name__}: {exc}")
            continue
        errors.append("")
        magnitudes[index] = np.abs(z[:, :3]) * scale
    return ZTermTable(
        p=grid, magnitudes=magnitudes, nbar=nbar, delta_over_gamma=delta_over_gamma, errors=errors
    )


__all__ = [
    "Axis",
    "AxisName",
    "GridSpec",
    "Quantity",
    "Spacing",
    "SweepRow",
    "SweepTable",
    "ZTermTable",
    "evaluate_cell",
    "resolve_workers",
    "run",
    "zjk_magnitudes",
]
