from __future__ import annotations

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from ..config import get_settings
from ..errors import DomainError, SingularGenerator, StepFailure
from ..models import Generator, StateVector, Trajectory, TrajectoryMethod, VParams, validate

EXP_CLAMP = 700.0
IMAG_RESIDUE_TOL = 1e-10
CONDITION_LIMIT = 1e8
STIFFNESS_THRESHOLD = 10.0
SINGULAR_TOL = 1e-14
_logger = logging.getLogger(__name__)


def build(params: VParams) -> Generator:
    """Coefficient matrix A and drive d of dx/dt = A x + d."""
    params = validate(params)
    gamma, delta, p, r = params.gamma, params.delta, params.p, params.r
    a = 3.0 * r + gamma
    b = r + gamma
    a_matrix = np.array(
        [
            [-a, -p * b, 0.0],
            [-p * a, -b, delta],
            [0.0, -delta, -b],
        ]
    )
    drive = np.array([r, p * r, 0.0])
    return Generator(a_matrix=a_matrix, drive=drive)


def characteristic_coeffs(params: VParams) -> Tuple[float, float, float]:
    """(c2, c1, c0) of det(lambda I - A) = lambda^3 + c2 lambda^2 + c1 lambda + c0."""
    gamma, delta, p, r = params.gamma, params.delta, params.p, params.r
    a = 3.0 * r + gamma
    b = r + gamma
    c2 = a + 2.0 * b
    c1 = b * b + delta * delta + (2.0 - p * p) * a * b
    c0 = a * ((1.0 - p) * (1.0 + p) * b * b + delta * delta)
    return c2, c1, c0


def require_invertible(params: VParams, generator: Generator) -> float:
    c0 = characteristic_coeffs(params)[2]
    norm = np.linalg.norm(generator.a_matrix, 2)
    if abs(c0) <= SINGULAR_TOL * norm**3:
        raise SingularGenerator(
            "generator is singular (p=1 with delta=0 leaves an undamped dark state)",
            p=params.p,
            delta=params.delta,
        )
    return c0


def polish_smallest(lambdas: np.ndarray, c0: float) -> np.ndarray:
    """Replace the smallest real root by -c0 / (product of the other two)."""
    lambdas = np.asarray(lambdas, dtype=complex).copy()
    scale = np.max(np.abs(lambdas))
    k = int(np.argmin(np.abs(lambdas)))
    if abs(lambdas[k].imag) > 1e-12 * scale or abs(lambdas[k]) > 1e-3 * scale:
        return lambdas
    others = np.prod(np.delete(lambdas, k))
    if others != 0:
        lambdas[k] = complex((-c0 / others).real, 0.0)
    return lambdas


def steady_state(params: VParams) -> StateVector:
    generator = build(params)
    require_invertible(params, generator)
    x_ss = np.linalg.solve(generator.a_matrix, -generator.drive)
    residual = np.linalg.norm(generator.a_matrix @ x_ss + generator.drive)
    if residual > 1e-12 * max(np.linalg.norm(generator.drive), 1e-300):
        _logger.warning("Steady-state residual above tolerance", extra={"residual": residual})
    return StateVector.from_array(x_ss)


def timescales(params: VParams) -> Tuple[float, float]:
    """(fastest, slowest) relaxation time 1/|Re lambda| of the generator."""
    generator = build(params)
    rates = np.abs(np.linalg.eigvals(generator.a_matrix).real)
    slowest = math.inf if rates.min() == 0 else 1.0 / rates.min()
    return 1.0 / rates.max(), slowest


def log_time_grid(
    t_start: float, t_end: float, points_per_decade: Optional[int] = None
) -> np.ndarray:
    """Logarithmic grid from t_start to t_end with t = 0 prepended."""
    if not 0.0 < t_start < t_end:
        raise DomainError("t_start", t_start, "0 < t_start < t_end")
    density = points_per_decade or get_settings().points_per_decade
    count = max(2, int(math.ceil(math.log10(t_end / t_start) * density)) + 1)
    return np.concatenate(([0.0], np.geomspace(t_start, t_end, count)))


def default_time_grid(
    params: VParams, t_end: float, points_per_decade: Optional[int] = None
) -> np.ndarray:
    if not t_end > 0:
        raise DomainError("t_end", t_end, "t_end > 0")
    t_start = 1e-3 / (params.gamma * max(1.0, params.nbar))
    if t_start >= t_end:
        t_start = t_end * 1e-3
    return log_time_grid(t_start, t_end, points_per_decade)


def _initial(x0: Optional[StateVector]) -> np.ndarray:
    return (x0 or StateVector.ground()).as_array()


def _as_grid(times: Sequence[float]) -> np.ndarray:
    grid = np.asarray(times, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("times", grid.shape, "a non-empty 1-D grid")
    return grid


def propagate_exact(
    params: VParams, x0: Optional[StateVector], times: Sequence[float]
) -> Trajectory:
    """Duhamel solution x(t) = x_ss + sum_k c_k exp(lambda_k t) v_k."""
    grid = _as_grid(times)
    generator = build(params)
    c0 = require_invertible(params, generator)
    a_matrix = generator.a_matrix
    x_ss = np.linalg.solve(a_matrix, -generator.drive)
    offset = _initial(x0) - x_ss

    lambdas, vectors = np.linalg.eig(a_matrix)
    if np.linalg.cond(vectors) > CONDITION_LIMIT:
        _logger.warning(
            "Near-defective generator, using matrix exponential",
            extra={"params": params.as_dict()},
        )
        values = np.array([x_ss + expm(a_matrix * t) @ offset for t in grid])
        return Trajectory(grid, values, TrajectoryMethod.EXACT_DUHAMEL, params)

    lambdas = polish_smallest(lambdas, c0)
    amplitudes = np.linalg.solve(vectors, offset.astype(complex))
    exponent = np.outer(grid, lambdas)
    factors = np.zeros_like(exponent)
    alive = exponent.real >= -EXP_CLAMP
    factors[alive] = np.exp(exponent[alive])
    complex_values = x_ss + (factors * amplitudes) @ vectors.T

    residue = float(np.max(np.abs(complex_values.imag)))
    if residue > IMAG_RESIDUE_TOL:
        _logger.warning(
            "Imaginary residue in exact propagation",
            extra={"residue": residue, "params": params.as_dict()},
        )
    _logger.debug(
        "Exact propagation finished",
        extra={"points": int(grid.size), "params": params.as_dict()},
    )
    return Trajectory(grid, complex_values.real.copy(), TrajectoryMethod.EXACT_DUHAMEL, params)


def propagate_stepped(
    params: VParams,
    x0: Optional[StateVector] = None,
    t_end: Optional[float] = None,
    rel_tol: float = 1e-8,
    times: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Adaptive Runge-Kutta oracle, restarted on every grid segment."""
    if not 1e-12 <= rel_tol <= 1e-3:
        raise DomainError("rel_tol", rel_tol, "1e-12 <= rel_tol <= 1e-3")
    if times is None:
        if t_end is None:
            raise DomainError("t_end", t_end, "t_end > 0 when no grid is given")
        grid = default_time_grid(params, t_end)
    else:
        grid = _as_grid(times)

    generator = build(params)
    a_matrix, drive = generator.a_matrix, generator.drive
    rates = np.abs(np.linalg.eigvals(a_matrix).real)
    stiffness = rates.max() / rates.min() if rates.min() > 0 else math.inf
    options = {"rtol": rel_tol, "atol": max(1e-2 * rel_tol, 1e-14)}
    if stiffness >= STIFFNESS_THRESHOLD:
        options["method"] = "Radau"
        options["jac"] = a_matrix
    else:
        options["method"] = "DOP853"

    def rhs(_t: float, state: np.ndarray) -> np.ndarray:
        return a_matrix @ state + drive

    state = _initial(x0)
    clock = 0.0
    values = np.empty((grid.size, 3))
    for index, target in enumerate(grid):
        if target > clock:
            solution = solve_ivp(rhs, (clock, float(target)), state, **options)
            if solution.status < 0:
                raise StepFailure(solution.message, float(solution.t[-1]))
            state = solution.y[:, -1]
            clock = float(target)
        values[index] = state

    _logger.debug(
        "Stepped propagation finished",
        extra={"solver": options["method"], "stiffness": stiffness, "points": int(grid.size)},
    )
    return Trajectory(grid, values, TrajectoryMethod.STEPPED, params)


__all__ = [
    "build",
    "characteristic_coeffs",
    "default_time_grid",
    "log_time_grid",
    "polish_smallest",
    "propagate_exact",
    "propagate_stepped",
    "require_invertible",
    "steady_state",
    "timescales",
]
