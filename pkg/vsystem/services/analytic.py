"""Closed-form trajectories of the overdamped V-system from the ground state.

Every form is a sum over three relaxation modes,
rho(t) = sum_k w_k (1 - exp(-kappa_k t)), with one weight row per component
(rho_aa, Re rho_ab, Im rho_ab).
"""
from __future__ import annotations

import logging
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import OutsideValidity, SplittingTooLarge, WrongBranch, WrongRegime
from ..models import (
    Branch,
    RegimeTag,
    Spectrum,
    StateVector,
    Trajectory,
    TrajectoryCoeffs,
    TrajectoryMethod,
    VParams,
    validate,
)
from .generator import EXP_CLAMP, build, require_invertible
from .regime import classify
from .spectral import (
    cofactor_coefficients,
    critical_p,
    eigenvalues_cardano,
    eigenvectors_exact,
    in_validity_window,
    leading_terms,
    require_validity,
)

SMALL_SPLITTING_MAX = 0.2
SMALL_SPLITTING_WARN = 0.1
P1_THRESHOLD = 1.0 - 1e-6
P1_T2 = 1.33
_logger = logging.getLogger(__name__)

TimeLike = Union[float, Sequence[float], np.ndarray]


class ModalForm(NamedTuple):
    rates: np.ndarray
    weights: np.ndarray
    method: TrajectoryMethod
    branch: Optional[Branch] = None

    def evaluate(self, times: TimeLike) -> np.ndarray:
        grid = np.atleast_1d(np.asarray(times, dtype=float))
        exponent = -np.outer(grid, self.rates)
        rising = np.ones_like(exponent)
        alive = exponent.real >= -EXP_CLAMP
        rising[alive] = -np.expm1(exponent[alive])
        values = rising @ self.weights.T
        # conjugate modes pair up, leaving only rounding in the imaginary part
        return values.real.copy() if np.iscomplexobj(values) else values

    def state(self, t: float) -> StateVector:
        return StateVector.from_array(self.evaluate([t])[0])


# --- coefficients ----------------------------------------------------------------------


def coeffs(p: float) -> TrajectoryCoeffs:
    """A_i, B_i, C_i composites assembled from the truncated cofactors at alignment p."""
    if not 0.1 < p <= 1.0:
        raise OutsideValidity("trajectory coefficients need 0.1 < p <= 1", p=p)
    lead = leading_terms(p)
    m, t1, t2 = cofactor_coefficients(lead)
    z10, z20, z30 = lead.z0
    f11, f21 = lead.F[0, 0], lead.F[1, 0]
    l30 = lead.L0[2]
    g = lead.g

    pairs = np.array(
        [
            m[0] + p * m[2],
            m[1] + p * m[3],
            m[4] + p * m[6],
            m[5] + p * m[7],
            m[10] + p * m[12],
            m[11] + p * m[13],
        ]
    )
    big_a = np.array(
        [
            -(p / f11) * pairs[0],
            p * (g * pairs[0] - pairs[1] / f11),
            -(p / f21) * pairs[2],
            -(p / f21) * pairs[3],
            -(p / l30) * pairs[4],
            -(p / l30) * pairs[5],
        ]
    )
    big_b = np.array(
        [
            (3.0 + z10) / f11 * pairs[0],
            g * (1.0 + z10) * pairs[0] + (3.0 + z10) / f11 * pairs[1],
            (3.0 + z20) / f21 * pairs[2],
            (3.0 + z20) / f21 * pairs[3],
            (3.0 + z30) / l30 * pairs[4],
            (3.0 + z30) / l30 * pairs[5],
        ]
    )
    return TrajectoryCoeffs(
        p=p,
        A=big_a,
        B=big_b,
        C=pairs,
        t1=t1,
        t2=t2,
        m=m,
        F=lead.F,
        L0=lead.L0,
        z0=lead.z0,
        f=lead.f,
    )


# --- preconditions ---------------------------------------------------------------------


def _require_overdamped(params: VParams) -> None:
    regime = classify(params)
    if regime.tag is not RegimeTag.OVERDAMPED:
        raise WrongRegime(
            f"{regime.tag.value}: analytic branch unavailable", regime=regime.tag.value
        )


def _require_expansion(params: VParams) -> Tuple[float, float, float]:
    params = validate(params)
    _require_overdamped(params)
    require_validity(params)
    y, p, nbar = params.dimensionless()
    if y <= 0:
        raise OutsideValidity("analytic branches need delta > 0", delta_over_gamma=y)
    return y, p, nbar


def _require_branch(branch: Branch, p: float, p_critical: float) -> None:
    if branch is Branch.SUPERCRITICAL and not p > p_critical:
        raise WrongBranch(
            f"p = {p!r} is not above the critical alignment {p_critical!r}",
            p=p,
            p_critical=p_critical,
        )
    if branch is Branch.SUBCRITICAL and not p < p_critical:
        raise WrongBranch(
            f"p = {p!r} is not below the critical alignment {p_critical!r}",
            p=p,
            p_critical=p_critical,
        )
    if branch is Branch.P1 and not (p >= P1_THRESHOLD and p > p_critical):
        raise WrongBranch(f"p = {p!r} is not aligned within 1e-6 of unity", p=p)


def _scaled(params: VParams, rates: Sequence[float], weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return params.gamma * np.asarray(rates, dtype=float), np.asarray(weights, dtype=float)


# --- general splitting -----------------------------------------------------------------


def _general_form(params: VParams, branch: Branch) -> ModalForm:
    y, p, nbar = _require_expansion(params)
    _require_branch(branch, p, critical_p(nbar, y))
    c = coeffs(p)
    s = (y / nbar) ** 2
    det = c.t1 + c.t2 * s
    z10, z20, z30 = np.abs(c.z0)
    f21 = abs(c.f[1, 0])
    slope = y / nbar

    if branch is Branch.SUPERCRITICAL:
        rates = [z10 * nbar, f21 * y * y / nbar, z30 * nbar]
        middle = s * f21
        method = TrajectoryMethod.ANALYTIC_OVERDAMPED
    else:
        rates = [z10 * nbar, z20 * nbar, z30 * nbar]
        middle = z20
        method = TrajectoryMethod.ANALYTIC_SUBCRITICAL

    def row(x: np.ndarray, outer: float, third_scale: float) -> list:
        return [
            outer * (x[0] + x[1] * s) / (det * z10),
            outer * (x[2] + x[3] * s) / (det * middle),
            outer * third_scale * (x[4] + x[5] * s) / (det * z30),
        ]

    weights = np.array([row(c.A, 1.0, s), row(c.B, 1.0, s), row(c.C, slope, 1.0)])
    rates, weights = _scaled(params, rates, weights)
    return ModalForm(rates, weights, method, branch)


def rho_supercritical(params: VParams, t: float) -> StateVector:
    return _general_form(params, Branch.SUPERCRITICAL).state(t)


def rho_subcritical(params: VParams, t: float) -> StateVector:
    return _general_form(params, Branch.SUBCRITICAL).state(t)


def _p1_form(params: VParams) -> ModalForm:
    """Rounded p -> 1 coefficients for any splitting inside the window."""
    y, p, nbar = _require_expansion(params)
    _require_branch(Branch.P1, p, critical_p(nbar, y))
    s = (y / nbar) ** 2
    det = -4.0 + P1_T2 * s
    slope = y / nbar
    weights = np.array(
        [
            [(-4.0 + 2.92 * s) / 4.0, -1.0 / 3.0, 0.44 * s],
            [(-4.0 + 3.249 * s) / 4.0, 1.0, -0.89 * s],
            [slope * (-1.33 + 0.99 * s) / 4.0, -slope, slope * (1.33 - 0.25 * s)],
        ]
    ) / det
    rates, weights = _scaled(params, [4.0 * nbar, 0.75 * y * y / nbar, nbar], weights)
    return ModalForm(rates, weights, TrajectoryMethod.ANALYTIC_P1, Branch.P1)


def rho_p1(params: VParams, t: float) -> StateVector:
    return _p1_form(params).state(t)


# --- small splitting -------------------------------------------------------------------


def _require_small_splitting(params: VParams) -> Tuple[float, float, float]:
    y = validate(params).y
    if y > SMALL_SPLITTING_MAX:
        raise SplittingTooLarge(
            f"delta/gamma = {y!r} exceeds the small-splitting limit {SMALL_SPLITTING_MAX}",
            delta_over_gamma=y,
        )
    return _require_expansion(params)


def _small_delta_form(params: VParams, branch: Branch) -> ModalForm:
    y, p, nbar = _require_small_splitting(params)
    if y > SMALL_SPLITTING_WARN:
        _logger.warning(
            "Small-splitting form used above delta/gamma = 0.1",
            extra={"delta_over_gamma": y, "branch": branch.value},
        )
    _require_branch(branch, p, critical_p(nbar, y))
    slope = y / nbar
    method = TrajectoryMethod.ANALYTIC_SMALL_DELTA

    if branch is Branch.P1:
        weights = np.array(
            [
                [0.25, 1.0 / 12.0, 0.0],
                [0.25, -0.25, 0.0],
                [slope / 12.0, slope / 4.0, -slope / 3.0],
            ]
        )
        rates, weights = _scaled(params, [4.0 * nbar, 0.75 * y * y / nbar, nbar], weights)
        return ModalForm(rates, weights, method, branch)

    c = coeffs(p)
    z10, z20, z30 = np.abs(c.z0)
    f21 = abs(c.f[1, 0])
    if branch is Branch.SUPERCRITICAL:
        rates = [z10 * nbar, f21 * y * y / nbar, z30 * nbar]
        weights = np.array(
            [
                [c.A[0] / z10, c.A[3] / f21, 0.0],
                [c.B[0] / z10, c.B[3] / f21, 0.0],
                [slope * c.C[0] / z10, slope * c.C[3] / f21, slope * c.C[4] / z30],
            ]
        )
    else:
        rates = [z10 * nbar, z20 * nbar, z30 * nbar]
        weights = np.array(
            [
                [c.A[0] / z10, c.A[2] / z20, 0.0],
                [c.B[0] / z10, c.B[2] / z20, 0.0],
                [slope * c.C[0] / z10, slope * c.C[2] / z20, slope * c.C[4] / z30],
            ]
        )
    rates, weights = _scaled(params, rates, weights / c.t1)
    return ModalForm(rates, weights, method, branch)


def rho_small_delta(params: VParams, t: float, branch: Union[Branch, str]) -> StateVector:
    return _small_delta_form(params, Branch(branch)).state(t)


# --- exact modal sum -------------------------------------------------------------------


def _modal_form(params: VParams, spectrum: Optional[Spectrum] = None) -> ModalForm:
    params = validate(params)
    system = build(params)
    require_invertible(params, system)
    spectrum = spectrum or eigenvalues_cardano(params)
    # p = 0 or delta = 0 decouples a block, so the closed column is 0/0 there
    structural = params.p == 0 or params.delta == 0
    vectors = eigenvectors_exact(params, spectrum, fallback=structural)
    x_ss = np.linalg.solve(system.a_matrix, -system.drive)
    # (V^-1 d)_k / lambda_k = -(V^-1 x_ss)_k
    amplitudes = np.linalg.solve(vectors, x_ss.astype(complex))
    weights = vectors * amplitudes[np.newaxis, :]
    return ModalForm(-spectrum.lambdas, weights, TrajectoryMethod.ANALYTIC_MODAL)


def dm_general(params: VParams, spectrum: Optional[Spectrum], t: float) -> StateVector:
    """Duhamel sum over the exact eigenvectors, valid in every regime."""
    return _modal_form(params, spectrum).state(t)


# --- dispatch --------------------------------------------------------------------------


def select_form(params: VParams) -> ModalForm:
    """Pick the closed form the way analytic-auto does."""
    params = validate(params)
    y, p, nbar = params.dimensionless()
    if y <= 0 or not in_validity_window(params) or classify(params).tag is not RegimeTag.OVERDAMPED:
        return _modal_form(params)
    if y <= SMALL_SPLITTING_MAX:
        return _small_delta_auto(params)
    branch = Branch.SUPERCRITICAL if p > critical_p(nbar, y) else Branch.SUBCRITICAL
    return _general_form(params, branch)


def _small_delta_auto(params: VParams) -> ModalForm:
    y, p, nbar = _require_small_splitting(params)
    p_critical = critical_p(nbar, y)
    if p >= P1_THRESHOLD and p > p_critical:
        return _small_delta_form(params, Branch.P1)
    branch = Branch.SUPERCRITICAL if p > p_critical else Branch.SUBCRITICAL
    return _small_delta_form(params, branch)


_FORMS = {
    TrajectoryMethod.ANALYTIC_OVERDAMPED: lambda params: _general_form(params, Branch.SUPERCRITICAL),
    TrajectoryMethod.ANALYTIC_SUBCRITICAL: lambda params: _general_form(params, Branch.SUBCRITICAL),
    TrajectoryMethod.ANALYTIC_SMALL_DELTA: _small_delta_auto,
    TrajectoryMethod.ANALYTIC_P1: _p1_form,
    TrajectoryMethod.ANALYTIC_MODAL: _modal_form,
}


def analytic_trajectory(
    params: VParams, times: Sequence[float], method: Union[TrajectoryMethod, str]
) -> Trajectory:
    method = TrajectoryMethod(method)
    if method not in _FORMS:
        raise WrongBranch(f"{method.value} is not an analytic form", method=method.value)
    form = _FORMS[method](validate(params))
    grid = np.asarray(times, dtype=float)
    return Trajectory(grid, form.evaluate(grid), form.method, params)


def analytic_auto(params: VParams, times: Sequence[float]) -> Tuple[Trajectory, ModalForm]:
    form = select_form(params)
    _logger.info(
        "Analytic form selected",
        extra={
            "method": form.method.value,
            "branch": form.branch.value if form.branch else None,
            "params": params.as_dict(),
        },
    )
    grid = np.asarray(times, dtype=float)
    return Trajectory(grid, form.evaluate(grid), form.method, params), form


__all__ = [
    "ModalForm",
    "analytic_auto",
    "analytic_trajectory",
    "coeffs",
    "dm_general",
    "rho_p1",
    "rho_small_delta",
    "rho_subcritical",
    "rho_supercritical",
    "select_form",
]
