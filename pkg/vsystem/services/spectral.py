"""Eigenvalues and eigenvectors of the generator: Cardano, numeric and 1/nbar series."""
from __future__ import annotations

import logging
import math
from dataclasses import replace
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment

from ..errors import DegenerateEigenvector, NoCrossing, OutsideValidity, WrongRegime
from ..models import (
    Branch,
    EigenvectorExpansion,
    EigenvectorSeries,
    Lifetime,
    RegimeTag,
    Spectrum,
    SpectrumMethod,
    VParams,
    ZCoeffs,
    validate,
)
from ..utils import series
from .generator import build, characteristic_coeffs, polish_smallest
from .regime import cardano_terms, classify, discriminant_coeffs

OMEGA = complex(-0.5, math.sqrt(3.0) / 2.0)
ROOT_LABELS: Tuple[Tuple[complex, complex], ...] = (
    (1.0 + 0.0j, 1.0 + 0.0j),
    (OMEGA * OMEGA, OMEGA),
    (OMEGA, OMEGA * OMEGA),
)
Z_ORDER = 8
EIGENVECTOR_ORDER = 4
MIN_NBAR = 100.0
SUPERCRITICAL_LIFETIME_FACTOR = 1.34
DEGENERATE_RTOL = 1e-12
DETUNING_RETRY = 1e-10
EPSILON_BRACKET = (1e-14, 0.1)
_logger = logging.getLogger(__name__)


# --- exact and numeric eigenvalues -------------------------------------------------


def _cardano_roots(y: float, p: float, nbar: float) -> np.ndarray:
    big_a, big_b, big_e = cardano_terms(y, p, nbar)
    sqrt_d = np.sqrt(complex(big_b**3 + big_e**2))
    s_plus = big_e + sqrt_d
    s_minus = big_e - sqrt_d
    if abs(s_plus) < abs(s_minus):
        # (E + sqrt D)(E - sqrt D) = -B^3 recovers the cancelled branch accurately.
        s_plus = -(big_b**3) / s_minus
    if s_plus == 0:
        return np.full(3, -big_a, dtype=complex)
    t = np.power(s_plus, 1.0 / 3.0)
    return np.array([-big_a + alpha * big_b / t - beta * t for alpha, beta in ROOT_LABELS])


def _normalize_column(vector: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(vector))
    if abs(vector[2]) > 1e-8 * scale:
        return vector / vector[2]
    return vector / vector[int(np.argmax(np.abs(vector)))]


def null_vector(a_matrix: np.ndarray, lam: complex) -> np.ndarray:
    """Eigenvector for lam as the right singular vector of A - lam I."""
    _, _, vh = np.linalg.svd(a_matrix - lam * np.eye(3))
    return _normalize_column(vh[-1].conj())


def eigenvalues_cardano(params: VParams) -> Spectrum:
    params = validate(params)
    y, p, nbar = params.dimensionless()
    lambdas = params.gamma * _cardano_roots(y, p, nbar)
    lambdas = polish_smallest(lambdas, characteristic_coeffs(params)[2])
    a_matrix = build(params).a_matrix
    vectors = np.column_stack([null_vector(a_matrix, lam) for lam in lambdas])
    return Spectrum(lambdas=lambdas, eigvecs=vectors, method=SpectrumMethod.CARDANO)


def eigenvalues_numeric(params: VParams) -> Spectrum:
    """LAPACK eigendecomposition, kept free of any cubic-formula code."""
    a_matrix = build(params).a_matrix
    lambdas, vectors = np.linalg.eig(a_matrix)
    order = np.lexsort((lambdas.imag, lambdas.real))
    lambdas = lambdas[order].astype(complex)
    vectors = np.column_stack([_normalize_column(vectors[:, k].astype(complex)) for k in order])
    return Spectrum(lambdas=lambdas, eigvecs=vectors, method=SpectrumMethod.NUMERIC)


def setwise_distance(first: np.ndarray, second: np.ndarray) -> float:
    """Largest pairwise gap between two eigenvalue sets under the optimal matching."""
    cost = np.abs(np.subtract.outer(np.asarray(first), np.asarray(second)))
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def eigen_residuals(a_matrix: np.ndarray, spectrum: Spectrum) -> np.ndarray:
    """||A v - lambda v|| / ||v|| per column."""
    out = []
    for k, lam in enumerate(spectrum.lambdas):
        v = spectrum.eigvecs[:, k]
        out.append(np.linalg.norm(a_matrix @ v - lam * v) / np.linalg.norm(v))
    return np.array(out)


# --- validity window and the z-series ------------------------------------------------


def in_validity_window(params: VParams) -> bool:
    y, p, nbar = params.dimensionless()
    if nbar < MIN_NBAR:
        return False
    if y <= 1.0:
        return p > 0.1
    return 0.89 < p <= 1.0


def require_validity(params: VParams, force: bool = False) -> None:
    if force or in_validity_window(params):
        return
    y, p, nbar = params.dimensionless()
    raise OutsideValidity(
        "outside the expansion window (nbar >= 100; p > 0.1 for delta/gamma <= 1,"
        " 0.89 < p <= 1 otherwise)",
        p=p,
        delta_over_gamma=y,
        nbar=nbar,
    )


def z_series(p: float, y: float, order: int = Z_ORDER) -> Tuple[np.ndarray, complex]:
    """Rows z_j0..z_j,order of lambda_j / r in powers of x = 1/nbar, and K."""
    if p <= 0:
        raise OutsideValidity("the 1/nbar series needs p > 0", p=p)
    p2 = p * p
    d = discriminant_coeffs(p, y).d
    d_over_r6 = series.as_series(d[::-1] / 108.0, order)
    e_over_r3 = series.as_series(
        [(16.0 + 54.0 * p2) / 9.0, 8.0 * p2, 4.0 * y * y + 2.0 * p2], order
    ) / 6.0
    b_over_r2 = series.as_series([-(4.0 / 3.0 + 3.0 * p2), -4.0 * p2, y * y - p2], order) / 3.0
    a_over_r = series.as_series([5.0 / 3.0, 1.0], order)

    s = e_over_r3 + series.power(d_over_r6, 0.5)
    t = series.power(s, 1.0 / 3.0)
    b_over_t = series.multiply(b_over_r2, series.power(s, -1.0 / 3.0))
    rows = [-a_over_r + alpha * b_over_t - beta * t for alpha, beta in ROOT_LABELS]
    return np.array(rows), complex(t[0])


def z_expansion(params: VParams, force: bool = False) -> ZCoeffs:
    params = validate(params)
    require_validity(params, force)
    y, p, _ = params.dimensionless()
    z, k_factor = z_series(p, y)
    at_zero, _ = z_series(p, 0.0, order=2)
    at_one, _ = z_series(p, 1.0, order=2)
    f = np.column_stack([at_one[:, 2] - at_zero[:, 2], at_zero[:, 2]])
    return ZCoeffs(z=z, k_factor=k_factor, f=f, p=p, y=y)


def closed_form_limits(p: float) -> dict:
    """Leading coefficients available in closed form, used to anchor the series."""
    root = math.sqrt(1.0 + 3.0 * p * p)
    one_minus_p2 = (1.0 - p) * (1.0 + p)
    z0 = np.array([-2.0 - root, -3.0 * one_minus_p2 / (2.0 + root), -1.0])
    z1 = np.array([-1.0 - 2.0 * p * p / root, -1.0 + 2.0 * p * p / root, -1.0])
    f1 = -(z0[:2] + 3.0) / ((z0[:2] + 1.0) * (4.0 + 2.0 * z0[:2]))
    f22 = p * p * one_minus_p2 / (2.0 * root**3)
    f = np.array([[f1[0], -f22], [f1[1], f22], [-(f1[0] + f1[1]), 0.0]])
    return {"z0": z0, "z1": z1, "f": f}


def eigenvalues_expansion(params: VParams, order: int = 2, force: bool = False) -> Spectrum:
    if not 0 <= order <= Z_ORDER:
        raise OutsideValidity(f"expansion order must lie in [0, {Z_ORDER}]", order=order)
    coeffs = z_expansion(params, force=force)
    lambdas = coeffs.lambdas(params, order)
    vectors, bad = _formula_columns(params, lambdas)
    a_matrix = build(params).a_matrix
    for k in bad:
        vectors[:, k] = null_vector(a_matrix, lambdas[k])
    return Spectrum(lambdas=lambdas, eigvecs=vectors, method=SpectrumMethod.EXPANSION)


# --- critical alignment and lifetimes ------------------------------------------------


def _z20_exact(epsilon: float) -> float:
    p = 1.0 - epsilon
    return -3.0 * epsilon * (2.0 - epsilon) / (2.0 + math.sqrt(1.0 + 3.0 * p * p))


def critical_p(nbar: float, delta_over_gamma: float) -> float:
    """Alignment where |z20| and |z22| x^2 cross, searched for 1 - p in [1e-14, 0.1]."""
    if nbar < MIN_NBAR:
        raise OutsideValidity("critical alignment needs nbar >= 100", nbar=nbar)
    x2 = 1.0 / (nbar * nbar)

    def gap(log_epsilon: float) -> float:
        epsilon = math.exp(log_epsilon)
        z, _ = z_series(1.0 - epsilon, delta_over_gamma, order=2)
        return abs(_z20_exact(epsilon)) - abs(z[1, 2]) * x2

    lo, hi = (math.log(bound) for bound in EPSILON_BRACKET)
    if gap(lo) * gap(hi) > 0:
        raise NoCrossing(
            "|z20| and |z22| x^2 do not cross for 1 - p in [1e-14, 0.1]",
            nbar=nbar,
            delta_over_gamma=delta_over_gamma,
        )
    log_epsilon = brentq(gap, lo, hi, xtol=1e-10)
    return 1.0 - math.exp(log_epsilon)


def coherence_lifetime(params: VParams) -> Lifetime:
    params = validate(params)
    y, p, nbar = params.dimensionless()
    if nbar < MIN_NBAR:
        raise OutsideValidity("lifetime formulas need nbar >= 100", nbar=nbar)
    regime = classify(params)
    if regime.tag is not RegimeTag.OVERDAMPED:
        raise WrongRegime(
            f"{regime.tag.value}: coherence lifetime formulas need the overdamped regime",
            regime=regime.tag.value,
        )
    spectrum = eigenvalues_cardano(params)
    slowest = int(np.argmin(np.abs(spectrum.lambdas)))
    if slowest != 1:
        _logger.warning(
            "Slow mode does not carry the second Cardano label",
            extra={"label": slowest + 1, "params": params.as_dict()},
        )
    tau_exact = 1.0 / abs(spectrum.lambdas[slowest].real)

    p_critical = critical_p(nbar, y)
    if p > p_critical:
        branch = Branch.SUPERCRITICAL
        tau_formula = SUPERCRITICAL_LIFETIME_FACTOR * nbar / (params.gamma * y * y)
    else:
        branch = Branch.SUBCRITICAL
        tau_formula = 1.0 / (params.gamma * abs(_z20_exact(1.0 - p)) * nbar)
    tau_weak = 2.0 / (params.gamma * y * y)
    return Lifetime(
        tau_exact=tau_exact,
        tau_formula=tau_formula,
        branch=branch,
        p_critical=p_critical,
        tau_weak_pumping=tau_weak,
        ratio=tau_formula / tau_weak,
    )


# --- eigenvectors ----------------------------------------------------------------------


def _formula_columns(params: VParams, lambdas: np.ndarray) -> Tuple[np.ndarray, List[int]]:
    gamma, delta, p, r = params.gamma, params.delta, params.p, params.r
    a = 3.0 * r + gamma
    b = r + gamma
    one_minus_p2 = (1.0 - p) * (1.0 + p)
    threshold = DEGENERATE_RTOL * np.linalg.norm(build(params).a_matrix, 2) ** 2
    columns = np.ones((3, 3), dtype=complex)
    bad: List[int] = []
    for k, lam in enumerate(lambdas):
        shifted_b = lam + b
        if delta > 0 and abs(shifted_b) >= 0.01 * (abs(lam) + b):
            denominator = delta * delta * (lam + a) / shifted_b
        else:
            denominator = -lam * lam - (a + b) * lam - a * b * one_minus_p2
        if abs(denominator) < threshold:
            bad.append(k)
            continue
        columns[0, k] = delta * p * b / denominator
        columns[1, k] = -delta * (a + lam) / denominator
    return columns, bad


def eigenvectors_exact(
    params: VParams, spectrum: Spectrum, fallback: bool = False
) -> np.ndarray:
    """Columns [delta p b / D_j, -delta (a + lambda_j) / D_j, 1]."""
    params = validate(params)
    columns, bad = _formula_columns(params, spectrum.lambdas)
    if not bad:
        return columns
    detuned = replace(params, delta=params.delta + DETUNING_RETRY * params.gamma)
    retry = eigenvalues_cardano(detuned)
    columns, bad = _formula_columns(detuned, retry.lambdas)
    if not bad:
        _logger.info("Eigenvectors taken at a detuned splitting", extra={"params": params.as_dict()})
        return columns
    if not fallback:
        raise DegenerateEigenvector(
            f"eigenvector denominator vanishes for column {bad[0] + 1}", column=bad[0] + 1
        )
    a_matrix = build(params).a_matrix
    columns, bad = _formula_columns(params, spectrum.lambdas)
    for k in bad:
        columns[:, k] = null_vector(a_matrix, spectrum.lambdas[k])
    return columns


class LeadingTerms(NamedTuple):
    """Delta-independent leading coefficients of the eigenvector denominators."""

    p: float
    z0: np.ndarray
    z1: np.ndarray
    f: np.ndarray
    F: np.ndarray
    L0: np.ndarray
    g: float


def leading_terms(p: float) -> LeadingTerms:
    at_zero, _ = z_series(p, 0.0, order=2)
    at_one, _ = z_series(p, 1.0, order=2)
    z0 = at_zero[:, 0].real
    z1 = at_zero[:, 1].real
    f = np.column_stack([(at_one[:, 2] - at_zero[:, 2]).real, at_zero[:, 2].real])
    one_minus_p2 = (1.0 - p) * (1.0 + p)
    weight = 4.0 + 2.0 * z0
    F = np.column_stack([weight * f[:, 0], weight * f[:, 1] + (z1 + 1.0) ** 2 - p * p])
    L0 = z0 * z0 + 4.0 * z0 + 3.0 * one_minus_p2
    g = float(f[0, 0] / (F[0, 0] * weight[0]))
    return LeadingTerms(p=p, z0=z0, z1=z1, f=f, F=F, L0=L0, g=g)


def cofactor_coefficients(lead: LeadingTerms) -> Tuple[np.ndarray, float, float]:
    """m1..m16 of the truncated cofactors and the determinant coefficients T1, T2."""
    p, g = lead.p, lead.g
    z10, z20, z30 = lead.z0
    f11, f21 = lead.F[0, 0], lead.F[1, 0]
    l30 = lead.L0[2]
    m = np.array(
        [
            (3.0 + z20) / f21,
            -(3.0 + z30) / l30,
            p / f21,
            -p / l30,
            -(3.0 + z10) / f11,
            (3.0 + z30) / l30 - g * (1.0 + z10),
            -p / f11,
            p * (g + 1.0 / l30),
            p * (z30 - z10) / (f11 * l30),
            -p * g * (4.0 + z10 + z30) / l30,
            (3.0 + z10) / f11 - (3.0 + z20) / f21,
            g * (1.0 + z10),
            p * (1.0 / f11 - 1.0 / f21),
            -p * g,
            p * (z10 - z20) / (f11 * f21),
            p * g * (4.0 + z10 + z20) / f21,
        ]
    )
    t1 = p * (-m[0] / f11 - m[4] / f21)
    t2 = p * (-m[1] / f11 + g * m[0] - m[5] / f21 - m[10] / l30)
    return m, float(t1), float(t2)


def _truncated_vmatrix(lead: LeadingTerms, u: float, s: float) -> np.ndarray:
    p, g = lead.p, lead.g
    z10, z20, z30 = lead.z0
    f11, f21 = lead.F[0, 0], lead.F[1, 0]
    l30 = lead.L0[2]
    return np.array(
        [
            [u * p * (-1.0 / f11 + g * s), -u * p / f21, -u * s * p / l30],
            [u * ((3.0 + z10) / f11 + g * (1.0 + z10) * s), u * (3.0 + z20) / f21, u * s * (3.0 + z30) / l30],
            [1.0, 1.0, 1.0],
        ]
    )


def eigenvector_expansion(params: VParams, force: bool = False) -> EigenvectorExpansion:
    params = validate(params)
    require_validity(params, force)
    y, p, nbar = params.dimensionless()
    if y <= 0:
        raise OutsideValidity("the eigenvector expansion needs delta > 0", delta_over_gamma=y)
    lead = leading_terms(p)
    m, t1, t2 = cofactor_coefficients(lead)
    u = nbar / y
    s = (y / nbar) ** 2
    z10, z20, z30 = lead.z0
    t13 = p * (z20 - z30) / (lead.F[1, 0] * lead.L0[2])
    cofactors = np.array(
        [
            [u * (m[0] + m[1] * s), u * (m[2] + m[3] * s), t13],
            [u * (m[4] + m[5] * s), u * (m[6] + m[7] * s), m[8] + m[9] * s],
            [u * (m[10] + m[11] * s), u * (m[12] + m[13] * s), u * u * (m[14] + m[15] * s)],
        ]
    )
    return EigenvectorExpansion(
        vmatrix=_truncated_vmatrix(lead, u, s),
        cofactors=cofactors,
        det=(t1 + t2 * s) * u * u,
        t1=t1,
        t2=t2,
        m=m,
    )


def eigenvector_series(params: VParams, force: bool = False) -> EigenvectorSeries:
    """Eigenvector components from the series of 1/D_j in x, with lambda truncated at x^2."""
    params = validate(params)
    require_validity(params, force)
    y, p, nbar = params.dimensionless()
    x = 1.0 / nbar
    order = EIGENVECTOR_ORDER
    z, _ = z_series(p, y, order=2)
    z = z.real
    one_minus_p2 = (1.0 - p) * (1.0 + p)
    L = np.zeros((3, order + 1))
    a_coeffs = np.zeros((3, order + 1))
    b_coeffs = np.zeros((3, order + 1))
    matrix = np.ones((3, 3))
    for j in range(3):
        zj = series.as_series(z[j], order)
        denominator = (
            series.multiply(zj, zj)
            + series.multiply(series.as_series([4.0, 2.0], order), zj)
            + one_minus_p2 * series.as_series([3.0, 4.0, 1.0], order)
        ).real
        L[j] = denominator
        shift = 2 if j < 2 else 0
        lead = denominator[shift]
        k_series = series.inverse(series.as_series(denominator[shift:], order)) * lead
        a_coeffs[j] = series.multiply(series.as_series([1.0, 1.0], order), k_series).real
        b_coeffs[j] = series.multiply(
            series.as_series([3.0 + z[j, 0], 1.0 + z[j, 1], z[j, 2]], order), k_series
        ).real
        prefactor = y * x ** (1 - shift) / lead
        matrix[0, j] = -p * prefactor * series.evaluate(a_coeffs[j], x).real
        matrix[1, j] = prefactor * series.evaluate(b_coeffs[j], x).real
    return EigenvectorSeries(L=L, a=a_coeffs, b=b_coeffs, matrix=matrix)


__all__ = [
    "LeadingTerms",
    "ROOT_LABELS",
    "closed_form_limits",
    "coherence_lifetime",
    "cofactor_coefficients",
    "critical_p",
    "eigen_residuals",
    "eigenvalues_cardano",
    "eigenvalues_expansion",
    "eigenvalues_numeric",
    "eigenvector_expansion",
    "eigenvector_series",
    "eigenvectors_exact",
    "in_validity_window",
    "leading_terms",
    "null_vector",
    "require_validity",
    "setwise_distance",
    "z_expansion",
    "z_series",
]
