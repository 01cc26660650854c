"""Discriminant of the characteristic cubic, regime classification and boundaries."""
from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from ..errors import NoRoot
from ..models import DiscriminantCoeffs, Regime, RegimeTag, VParams, validate

CRITICAL_RTOL = 1e-9
SCAN_FACTOR = 2.0
SCAN_LOW = 1e-6
_logger = logging.getLogger(__name__)


def cardano_terms(y: float, p: float, nbar: float) -> Tuple[float, float, float]:
    """(A, B, E) of the depressed cubic in units gamma = 1; D = B^3 + E^2.

    E = C - 3A(B + A^2)/2 is expanded in nbar, where every term is non-negative.
    """
    p2 = p * p
    big_a = (5.0 * nbar + 3.0) / 3.0
    big_b = (y * y - p2 - 4.0 * p2 * nbar - (4.0 / 3.0 + 3.0 * p2) * nbar * nbar) / 3.0
    big_e = ((4.0 * y * y + 2.0 * p2) * nbar + 8.0 * p2 * nbar**2 + (16.0 / 9.0 + 6.0 * p2) * nbar**3) / 6.0
    return big_a, big_b, big_e


def _direct(y: float, p: float, nbar: float) -> float:
    # B^3 and E^2 cancel to many digits near the boundary; sum them exactly
    y, p, nbar = (Fraction(float(value)) for value in (y, p, nbar))
    p2, y2 = p * p, y * y
    big_b = (y2 - p2 - 4 * p2 * nbar - (Fraction(4, 3) + 3 * p2) * nbar**2) / 3
    big_e = ((4 * y2 + 2 * p2) * nbar + 8 * p2 * nbar**2 + (Fraction(16, 9) + 6 * p2) * nbar**3) / 6
    return float(big_b**3 + big_e**2)


def discriminant_direct(params: VParams) -> float:
    params = validate(params)
    return params.gamma**6 * _direct(*params.dimensionless())


def discriminant_coeffs(p: float, y: float) -> DiscriminantCoeffs:
    """d0..d6 from 108 D = 4 beta^3 + 3 q^2 with beta, q polynomials in nbar."""
    p2 = p * p
    beta = np.array([y * y - p2, -4.0 * p2, -(4.0 / 3.0 + 3.0 * p2)])
    q = np.array([0.0, 4.0 * y * y + 2.0 * p2, 8.0 * p2, (16.0 + 54.0 * p2) / 9.0])
    d = P.polyadd(4.0 * P.polypow(beta, 3), 3.0 * P.polypow(q, 2))
    return DiscriminantCoeffs(d=np.asarray(d, dtype=float), p=p, y=y)


def discriminant_table(p: float, y: float) -> DiscriminantCoeffs:
    """The tabulated closed forms of d0..d6, written out term by term."""
    p2, y2 = p * p, y * y
    w = y2 - p2
    k = 4.0 + 9.0 * p2
    d = np.array(
        [
            4.0 * w**3,
            -48.0 * p2 * w**2,
            -4.0 * k * w**2 + 192.0 * p2 * p2 * w + 12.0 * (2.0 * y2 + p2) ** 2,
            -256.0 * p2**3 + 32.0 * p2 * k * w + 96.0 * p2 * (2.0 * y2 + p2),
            (4.0 / 3.0) * k * k * w
            - 64.0 * p2 * p2 * (1.0 + 9.0 * p2)
            + (8.0 / 3.0) * (8.0 + 27.0 * p2) * (2.0 * y2 + p2),
            -16.0 * p2 * p2 * (6.0 + 27.0 * p2),
            -36.0 * p2 * p2 * (1.0 + 3.0 * p2),
        ]
    )
    return DiscriminantCoeffs(d=d, p=p, y=y)


def discriminant_poly(params: VParams) -> float:
    params = validate(params)
    y, p, nbar = params.dimensionless()
    return params.gamma**6 * discriminant_coeffs(p, y).evaluate(nbar) / 108.0


def critical_scale(p: float, nbar: float) -> float:
    return max(1.0, 36.0 * p**4 * (1.0 + 3.0 * p * p) * nbar**6)


def classify(params: VParams) -> Regime:
    params = validate(params)
    y, p, nbar = params.dimensionless()
    value = _direct(y, p, nbar)
    if abs(108.0 * value) <= CRITICAL_RTOL * critical_scale(p, nbar):
        tag = RegimeTag.CRITICAL
    elif value > 0:
        tag = RegimeTag.UNDERDAMPED
    else:
        tag = RegimeTag.OVERDAMPED
    return Regime(tag=tag, discriminant_value=params.gamma**6 * value)


def slope_f(p: float) -> float:
    """Slope f(p) of the strong-pumping boundary delta/gamma = f(p) nbar."""
    p2 = p * p
    big_p = 16.0 + 60.0 * p2 + 27.0 * p2 * p2
    big_q = -9.0 * p2 * p2 * (1.0 + 3.0 * p2)
    root = math.sqrt(big_q * big_q / 4.0 + big_p**3 / 27.0)
    t1 = -big_q / 2.0 + root
    t2 = -big_q / 2.0 - root
    return math.sqrt(max(0.0, float(np.cbrt(t1) + np.cbrt(t2))))


def boundary_delta(p: float, nbar: float) -> float:
    """Largest delta/gamma where D changes sign at fixed (p, nbar)."""
    if not (p > 0 and nbar > 0):
        raise NoRoot("boundary search needs p > 0 and nbar > 0", p=p, nbar=nbar)
    upper = 1e3 * max(1.0, nbar)

    def sign_function(y: float) -> float:
        return discriminant_coeffs(p, y).evaluate(nbar)

    nodes = [SCAN_LOW]
    while nodes[-1] < upper:
        nodes.append(min(nodes[-1] * SCAN_FACTOR, upper))
    values = [sign_function(y) for y in nodes]
    bracket = None
    for lo, hi, f_lo, f_hi in zip(nodes[:-1], nodes[1:], values[:-1], values[1:]):
        if f_lo == 0.0:
            bracket = (lo, lo)
        elif f_lo * f_hi < 0:
            bracket = (lo, hi)
    if values[-1] == 0.0:
        return nodes[-1]
    if bracket is None:
        raise NoRoot("no sign change of D in the search bracket", p=p, nbar=nbar)
    if bracket[0] == bracket[1]:
        return bracket[0]
    root = brentq(sign_function, *bracket, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    _logger.debug("Boundary located", extra={"p": p, "nbar": nbar, "delta_over_gamma": root})
    return float(root)


__all__ = [
    "boundary_delta",
    "cardano_terms",
    "classify",
    "critical_scale",
    "discriminant_coeffs",
    "discriminant_direct",
    "discriminant_poly",
    "discriminant_table",
    "slope_f",
]
