"""Truncated power series in one variable, stored as coefficient arrays."""
from __future__ import annotations

from typing import Sequence

import numpy as np


def as_series(coeffs: Sequence[complex], order: int) -> np.ndarray:
    out = np.zeros(order + 1, dtype=complex)
    values = np.asarray(coeffs, dtype=complex)[: order + 1]
    out[: values.size] = values
    return out


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = min(a.size, b.size)
    return np.convolve(a[:n], b[:n])[:n]


def power(a: np.ndarray, mu: float) -> np.ndarray:
    """Series of a**mu on the principal branch of a[0]**mu.

    Uses the recurrence k a0 b_k = sum_{j=1..k} (j (mu + 1) - k) a_j b_{k-j}.
    """
    if a[0] == 0:
        raise ZeroDivisionError("series power needs a nonzero constant term")
    out = np.zeros_like(a, dtype=complex)
    out[0] = np.power(complex(a[0]), mu)
    for k in range(1, a.size):
        j = np.arange(1, k + 1)
        out[k] = np.sum((j * (mu + 1.0) - k) * a[j] * out[k - j]) / (k * a[0])
    return out


def inverse(a: np.ndarray) -> np.ndarray:
    return power(a, -1.0)


def evaluate(a: np.ndarray, x: float) -> complex:
    return complex(np.polynomial.polynomial.polyval(x, a))


__all__ = ["as_series", "evaluate", "inverse", "multiply", "power"]
