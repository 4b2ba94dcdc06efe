"""Physicist's Hermite polynomials and normalized oscillator functions."""

from __future__ import annotations

import numpy as np

HERMITE_MAX_N = 60

_PI_QUARTER = np.pi ** 0.25


class HermiteOverflowError(ValueError):
    pass


def hermite_eval(n: int, x):
    """H_n(x) and H_n'(x) by the three-term recurrence.

    Raw values of H_n grow like (2x)^n; n is capped at HERMITE_MAX_N to keep
    the unnormalized recurrence away from overflow. Normalized eigenfunction
    evaluation goes through :func:`hermite_normalized_table` instead, which
    has no cap.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > HERMITE_MAX_N:
        raise HermiteOverflowError(
            f"n={n} exceeds the overflow cap {HERMITE_MAX_N} for raw Hermite values"
        )
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev, np.zeros_like(x)
    h = 2.0 * x
    for k in range(1, n):
        h, h_prev = 2.0 * x * h - 2.0 * k * h_prev, h
    return h, 2.0 * n * h_prev


def hermite_normalized_table(n_max: int, y: np.ndarray) -> np.ndarray:
    """Values of hhat_n(y) = H_n(y) / (pi^{1/4} sqrt(2^n n!)) for n <= n_max.

    hhat_n times exp(-y^2/2) is the L2-normalized oscillator eigenfunction.
    Returns an array of shape (n_max + 1,) + y.shape.
    """
    y = np.asarray(y, dtype=float)
    out = np.empty((n_max + 1,) + y.shape)
    out[0] = 1.0 / _PI_QUARTER
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * y / _PI_QUARTER
    for n in range(1, n_max):
        out[n + 1] = y * np.sqrt(2.0 / (n + 1)) * out[n] - np.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


def hermite_normalized_deriv(table: np.ndarray) -> np.ndarray:
    """d/dy of the hhat_n values in a table from hermite_normalized_table.

    Uses hhat_n' = sqrt(2n) hhat_{n-1}.
    """
    n_max = table.shape[0] - 1
    out = np.zeros_like(table)
    for n in range(1, n_max + 1):
        out[n] = np.sqrt(2.0 * n) * table[n - 1]
    return out
