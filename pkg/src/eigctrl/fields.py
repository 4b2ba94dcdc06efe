"""Scalar fields with analytic gradients and Laplacians.

All evaluators are batched: ``value`` maps an (n, d) array to (n,),
``grad`` to (n, d) and ``laplacian`` to (n,). Single points of shape (d,)
are promoted automatically by the helpers in :mod:`eigctrl.problem`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ScalarField:
    """A scalar function together with its analytic derivatives."""

    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    laplacian: Callable[[np.ndarray], np.ndarray]


def zero_field() -> ScalarField:
    return ScalarField(
        value=lambda x: np.zeros(x.shape[0]),
        grad=lambda x: np.zeros_like(x),
        laplacian=lambda x: np.zeros(x.shape[0]),
    )


def constant_field(c: float) -> ScalarField:
    return ScalarField(
        value=lambda x: np.full(x.shape[0], float(c)),
        grad=lambda x: np.zeros_like(x),
        laplacian=lambda x: np.zeros(x.shape[0]),
    )


def quadratic_field(M, b=None, c: float = 0.0) -> ScalarField:
    """x^T M x + b^T x + c with M symmetrized internally."""
    M = np.asarray(M, dtype=float)
    M = 0.5 * (M + M.T)
    d = M.shape[0]
    b = np.zeros(d) if b is None else np.asarray(b, dtype=float)
    trM = np.trace(M)

    def value(x):
        return np.einsum("ni,ij,nj->n", x, M, x) + x @ b + c

    def grad(x):
        return 2.0 * x @ M + b

    def laplacian(x):
        return np.full(x.shape[0], 2.0 * trM)

    return ScalarField(value, grad, laplacian)


def linear_field(b) -> ScalarField:
    b = np.asarray(b, dtype=float)
    return ScalarField(
        value=lambda x: x @ b,
        grad=lambda x: np.broadcast_to(b, x.shape).copy(),
        laplacian=lambda x: np.zeros(x.shape[0]),
    )


def double_well_field(coeffs) -> ScalarField:
    """sum_i c_i (x_i^2 - 1)^2, the separable multi-well landscape."""
    c = np.asarray(coeffs, dtype=float)

    def value(x):
        return ((x ** 2 - 1.0) ** 2) @ c

    def grad(x):
        return 4.0 * c * x * (x ** 2 - 1.0)

    def laplacian(x):
        return (12.0 * x ** 2 - 4.0) @ c

    return ScalarField(value, grad, laplacian)


def ring_field(alpha: float, radius: float) -> ScalarField:
    """alpha * (|x|^2 - 2 R^2) |x|^2, minimized on the sphere |x| = R."""
    a = float(alpha)
    R2 = float(radius) ** 2

    def value(x):
        r2 = np.sum(x ** 2, axis=1)
        return a * (r2 - 2.0 * R2) * r2

    def grad(x):
        r2 = np.sum(x ** 2, axis=1)
        return (4.0 * a * (r2 - R2))[:, None] * x

    def laplacian(x):
        d = x.shape[1]
        r2 = np.sum(x ** 2, axis=1)
        return a * ((8.0 + 4.0 * d) * r2 - 4.0 * d * R2)

    return ScalarField(value, grad, laplacian)


def sum_fields(*fields: ScalarField) -> ScalarField:
    return ScalarField(
        value=lambda x: sum(f.value(x) for f in fields),
        grad=lambda x: sum(f.grad(x) for f in fields),
        laplacian=lambda x: sum(f.laplacian(x) for f in fields),
    )


def scale_field(f: ScalarField, s: float) -> ScalarField:
    s = float(s)
    return ScalarField(
        value=lambda x: s * f.value(x),
        grad=lambda x: s * f.grad(x),
        laplacian=lambda x: s * f.laplacian(x),
    )
