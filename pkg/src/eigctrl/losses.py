"""Eigenfunction training losses with analytic parameter gradients.

All losses act on phi = exp(-beta V0) with linear-in-parameters V0, so the
chain rule closes in terms of the model's feature tables. Two independent
algebraic routes to L phi / phi are implemented on purpose: the PINN loss
expands L phi directly, the relative loss goes through the HJB form
2 beta^2 (K V0), and their agreement is a checkable identity rather than a
tautology.
"""

from __future__ import annotations

import numpy as np

from .fields import ScalarField


class DegenerateModelError(RuntimeError):
    pass


class ExtractionError(RuntimeError):
    pass


class FeatureTables:
    """Theta-independent per-sample tables, reusable across optimizer steps."""

    def __init__(self, model, samples, f: ScalarField, E: ScalarField):
        self.x = np.atleast_2d(np.asarray(samples, dtype=float))
        self.rho = model.features(self.x)
        self.fg = model.feat_grad(self.x)
        self.fl = model.feat_lap(self.x)
        self.fv = f.value(self.x)
        self.gE = E.grad(self.x)
        # theta-free offsets; exactly zero for plain linear models, nonzero
        # for shifted models on the importance-sampling route
        th = model.theta
        self.g_off = model.grad_v0(self.x) - np.einsum("npd,p->nd", self.fg, th)
        self.lap_off = model.lap_v0(self.x) - self.fl @ th


def make_tables(model, samples, f: ScalarField, E: ScalarField) -> FeatureTables:
    return FeatureTables(model, samples, f, E)


def _tables(model, samples, beta, cached: FeatureTables | None = None):
    if cached is None:
        cached = FeatureTables(
            model,
            samples,
            ScalarField(lambda x: np.zeros(x.shape[0]), None, None),
            ScalarField(None, lambda x: np.zeros_like(x), None),
        )
    x, rho, fg, fl = cached.x, cached.rho, cached.fg, cached.fl
    G = np.einsum("npd,p->nd", fg, model.theta) + cached.g_off
    lapV = fl @ model.theta + cached.lap_off
    # on the importance route the density weight is phibar = e^{-beta V0bar},
    # which excludes the offset; the offset enters only derivatives of V0
    phi = np.exp(-beta * (rho @ model.theta))
    return x, rho, fg, fl, G, lapV, phi


def _dirichlet_parts(model, samples, f: ScalarField, beta: float,
                     cached: FeatureTables | None = None):
    """Means and theta-gradients of N = <phi, L phi>_mu and D = <phi, phi>_mu."""
    x, rho, fg, fl, G, lapV, phi = _tables(model, samples, beta, cached)
    fv = cached.fv if cached is not None else f.value(x)
    g2 = np.sum(G ** 2, axis=1)
    phi2 = phi ** 2
    N = float(np.mean(beta ** 2 * phi2 * g2 + 2.0 * beta ** 2 * fv * phi2))
    D = float(np.mean(phi2))
    fgG = np.einsum("npd,nd->np", fg, G)
    gN = np.mean(
        beta ** 2 * phi2[:, None] * (-2.0 * beta * rho * (g2 + 2.0 * fv)[:, None] + 2.0 * fgG),
        axis=0,
    )
    gD = np.mean(-2.0 * beta * phi2[:, None] * rho, axis=0)
    return N, D, gN, gD


def loss_deep_ritz(model, samples, f: ScalarField, E: ScalarField, beta: float, alpha: float,
                   tables: FeatureTables | None = None):
    """Rayleigh quotient <phi, L phi>_mu / <phi, phi>_mu + alpha (D - 1)^2.

    The drift enters only through the sampling measure mu, so E is not
    evaluated here; it is kept in the signature for interface symmetry.
    """
    N, D, gN, gD = _dirichlet_parts(model, samples, f, beta, tables)
    if D <= 1e-14:
        raise DegenerateModelError("phi norm estimate vanished; model degenerate")
    value = N / D + alpha * (D - 1.0) ** 2
    grad = (gN * D - N * gD) / D ** 2 + 2.0 * alpha * (D - 1.0) * gD
    return value, grad


def loss_variational(model, samples, f: ScalarField, E: ScalarField, beta: float, alpha: float,
                     tables: FeatureTables | None = None):
    """Unnormalized form <phi, L phi>_mu + alpha (<phi, phi>_mu - 1)^2."""
    N, D, gN, gD = _dirichlet_parts(model, samples, f, beta, tables)
    value = N + alpha * (D - 1.0) ** 2
    grad = gN + 2.0 * alpha * (D - 1.0) * gD
    return value, grad


def loss_pinn(model, lam_hat: float, samples, f: ScalarField, E: ScalarField,
              beta: float, alpha: float, tables: FeatureTables | None = None):
    """||L phi - lam_hat phi||^2_rho + alpha (||phi||^2_rho - 1)^2.

    L phi is expanded directly through the exponential ansatz:
    L phi = phi (beta lap V0 - beta^2 |grad V0|^2 - 2 beta^2 <grad E, grad V0>
    + 2 beta^2 f).
    """
    x, rho, fg, fl, G, lapV, phi = _tables(model, samples, beta, tables)
    gE = tables.gE if tables is not None else E.grad(x)
    fv = tables.fv if tables is not None else f.value(x)
    A = (
        beta * lapV
        - beta ** 2 * np.sum(G ** 2, axis=1)
        - 2.0 * beta ** 2 * np.sum(gE * G, axis=1)
        + 2.0 * beta ** 2 * fv
    )
    r = phi * (A - lam_hat)
    D = float(np.mean(phi ** 2))
    value = float(np.mean(r ** 2)) + alpha * (D - 1.0) ** 2
    dA = beta * fl - 2.0 * beta ** 2 * np.einsum("npd,nd->np", fg, G + gE)
    dr = -beta * phi[:, None] * rho * (A - lam_hat)[:, None] + phi[:, None] * dA
    gD = np.mean(-2.0 * beta * phi[:, None] ** 2 * rho, axis=0)
    grad = np.mean(2.0 * r[:, None] * dr, axis=0) + 2.0 * alpha * (D - 1.0) * gD
    return value, grad


def loss_relative(model, lam_hat: float, samples, f: ScalarField, E: ScalarField,
                  beta: float, alpha: float, tables: FeatureTables | None = None):
    """||L phi / phi - lam_hat||^2_rho + alpha (log ||phi||_rho)^2.

    L phi / phi is evaluated through the HJB form 2 beta^2 K V0, which never
    divides by phi and stays informative where phi is tiny.
    """
    x, rho, fg, fl, G, lapV, phi = _tables(model, samples, beta, tables)
    gE = tables.gE if tables is not None else E.grad(x)
    fv = tables.fv if tables is not None else f.value(x)
    kv0 = (
        lapV / (2.0 * beta)
        - np.sum(gE * G, axis=1)
        - 0.5 * np.sum(G ** 2, axis=1)
        + fv
    )
    q = 2.0 * beta ** 2 * kv0 - lam_hat
    D = float(np.mean(phi ** 2))
    value = float(np.mean(q ** 2)) + alpha * (0.5 * np.log(D)) ** 2
    dkv0 = fl / (2.0 * beta) - np.einsum("npd,nd->np", fg, gE + G)
    gD = np.mean(-2.0 * beta * phi[:, None] ** 2 * rho, axis=0)
    grad = (
        np.mean(2.0 * q[:, None] * 2.0 * beta ** 2 * dkv0, axis=0)
        + alpha * 0.5 * np.log(D) * gD / D
    )
    return value, grad


def loss_variational_multi(models, samples, f: ScalarField, E: ScalarField,
                           beta: float, alpha: float, tables_list=None):
    """sum_i <phi_i, L phi_i>_mu + alpha ||E_mu[phi phi^T] - I||_F^2.

    Returns the value and one gradient array per model.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    k = len(models)
    if tables_list is None:
        tables_list = [None] * k
    parts = [_dirichlet_parts(m, x, f, beta, tb) for m, tb in zip(models, tables_list)]
    # density weights use the linear part of V0 only (phibar on the
    # importance route), matching _dirichlet_parts
    phis = np.stack(
        [
            np.exp(-beta * ((tb.rho if tb is not None else m.features(x)) @ m.theta))
            for m, tb in zip(models, tables_list)
        ],
        axis=1,
    )  # (n, k)
    M = phis.T @ phis / x.shape[0]
    R = M - np.eye(k)
    value = sum(p[0] for p in parts) + alpha * float(np.sum(R ** 2))
    grads = []
    for i, m in enumerate(models):
        rho_i = tables_list[i].rho if tables_list[i] is not None else m.features(x)
        mix = phis @ R[i]                                               # (n,)
        g_pen = -4.0 * alpha * beta * np.mean(
            (phis[:, i] * mix)[:, None] * rho_i, axis=0
        )
        grads.append(parts[i][2] + g_pen)
    return value, grads


def extract_eigvals(models, samples, alpha: float, beta: float, tol: float = 1e-3):
    """Diagonalize the second-moment matrix of the trained functions.

    M = E_mu[phi phi^T] = U diag(D) U^T; the rotated functions D^{-1/2} U^T phi
    are returned as ScalarFields together with eigenvalues lambda_i =
    2 alpha (1 - D_ii), sorted ascending in lambda.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    fields = [m.phi_field(beta) for m in models]
    phis = np.stack([fld.value(x) for fld in fields], axis=1)
    M = phis.T @ phis / x.shape[0]
    w, U = np.linalg.eigh(M)
    if np.min(w) <= 0:
        raise ExtractionError("second-moment matrix not positive definite")
    if np.max(w) >= 1.0 + tol:
        raise ExtractionError(
            f"second-moment eigenvalue {np.max(w):.4f} >= 1; model not converged"
        )
    order = np.argsort(w)[::-1]  # descending D is ascending lambda
    w, U = w[order], U[:, order]
    lams = 2.0 * alpha * (1.0 - w)
    rotated = []
    for i in range(len(models)):
        coef = U[:, i] / np.sqrt(w[i])

        def value(xq, c=coef):
            return sum(ci * fld.value(xq) for ci, fld in zip(c, fields))

        def grad(xq, c=coef):
            return sum(ci * fld.grad(xq) for ci, fld in zip(c, fields))

        def laplacian(xq, c=coef):
            return sum(ci * fld.laplacian(xq) for ci, fld in zip(c, fields))

        rotated.append(ScalarField(value=value, grad=grad, laplacian=laplacian))
    return lams, rotated
