"""Closed-form eigensystem for the symmetric LQR and the Riccati oracle.

With linear drift b(x) = -Ax (A symmetric) and quadratic running cost
x^T P x, the associated Schrodinger operator is a harmonic oscillator, so
eigenvalues and eigenfunctions are explicit. The Riccati ODE provides an
independent oracle for the quadratic-terminal case.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .fields import ScalarField
from .hermite import hermite_normalized_deriv, hermite_normalized_table

_PI_QUARTER = np.pi ** 0.25


class CoefficientError(RuntimeError):
    """Terminal-cost projection onto the ground state failed."""


class RiccatiDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadraticProblem:
    """Symmetric LQR data: drift -Ax, running cost x^T P x, terminal x^T Q x.

    Q may be None when the terminal cost is not quadratic (the eigenseries
    handles arbitrary terminal costs; the Riccati oracle requires Q).
    """

    A: np.ndarray
    P: np.ndarray
    Q: np.ndarray | None
    beta: float
    horizon: float

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "P", 0.5 * (P + P.T))
        if self.Q is not None:
            object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))
        if not np.allclose(A, A.T, atol=1e-12):
            raise ValueError("A must be symmetric")
        M = A.T @ A + 2.0 * self.P
        if np.min(np.linalg.eigvalsh(0.5 * (M + M.T))) <= 0:
            raise ValueError("A^T A + 2P must be positive definite")

    @property
    def dim(self) -> int:
        return self.A.shape[0]


def enumerate_multi_indices(d: int, k: int, lambdas_1d) -> list[tuple[int, ...]]:
    """The k multi-indices alpha with smallest sum_i lambdas_1d(i, alpha_i).

    Best-first frontier search over N^d; per-dimension eigenvalues must be
    increasing in the index for the frontier to be exhaustive. Ties are
    broken lexicographically on alpha.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    start = tuple(0 for _ in range(d))
    lam0 = sum(lambdas_1d(i, 0) for i in range(d))
    heap = [(lam0, start)]
    seen = {start}
    out = []
    while heap and len(out) < k:
        lam, alpha = heapq.heappop(heap)
        out.append(alpha)
        for j in range(d):
            succ = alpha[:j] + (alpha[j] + 1,) + alpha[j + 1:]
            if succ not in seen:
                seen.add(succ)
                lam_next = lambdas_1d(j, alpha[j] + 1)
                if not np.isfinite(lam_next):
                    continue
                lam_succ = lam - lambdas_1d(j, alpha[j]) + lam_next
                heapq.heappush(heap, (lam_succ, succ))
    return out


class Oscillator1DEigenSystem:
    """Eigensystem of -d^2/dx^2 + x^2: lambda_n = 2n+1, Hermite functions."""

    def __init__(self, n_max: int):
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        self.k = n_max
        self.eigenvalues = 2.0 * np.arange(n_max) + 1.0

    def phi(self, i: int, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        tab = hermite_normalized_table(i, x)
        return tab[i] * np.exp(-0.5 * x ** 2)

    def grad_phi(self, i: int, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        tab = hermite_normalized_table(i, x)
        dtab = hermite_normalized_deriv(tab)
        return (dtab[i] - x * tab[i]) * np.exp(-0.5 * x ** 2)

    def grad_log_phi(self, i: int, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        tab = hermite_normalized_table(i, x)
        dtab = hermite_normalized_deriv(tab)
        return dtab[i] / tab[i] - x


def oscillator_eigensystem_1d(n_max: int) -> Oscillator1DEigenSystem:
    return Oscillator1DEigenSystem(n_max)


class OscillatorDDEigenSystem:
    """k smallest eigenpairs of -Delta + x^T A_cost x (A_cost SPD)."""

    def __init__(self, A_cost: np.ndarray, k: int):
        A_cost = np.asarray(A_cost, dtype=float)
        w, Qv = np.linalg.eigh(0.5 * (A_cost + A_cost.T))
        if np.min(w) <= 0:
            raise ValueError("A_cost must be positive definite")
        self.d = A_cost.shape[0]
        self.lam_diag = w                      # eigenvalues of A_cost
        self.U = Qv.T                          # A_cost = U^T diag(lam) U
        self.jac = self.lam_diag[:, None] ** 0.25 * self.U  # y = jac @ x
        sqrt_lam = np.sqrt(w)
        self.indices = enumerate_multi_indices(
            self.d, k, lambda i, n: sqrt_lam[i] * (2 * n + 1)
        )
        self.eigenvalues = np.array(
            [sum(sqrt_lam[i] * (2 * a + 1) for i, a in enumerate(alpha)) for alpha in self.indices]
        )
        self.k = k
        self._norm_const = float(np.prod(self.lam_diag ** 0.125))
        self._n_max = max(max(alpha) for alpha in self.indices)

    def _tables(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = x @ self.jac.T
        tab = hermite_normalized_table(self._n_max, y)  # (n_max+1, m, d)
        dtab = hermite_normalized_deriv(tab)
        return x, y, tab, dtab

    def phi(self, i: int, x):
        x, y, tab, _ = self._tables(x)
        alpha = self.indices[i]
        prod = np.prod([tab[a][:, j] for j, a in enumerate(alpha)], axis=0)
        return self._norm_const * prod * np.exp(-0.5 * np.sum(y ** 2, axis=1))

    def grad_phi(self, i: int, x):
        x, y, tab, dtab = self._tables(x)
        alpha = self.indices[i]
        vals = np.stack([tab[a][:, j] for j, a in enumerate(alpha)], axis=1)    # (m,d)
        dvals = np.stack([dtab[a][:, j] for j, a in enumerate(alpha)], axis=1)  # (m,d)
        # d/dy_j of prod_i hhat(y_i) e^{-y^2/2}: replace factor j, avoid division
        grad_y = np.empty_like(vals)
        for j in range(self.d):
            others = np.prod(np.delete(vals, j, axis=1), axis=1)
            grad_y[:, j] = others * (dvals[:, j] - y[:, j] * vals[:, j])
        grad_y *= self._norm_const * np.exp(-0.5 * np.sum(y ** 2, axis=1))[:, None]
        return grad_y @ self.jac


def oscillator_eigensystem_dd(A_cost, k: int) -> OscillatorDDEigenSystem:
    return OscillatorDDEigenSystem(np.asarray(A_cost, dtype=float), k)


class LqrEigenSystem:
    """Closed-form eigensystem of L for a symmetric LQR, in L^2(mu).

    Eigenfunctions are evaluated through normalized Hermite recurrences and
    re-normalized numerically in L^2(mu) by Gauss-Hermite quadrature (the
    quadrature norms are kept as metadata; they are 1 up to roundoff).
    """

    def __init__(self, problem: QuadraticProblem, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.problem = problem
        self.beta = float(problem.beta)
        d = problem.dim
        M = problem.A @ problem.A + 2.0 * problem.P
        lam, Qv = np.linalg.eigh(0.5 * (M + M.T))
        if np.min(lam) <= 0:
            raise ValueError("A^T A + 2P must be positive definite")
        self.d = d
        self.lam_diag = lam
        self.U = Qv.T                          # M = U^T diag(lam) U
        sqrt_lam = np.sqrt(lam)
        self.B = self.U.T @ np.diag(sqrt_lam) @ self.U - problem.A
        self.jac = np.sqrt(self.beta) * lam[:, None] ** 0.25 * self.U  # y = jac @ x
        trA = float(np.trace(problem.A))
        self.indices = enumerate_multi_indices(
            d, k, lambda i, n: sqrt_lam[i] * (2 * n + 1)
        )
        self.eigenvalues = self.beta * np.array(
            [-trA + sum(sqrt_lam[i] * (2 * a + 1) for i, a in enumerate(alpha))
             for alpha in self.indices]
        )
        self.k = k
        self._n_max = max(max(alpha) for alpha in self.indices)
        self._base_const = float(self.beta ** (d / 4.0) * np.prod(lam ** 0.125))
        self.quad_norms = self._quadrature_norms()

    def _quadrature_norms(self, n_quad: int = 120) -> np.ndarray:
        """L^2(mu) norms per mode via per-coordinate Gauss-Hermite quadrature."""
        t, w = np.polynomial.hermite.hermgauss(n_quad)
        tab = hermite_normalized_table(self._n_max, t)
        # int hhat_n(y)^2 e^{-y^2} dy per order
        one_d = np.array([np.sum(w * tab[n] ** 2) for n in range(self._n_max + 1)])
        return np.sqrt(np.array([np.prod([one_d[a] for a in alpha]) for alpha in self.indices]))

    def _tables(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = x @ self.jac.T
        tab = hermite_normalized_table(self._n_max, y)
        dtab = hermite_normalized_deriv(tab)
        return x, y, tab, dtab

    def _quad_form(self, x):
        return np.einsum("ni,ij,nj->n", x, self.B, x)

    def phi(self, i: int, x):
        x, y, tab, _ = self._tables(x)
        alpha = self.indices[i]
        prod = np.prod([tab[a][:, j] for j, a in enumerate(alpha)], axis=0)
        val = self._base_const * prod * np.exp(-0.5 * self.beta * self._quad_form(x))
        return val / self.quad_norms[i]

    def grad_phi(self, i: int, x):
        x, y, tab, dtab = self._tables(x)
        alpha = self.indices[i]
        vals = np.stack([tab[a][:, j] for j, a in enumerate(alpha)], axis=1)
        dvals = np.stack([dtab[a][:, j] for j, a in enumerate(alpha)], axis=1)
        prod = np.prod(vals, axis=1)
        grad_y = np.empty_like(vals)
        for j in range(self.d):
            others = np.prod(np.delete(vals, j, axis=1), axis=1)
            grad_y[:, j] = others * dvals[:, j]
        env = self._base_const * np.exp(-0.5 * self.beta * self._quad_form(x))
        grad = env[:, None] * (grad_y @ self.jac) \
            + (env * prod)[:, None] * (-self.beta * (x @ self.B))
        return grad / self.quad_norms[i]

    def grad_log_phi(self, i: int, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if i == 0:
            return -self.beta * (x @ self.B)
        return self.grad_phi(i, x) / self.phi(i, x)[:, None]

    def ratio_to_ground(self, i: int, x):
        """phi_i / phi_0 and its gradient; the Gaussian envelopes cancel."""
        x, y, tab, dtab = self._tables(x)
        alpha = self.indices[i]
        # p_n = pi^{1/4} hhat_n has p_0 = 1, so the ratio is prod_j p_{alpha_j}(y_j)
        vals = np.stack([_PI_QUARTER * tab[a][:, j] for j, a in enumerate(alpha)], axis=1)
        dvals = np.stack([_PI_QUARTER * dtab[a][:, j] for j, a in enumerate(alpha)], axis=1)
        r = np.prod(vals, axis=1)
        grad_y = np.empty_like(vals)
        for j in range(self.d):
            others = np.prod(np.delete(vals, j, axis=1), axis=1)
            grad_y[:, j] = others * dvals[:, j]
        norm_fix = self.quad_norms[0] / self.quad_norms[i]
        return norm_fix * r, norm_fix * (grad_y @ self.jac)

    def phi_field(self, i: int) -> ScalarField:
        """Eigenfunction i as a ScalarField (Laplacian via L phi = lambda phi)."""
        lam_i = self.eigenvalues[i]
        beta = self.beta

        def laplacian(x):
            # -lap phi + 2 beta <grad E, grad phi> + 2 beta^2 f phi = lam phi
            gE = x @ self.problem.A
            f = np.einsum("ni,ij,nj->n", x, self.problem.P, x)
            return (2.0 * beta * np.sum(gE * self.grad_phi(i, x), axis=1)
                    + (2.0 * beta ** 2 * f - lam_i) * self.phi(i, x))

        return ScalarField(
            value=lambda x: self.phi(i, x),
            grad=lambda x: self.grad_phi(i, x),
            laplacian=laplacian,
        )


def lqr_eigensystem(problem: QuadraticProblem, k: int) -> LqrEigenSystem:
    return LqrEigenSystem(problem, k)


@dataclass(frozen=True)
class RiccatiSolution:
    time_grid: np.ndarray          # K+1 increasing times on [0, T]
    F: np.ndarray                  # (K+1, d, d), F[-1] == Q

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation of F in t."""
        tg = self.time_grid
        t = float(np.clip(t, tg[0], tg[-1]))
        i = int(np.clip(np.searchsorted(tg, t) - 1, 0, len(tg) - 2))
        w = (t - tg[i]) / (tg[i + 1] - tg[i])
        return (1.0 - w) * self.F[i] + w * self.F[i + 1]


def riccati_solve(problem: QuadraticProblem, steps: int) -> RiccatiSolution:
    """Backward RK4 integration of dF/dt = A^T F + F A + 2 F F^T - P, F(T) = Q.

    Fixed step; each step is symmetrized. Any non-finite entry raises with
    the approximate blow-up time.
    """
    if problem.Q is None:
        raise ValueError("Riccati oracle requires a quadratic terminal cost Q")
    if steps < 10:
        raise ValueError("steps must be >= 10")
    A, P, Q = problem.A, problem.P, problem.Q
    T = problem.horizon
    h = T / steps

    def rhs(F):
        return A.T @ F + F @ A + 2.0 * F @ F.T - P

    F = np.empty((steps + 1, A.shape[0], A.shape[0]))
    F[steps] = Q
    cur = Q.copy()
    for k in range(steps, 0, -1):
        # integrate backward: step -h in t
        k1 = rhs(cur)
        k2 = rhs(cur - 0.5 * h * k1)
        k3 = rhs(cur - 0.5 * h * k2)
        k4 = rhs(cur - h * k3)
        cur = cur - (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        cur = 0.5 * (cur + cur.T)
        if not np.all(np.isfinite(cur)):
            raise RiccatiDivergenceError(
                f"Riccati integration diverged near t = {(k - 1) * h:.6g}"
            )
        F[k - 1] = cur
    return RiccatiSolution(time_grid=np.linspace(0.0, T, steps + 1), F=F)


def riccati_control(sol: RiccatiSolution):
    """Optimal LQR control u(x, t) = -2 F_t x."""

    def u(x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return -2.0 * x @ sol.at(t).T

    return u


class EigenSeriesControl:
    """Truncated eigenfunction-series control for the symmetric LQR.

    Evaluates the log-gradient form of the series solution; the ground-state
    term is exact and corrections are damped by exp(-(lam_i - lam_0)(T-t)/2beta).
    The log argument is clamped below at 1e-12 and clamp events are counted.
    """

    def __init__(self, eigsys: LqrEigenSystem, coeffs: np.ndarray, T: float):
        self.eigsys = eigsys
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.T = float(T)
        self.clamp_events = 0

    def __call__(self, x, t):
        es = self.eigsys
        x = np.atleast_2d(np.asarray(x, dtype=float))
        beta = es.beta
        base = -(x @ es.B)  # (1/beta) grad log phi_0
        if es.k == 1:
            return base
        S = np.ones(x.shape[0])
        gS = np.zeros_like(x)
        gaps = es.eigenvalues[1:] - es.eigenvalues[0]
        damp = np.exp(-gaps * (self.T - t) / (2.0 * beta))
        for i in range(1, es.k):
            if self.coeffs[i] == 0.0:
                continue
            r, gr = es.ratio_to_ground(i, x)
            w = self.coeffs[i] * damp[i - 1]
            S += w * r
            gS += w * gr
        clamped = S < 1e-12
        if clamped.any():
            self.clamp_events += int(np.sum(clamped))
            S = np.maximum(S, 1e-12)
        return base + gS / (beta * S[:, None])


def _coordwise_coefficients(eigsys: LqrEigenSystem, g_coordwise, n_quad: int) -> np.ndarray:
    """Per-coordinate terminal projections; valid when A, P and g decouple
    in the rotated coordinates w = Ux."""
    es = eigsys
    beta = es.beta
    a_rot = es.U @ es.problem.A @ es.U.T
    if not np.allclose(a_rot, np.diag(np.diag(a_rot)), atol=1e-10):
        raise CoefficientError("problem does not decouple: A not diagonal in U basis")
    a_diag = np.diag(a_rot)
    t, w = np.polynomial.hermite.hermgauss(n_quad)
    c_1d = np.empty((es.d, es._n_max + 1))
    for i in range(es.d):
        s = 0.5 * (1.0 + a_diag[i] / np.sqrt(es.lam_diag[i]))
        if s <= 0:
            raise CoefficientError("Gaussian weight not integrable in coordinate %d" % i)
        y = t / np.sqrt(s)
        j = np.sqrt(beta) * es.lam_diag[i] ** 0.25
        wq = y / j
        tab = hermite_normalized_table(es._n_max, y)
        gv = np.asarray(g_coordwise[i](wq), dtype=float)
        weight = w * np.exp(-beta * gv)
        proj = np.array([np.sum(weight * tab[n]) for n in range(es._n_max + 1)])
        if not np.isfinite(proj[0]) or proj[0] <= 0:
            raise CoefficientError(
                "ground-state projection non-positive or non-finite in coordinate %d" % i
            )
        c_1d[i] = proj / proj[0]
    return np.array([np.prod([c_1d[i, a] for i, a in enumerate(alpha)])
                     for alpha in eigsys.indices])


def _tensor_coefficients(eigsys: LqrEigenSystem, g: ScalarField, n_quad: int) -> np.ndarray:
    """Terminal projections by tensor Gauss-Hermite quadrature (d <= 4)."""
    es = eigsys
    if es.d > 4:
        raise CoefficientError("tensor quadrature limited to d <= 4; supply g_coordwise")
    C_A = (es.lam_diag[:, None] ** -0.25) * (es.U @ es.problem.A @ es.U.T) \
        * (es.lam_diag[None, :] ** -0.25)
    S = np.eye(es.d) + 0.5 * (C_A + C_A.T)
    s, Qv = np.linalg.eigh(S)
    if np.min(s) <= 0:
        raise CoefficientError("terminal projection Gaussian not integrable")
    t, w = np.polynomial.hermite.hermgauss(n_quad)
    grids = np.meshgrid(*([t] * es.d), indexing="ij")
    tt = np.stack([g_.ravel() for g_ in grids], axis=1)          # (n^d, d)
    ww = np.prod(np.stack(np.meshgrid(*([w] * es.d), indexing="ij")), axis=0).ravel()
    y = np.sqrt(2.0) * tt / np.sqrt(s) @ Qv.T
    x = y @ np.linalg.inv(es.jac).T
    tab = hermite_normalized_table(es._n_max, y)                 # (n_max+1, m, d)
    weight = ww * np.exp(-es.beta * g.value(x))
    proj = np.empty(es.k)
    for idx, alpha in enumerate(es.indices):
        prod = np.prod([tab[a][:, j] for j, a in enumerate(alpha)], axis=0)
        proj[idx] = np.sum(weight * prod)
    if not np.isfinite(proj[0]) or proj[0] <= 0:
        raise CoefficientError("ground-state projection non-positive or non-finite")
    return proj / proj[0]


def lqr_series_control(
    eigsys: LqrEigenSystem,
    g: ScalarField | None = None,
    g_coordwise=None,
    q_matrix=None,
    n_quad: int = 80,
    T: float | None = None,
) -> EigenSeriesControl:
    """Series control with coefficients <e^{-beta g}, phi_i>_mu / <., phi_0>_mu.

    Coefficient quadrature routes, in order of preference:
    per-coordinate 1-D quadrature when ``g_coordwise`` (callables on the
    rotated coordinates w = Ux) is given or derivable from a quadratic
    ``q_matrix`` that commutes with the problem, else tensor Gauss-Hermite
    for d <= 4 on a general ``g``.
    """
    es = eigsys
    T = es.problem.horizon if T is None else float(T)
    if g_coordwise is None and q_matrix is not None:
        q_rot = es.U @ np.asarray(q_matrix, dtype=float) @ es.U.T
        if not np.allclose(q_rot, np.diag(np.diag(q_rot)), atol=1e-10):
            raise CoefficientError("q_matrix does not decouple in the rotated basis")
        qd = np.diag(q_rot).copy()
        g_coordwise = [(lambda q: (lambda v: q * v ** 2))(q) for q in qd]
    if g_coordwise is not None:
        coeffs = _coordwise_coefficients(es, g_coordwise, n_quad)
    elif g is not None:
        coeffs = _tensor_coefficients(es, g, n_quad)
    else:  # zero terminal cost
        coeffs = _coordwise_coefficients(es, [lambda v: np.zeros_like(v)] * es.d, n_quad)
    return EigenSeriesControl(es, coeffs, T)
