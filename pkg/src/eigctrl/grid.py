"""Reference eigensolvers on truncated grids.

Finite-difference discretizations of the Schrodinger operator
S = -Delta + V with homogeneous Dirichlet boundary: dense tridiagonal in
1-D, sparse shift-invert Lanczos in 2-D, and tensor products of 1-D systems
for separable potentials. Back-transformation to L-eigenfunctions, the
semigroup solution and the truncated eigenseries control live here too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.linalg import eigh_tridiagonal
from scipy.sparse import identity as sp_identity
from scipy.sparse import kron as sp_kron
from scipy.sparse import diags
from scipy.sparse.linalg import eigsh

from .fields import ScalarField

CACHE_VERSION = 1


class GridSolverError(RuntimeError):
    pass


class EigsNotConvergedError(GridSolverError):
    def __init__(self, residual: float):
        super().__init__(f"iterative eigensolver did not converge; last residual {residual:.3e}")
        self.residual = residual


@dataclass(frozen=True)
class Grid1D:
    """Uniform interior grid on (lo, hi) with n interior points."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("lo must be < hi")
        if self.n < 16:
            raise ValueError("n must be >= 16")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.lo + self.h * np.arange(1, self.n + 1)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Ground state globally positive; excited states positive at the first
    node where |phi| > 1e-8."""
    out = vecs.copy()
    for i in range(out.shape[0]):
        row = out[i]
        if i == 0:
            if np.sum(row) < 0:
                row *= -1.0
        else:
            idx = np.flatnonzero(np.abs(row) > 1e-8)
            if idx.size and row[idx[0]] < 0:
                row *= -1.0
        out[i] = row
    return out


class Grid1DEigenSystem:
    """k smallest eigenpairs of -d2/dx2 + v on a 1-D Dirichlet grid.

    Node values are L2(dx)-normalized with quadrature weight h. Off-grid
    evaluation uses cubic splines of phi and of its centered-difference
    gradient; queries are clipped to the box.
    """

    space = "schrodinger"

    def __init__(self, grid: Grid1D, eigenvalues: np.ndarray, vecs: np.ndarray):
        self.grid = grid
        self.eigenvalues = eigenvalues
        self.node_values = vecs                       # (k, n)
        self.k = eigenvalues.size
        h = grid.h
        xs = np.concatenate(([grid.lo], grid.nodes, [grid.hi]))
        self._phi_spl = []
        self._dphi_spl = []
        for i in range(self.k):
            padded = np.concatenate(([0.0], vecs[i], [0.0]))
            dpadded = np.gradient(padded, h)
            self._phi_spl.append(CubicSpline(xs, padded))
            self._dphi_spl.append(CubicSpline(xs, dpadded))

    def _clip(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        return np.clip(x, self.grid.lo, self.grid.hi)

    def phi(self, i: int, x):
        return self._phi_spl[i](self._clip(x))

    def grad_phi(self, i: int, x):
        return self._dphi_spl[i](self._clip(x))

    def quadrature_weights(self) -> np.ndarray:
        return np.full(self.grid.n, self.grid.h)


def schrodinger_fd_1d(v, grid: Grid1D, k: int) -> Grid1DEigenSystem:
    """Dense symmetric tridiagonal eigensolve of -D2/h^2 + diag(v)."""
    if k > grid.n // 4:
        raise GridSolverError("k too large for grid resolution (need k <= n/4)")
    x = grid.nodes
    vv = np.asarray(v(x), dtype=float)
    if not np.all(np.isfinite(vv)):
        raise GridSolverError("potential non-finite on grid")
    h = grid.h
    diag = 2.0 / h ** 2 + vv
    off = np.full(grid.n - 1, -1.0 / h ** 2)
    w, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1))
    vecs = vecs.T / np.sqrt(h)
    return Grid1DEigenSystem(grid, w, _fix_signs(vecs))


class Grid2DEigenSystem:
    """k smallest eigenpairs of the 5-point discretization on a 2-D box."""

    space = "schrodinger"

    def __init__(self, grid_x: Grid1D, grid_y: Grid1D, eigenvalues, node_values):
        self.grid_x = grid_x
        self.grid_y = grid_y
        self.eigenvalues = eigenvalues
        self.node_values = node_values                # (k, nx, ny)
        self.k = eigenvalues.size
        hx, hy = grid_x.h, grid_y.h
        xs = np.concatenate(([grid_x.lo], grid_x.nodes, [grid_x.hi]))
        ys = np.concatenate(([grid_y.lo], grid_y.nodes, [grid_y.hi]))
        self._phi_spl = []
        self._dphix_spl = []
        self._dphiy_spl = []
        for i in range(self.k):
            padded = np.zeros((xs.size, ys.size))
            padded[1:-1, 1:-1] = node_values[i]
            dpx = np.gradient(padded, hx, axis=0)
            dpy = np.gradient(padded, hy, axis=1)
            self._phi_spl.append(RectBivariateSpline(xs, ys, padded, kx=3, ky=3))
            self._dphix_spl.append(RectBivariateSpline(xs, ys, dpx, kx=3, ky=3))
            self._dphiy_spl.append(RectBivariateSpline(xs, ys, dpy, kx=3, ky=3))

    def _clip(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cx = np.clip(x[:, 0], self.grid_x.lo, self.grid_x.hi)
        cy = np.clip(x[:, 1], self.grid_y.lo, self.grid_y.hi)
        return cx, cy

    def phi(self, i: int, x):
        cx, cy = self._clip(x)
        return self._phi_spl[i](cx, cy, grid=False)

    def grad_phi(self, i: int, x):
        cx, cy = self._clip(x)
        return np.stack(
            [self._dphix_spl[i](cx, cy, grid=False), self._dphiy_spl[i](cx, cy, grid=False)],
            axis=1,
        )


def schrodinger_fd_2d(v, grid_x: Grid1D, grid_y: Grid1D, k: int) -> Grid2DEigenSystem:
    """Sparse shift-invert Lanczos for the 2-D Dirichlet discretization."""
    nx, ny = grid_x.n, grid_y.n
    if nx * ny > 40000:
        raise GridSolverError("2-D grid exceeds 40000 unknowns")
    if k > 16:
        raise GridSolverError("k must be <= 16 for the 2-D solver")
    X, Y = np.meshgrid(grid_x.nodes, grid_y.nodes, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    vv = np.asarray(v(pts), dtype=float)
    if not np.all(np.isfinite(vv)):
        raise GridSolverError("potential non-finite on grid")

    def lap1d(n, h):
        return diags(
            [np.full(n - 1, -1.0 / h ** 2), np.full(n, 2.0 / h ** 2), np.full(n - 1, -1.0 / h ** 2)],
            offsets=[-1, 0, 1],
            format="csc",
        )

    A = (
        sp_kron(lap1d(nx, grid_x.h), sp_identity(ny, format="csc"))
        + sp_kron(sp_identity(nx, format="csc"), lap1d(ny, grid_y.h))
        + diags(vv)
    ).tocsc()
    sigma = float(np.min(vv)) - 1.0
    try:
        w, vecs = eigsh(A, k=k, sigma=sigma, which="LM", tol=0.0, maxiter=5000)
    except Exception as exc:  # ArpackNoConvergence or factorization failure
        raise EigsNotConvergedError(float("nan")) from exc
    order = np.argsort(w)
    w, vecs = w[order], vecs[:, order]
    res = np.max(np.linalg.norm(A @ vecs - vecs * w, axis=0) / np.linalg.norm(vecs, axis=0))
    if res > 1e-8:
        raise EigsNotConvergedError(float(res))
    vecs = vecs.T / np.sqrt(grid_x.h * grid_y.h)
    vecs = _fix_signs(vecs)
    return Grid2DEigenSystem(grid_x, grid_y, w, vecs.reshape(k, nx, ny))


class TensorEigenSystem:
    """Product eigensystem for separable potentials, built from 1-D systems."""

    space = "schrodinger"

    def __init__(self, per_dim: list[Grid1DEigenSystem], k: int):
        self.per_dim = per_dim
        self.d = len(per_dim)
        caps = [s.k for s in per_dim]

        def lam1d(i, n):
            return per_dim[i].eigenvalues[n] if n < caps[i] else np.inf

        from .oscillator import enumerate_multi_indices

        self.indices = enumerate_multi_indices(self.d, k, lam1d)
        if len(self.indices) < k or any(
            a >= caps[i] for alpha in self.indices for i, a in enumerate(alpha)
        ):
            raise GridSolverError("insufficient per-dimension modes for requested k")
        self.eigenvalues = np.array(
            [sum(per_dim[i].eigenvalues[a] for i, a in enumerate(alpha)) for alpha in self.indices]
        )
        self.k = k

    def phi(self, i: int, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        alpha = self.indices[i]
        return np.prod(
            [self.per_dim[j].phi(a, x[:, j]) for j, a in enumerate(alpha)], axis=0
        )

    def grad_phi(self, i: int, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        alpha = self.indices[i]
        vals = np.stack(
            [self.per_dim[j].phi(a, x[:, j]) for j, a in enumerate(alpha)], axis=1
        )
        dvals = np.stack(
            [self.per_dim[j].grad_phi(a, x[:, j]) for j, a in enumerate(alpha)], axis=1
        )
        grad = np.empty_like(vals)
        for j in range(self.d):
            grad[:, j] = np.prod(np.delete(vals, j, axis=1), axis=1) * dvals[:, j]
        return grad


def tensor_eigensystem(per_dim: list[Grid1DEigenSystem], k: int) -> TensorEigenSystem:
    return TensorEigenSystem(per_dim, k)


# eigenvector entries below this fraction of a mode's peak are dominated by
# discretization and eigensolver residual noise; log-derivatives and ratios
# are cut off there rather than amplifying that noise into huge drifts
_RESOLUTION_FLOOR = 1e-8


class LSpaceEigenSystem:
    """L-eigenfunctions phi_L = e^{beta E} phi_S built on a Schrodinger system.

    Eigenvalues are shared with the underlying system (the very same array).
    Values are computed in Schrodinger space whenever possible so the
    exponential reweighting never overflows: ratios and mu-weighted inner
    products only ever see phi_S and e^{-beta E}.
    """

    space = "L"

    def __init__(self, base, E: ScalarField, beta: float):
        if getattr(base, "space", None) != "schrodinger":
            raise ValueError("base system must be in Schrodinger space")
        self.base = base
        self.E = E
        self.beta = float(beta)
        self.eigenvalues = base.eigenvalues
        self.k = base.k

    def _as_points(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1 and self._dim() == 1:
            x = x[:, None]
        return np.atleast_2d(x)

    def _dim(self):
        if isinstance(self.base, Grid1DEigenSystem):
            return 1
        if isinstance(self.base, Grid2DEigenSystem):
            return 2
        return self.base.d

    def _base_phi(self, i, x):
        if self._dim() == 1:
            return self.base.phi(i, x[:, 0])
        return self.base.phi(i, x)

    def _base_grad(self, i, x):
        if self._dim() == 1:
            return self.base.grad_phi(i, x[:, 0])[:, None]
        return self.base.grad_phi(i, x)

    def phi(self, i: int, x):
        x = self._as_points(x)
        return np.exp(self.beta * self.E.value(x)) * self._base_phi(i, x)

    def grad_phi(self, i: int, x):
        x = self._as_points(x)
        w = np.exp(self.beta * self.E.value(x))
        return w[:, None] * (
            self._base_grad(i, x)
            + self.beta * self.E.grad(x) * self._base_phi(i, x)[:, None]
        )

    def _mode_scale(self, i: int) -> float:
        """Peak |phi_S,i| over the grid nodes, cached per mode."""
        cache = getattr(self, "_scales", None)
        if cache is None:
            cache = self._scales = {}
        if i not in cache:
            cache[i] = float(np.max(np.abs(self.base.node_values[i])))
        return cache[i]

    def grad_log_phi(self, i: int, x):
        """grad log phi_L,i; the log-derivative of phi_S is zeroed where the
        eigenvector sits below its resolution floor.

        For tensor products the floor is applied per 1-D factor: the product
        value drops below any global floor long before an individual factor
        becomes unresolved (ten factors at 1e-1 of peak make a 1e-10 product).
        """
        x = self._as_points(x)
        out = self.beta * self.E.grad(x)
        base = self.base
        if isinstance(base, TensorEigenSystem):
            for j, a in enumerate(base.indices[i]):
                s = base.per_dim[j]
                pj = s.phi(a, x[:, j])
                floor = _RESOLUTION_FLOOR * np.max(np.abs(s.node_values[a]))
                denom = np.where(np.abs(pj) > floor, pj, np.inf)
                out[:, j] = out[:, j] + s.grad_phi(a, x[:, j]) / denom
            return out
        ps = self._base_phi(i, x)
        floor = _RESOLUTION_FLOOR * self._mode_scale(i)
        denom = np.where(np.abs(ps) > floor, ps, np.inf)
        return out + self._base_grad(i, x) / denom[:, None]

    def ratio_to_ground(self, i: int, x):
        """phi_i / phi_0 and its gradient; the e^{beta E} factors cancel.

        Tensor products factor into per-dimension ratios so the ground-state
        resolution floor can act on each 1-D factor separately.
        """
        x = self._as_points(x)
        base = self.base
        if isinstance(base, TensorEigenSystem):
            rj = np.empty((x.shape[0], base.d))
            dj = np.empty_like(rj)
            for j in range(base.d):
                s = base.per_dim[j]
                a, a0 = base.indices[i][j], base.indices[0][j]
                p0 = s.phi(a0, x[:, j])
                floor = _RESOLUTION_FLOOR * np.max(np.abs(s.node_values[a0]))
                denom = np.maximum(np.abs(p0), floor) * np.sign(np.where(p0 == 0, 1.0, p0))
                rj[:, j] = s.phi(a, x[:, j]) / denom
                dj[:, j] = (s.grad_phi(a, x[:, j]) - rj[:, j] * s.grad_phi(a0, x[:, j])) / denom
            grad = np.empty_like(rj)
            for j in range(base.d):
                grad[:, j] = np.prod(np.delete(rj, j, axis=1), axis=1) * dj[:, j]
            return np.prod(rj, axis=1), grad
        p0 = self._base_phi(0, x)
        pi = self._base_phi(i, x)
        g0 = self._base_grad(0, x)
        gi = self._base_grad(i, x)
        floor = _RESOLUTION_FLOOR * self._mode_scale(0)
        denom = np.maximum(np.abs(p0), floor) * np.sign(np.where(p0 == 0, 1.0, p0))
        r = pi / denom
        grad = (gi - r[:, None] * g0) / denom[:, None]
        return r, grad

    def phi_field(self, i: int, f: ScalarField) -> ScalarField:
        """Eigenfunction i as a ScalarField; Laplacian from L phi = lambda phi."""
        lam_i = self.eigenvalues[i]
        beta = self.beta

        def laplacian(x):
            x2 = np.atleast_2d(np.asarray(x, dtype=float))
            return (
                2.0 * beta * np.sum(self.E.grad(x2) * self.grad_phi(i, x2), axis=1)
                + (2.0 * beta ** 2 * f.value(x2) - lam_i) * self.phi(i, x2)
            )

        return ScalarField(
            value=lambda x: self.phi(i, x),
            grad=lambda x: self.grad_phi(i, x),
            laplacian=laplacian,
        )


def to_L_eigenfunctions(sys, E: ScalarField, beta: float) -> LSpaceEigenSystem:
    return LSpaceEigenSystem(sys, E, beta)


def _mu_inner_products(sys: LSpaceEigenSystem, psi0: ScalarField) -> np.ndarray:
    """<phi_i, psi0>_mu for all modes by grid quadrature, computed in
    Schrodinger space: h * sum phi_S,i(x_j) psi0(x_j) e^{-beta E(x_j)}.

    Tensor systems require psi0 (and E) separable across coordinates,
    psi0(x) = prod_i psi_i(x_i); the per-coordinate factors are read off
    along the coordinate axes, which is exact for products. The integrals
    then factorize: <phi_alpha, psi0>_mu = prod_i <phi^(i)_alpha_i, psi_i>."""
    base = sys.base
    if isinstance(base, TensorEigenSystem):
        d = base.d
        origin = np.zeros((1, d))
        p0 = float(psi0.value(origin)[0]) * float(np.exp(-sys.beta * sys.E.value(origin)[0]))
        if p0 <= 0 or not np.isfinite(p0):
            raise GridSolverError(
                "tensor quadrature requires separable psi0 with psi0(0) > 0"
            )
        # per-coordinate 1-D projections <phi^(i)_n, psi_i e^{-beta E_i}>_dx;
        # evaluating psi0 e^{-beta E} along axis i picks up the off-axis
        # factors psi_j(0) e^{-beta E_j(0)} for j != i, so the product of the
        # d line integrals overcounts by (psi0(0) e^{-beta E(0)})^(d-1);
        # divide it back out once
        proj = []
        for i in range(d):
            g1 = base.per_dim[i]
            nodes = g1.grid.nodes
            pts = np.zeros((nodes.size, d))
            pts[:, i] = nodes
            w = g1.grid.h * np.exp(-sys.beta * sys.E.value(pts)) * psi0.value(pts)
            proj.append(np.array([np.sum(g1.node_values[n] * w)
                                  for n in range(g1.k)]))
        out = np.array([
            np.prod([proj[i][a] for i, a in enumerate(alpha)])
            for alpha in base.indices
        ])
        return out / p0 ** (d - 1)
    if isinstance(base, Grid1DEigenSystem):
        nodes = base.grid.nodes[:, None]
        w = base.grid.h * np.exp(-sys.beta * sys.E.value(nodes)) * psi0.value(nodes)
        return np.array([np.sum(base.node_values[i] * w) for i in range(sys.k)])
    if isinstance(base, Grid2DEigenSystem):
        X, Y = np.meshgrid(base.grid_x.nodes, base.grid_y.nodes, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        w = (
            base.grid_x.h * base.grid_y.h
            * np.exp(-sys.beta * sys.E.value(pts))
            * psi0.value(pts)
        )
        return np.array(
            [np.sum(base.node_values[i].ravel() * w) for i in range(sys.k)]
        )
    raise GridSolverError("quadrature inner products need a 1-D or 2-D grid system")


def semigroup_solve(sys: LSpaceEigenSystem, psi0: ScalarField, tau: float, x):
    """Spectral representation sum_i e^{-lambda_i tau} <phi_i, psi0>_mu phi_i(x)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    coeffs = _mu_inner_products(sys, psi0)
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(xb.shape[0])
    for i in range(sys.k):
        out += np.exp(-sys.eigenvalues[i] * tau) * coeffs[i] * sys.phi(i, xb)
    return float(out[0]) if np.asarray(x).ndim == 1 else out


def semigroup_field(sys: LSpaceEigenSystem, psi0: ScalarField, tau: float, f: ScalarField) -> ScalarField:
    """psi(., tau) as a ScalarField; the Laplacian uses L phi_i = lambda_i phi_i."""
    coeffs = _mu_inner_products(sys, psi0) * np.exp(-sys.eigenvalues * tau)
    fields = [sys.phi_field(i, f) for i in range(sys.k)]

    def combine(parts):
        return sum(c * p for c, p in zip(coeffs, parts))

    return ScalarField(
        value=lambda x: combine([fld.value(x) for fld in fields]),
        grad=lambda x: combine([fld.grad(x) for fld in fields]),
        laplacian=lambda x: combine([fld.laplacian(x) for fld in fields]),
    )


class GridSeriesControl:
    """Truncated eigenseries control built from a grid L-space system."""

    def __init__(self, sys: LSpaceEigenSystem, coeffs: np.ndarray, T: float, k: int):
        self.sys = sys
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.T = float(T)
        self.k = int(k)
        self.clamp_events = 0

    def __call__(self, x, t):
        sys = self.sys
        x = sys._as_points(x)
        beta = sys.beta
        base = sys.grad_log_phi(0, x) / beta
        if self.k <= 1:
            return base
        S = np.ones(x.shape[0])
        gS = np.zeros_like(x)
        gaps = sys.eigenvalues[1:self.k] - sys.eigenvalues[0]
        damp = np.exp(-gaps * (self.T - t) / (2.0 * beta))
        for i in range(1, self.k):
            r, gr = sys.ratio_to_ground(i, x)
            w = self.coeffs[i] * damp[i - 1]
            S += w * r
            gS += w * gr
        clamped = S < 1e-12
        if clamped.any():
            self.clamp_events += int(np.sum(clamped))
            S = np.maximum(S, 1e-12)
        return base + gS / (beta * S[:, None])


def eigf_control(sys: LSpaceEigenSystem, g: ScalarField, beta: float, T: float, k: int) -> GridSeriesControl:
    """Eigenseries control with coefficients <e^{-beta g}, phi_i>_mu / <., phi_0>_mu."""
    if abs(beta - sys.beta) > 1e-12:
        raise ValueError("beta must match the eigensystem")
    k = min(k, sys.k)
    psi0 = ScalarField(
        value=lambda x: np.exp(-beta * g.value(np.atleast_2d(x))),
        grad=lambda x: np.zeros_like(np.atleast_2d(x)),
        laplacian=lambda x: np.zeros(np.atleast_2d(x).shape[0]),
    )
    proj = _mu_inner_products(sys, psi0)
    if not np.isfinite(proj[0]) or proj[0] <= 0:
        raise GridSolverError("coefficient quadrature failed: <e^{-beta g}, phi_0>_mu <= 0")
    return GridSeriesControl(sys, proj / proj[0], T, k)


class ProductSeriesControl:
    """Coordinate-factorized eigenseries control for separable problems.

    When E, f and g all decompose coordinatewise the backward solution
    factorizes, psi(x, t) = prod_i psi_i(x_i, t), so the control is the
    concatenation of d independent 1-D series controls. Unlike a truncated
    tensor series, each factor keeps its own even excited modes, which carry
    the near-terminal correction (the low-lying tensor modes are odd
    combinations whose coefficients vanish by parity for symmetric wells).
    """

    def __init__(self, controls):
        self.controls = list(controls)

    def __call__(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != len(self.controls):
            raise ValueError("point dimension does not match the control")
        out = np.empty_like(x)
        for i, ctrl in enumerate(self.controls):
            out[:, i] = ctrl(x[:, i][:, None], t)[:, 0]
        return out


def truncation_bound(sys: LSpaceEigenSystem, coeffs, t: float, T: float, k: int) -> float:
    """Heuristic tail proxy |c_k| e^{-(lambda_k - lambda_0)(T-t)/(2 beta)} max|phi_k/phi_0|.

    The max runs over grid nodes where the ground state is not vanishingly
    small relative to its peak. Heuristic only, not a proven bound.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    base = sys.base
    if isinstance(base, Grid1DEigenSystem):
        p0 = base.node_values[0]
        pk = base.node_values[k]
    elif isinstance(base, Grid2DEigenSystem):
        p0 = base.node_values[0].ravel()
        pk = base.node_values[k].ravel()
    else:
        raise GridSolverError("truncation_bound needs a 1-D or 2-D grid system")
    mask = np.abs(p0) > 1e-8 * np.max(np.abs(p0))
    max_ratio = float(np.max(np.abs(pk[mask] / p0[mask])))
    gap = sys.eigenvalues[k] - sys.eigenvalues[0]
    c_k = float(np.asarray(coeffs, dtype=float)[k])
    return abs(c_k) * np.exp(-gap * (T - t) / (2.0 * sys.beta)) * max_ratio


def save_eigensystem(path: str, sys) -> None:
    """Binary cache of a grid eigensystem (versioned npz)."""
    if isinstance(sys, Grid1DEigenSystem):
        np.savez_compressed(
            path,
            version=CACHE_VERSION,
            kind="grid1d",
            box=np.array([sys.grid.lo, sys.grid.hi]),
            n=sys.grid.n,
            eigenvalues=sys.eigenvalues,
            node_values=sys.node_values,
        )
    elif isinstance(sys, Grid2DEigenSystem):
        np.savez_compressed(
            path,
            version=CACHE_VERSION,
            kind="grid2d",
            box_x=np.array([sys.grid_x.lo, sys.grid_x.hi]),
            box_y=np.array([sys.grid_y.lo, sys.grid_y.hi]),
            n=np.array([sys.grid_x.n, sys.grid_y.n]),
            eigenvalues=sys.eigenvalues,
            node_values=sys.node_values,
        )
    else:
        raise GridSolverError("only 1-D and 2-D grid systems are cacheable")


def load_eigensystem(path: str):
    with np.load(path, allow_pickle=False) as z:
        if int(z["version"]) != CACHE_VERSION:
            raise GridSolverError("cache version mismatch")
        kind = str(z["kind"])
        if kind == "grid1d":
            lo, hi = z["box"]
            return Grid1DEigenSystem(
                Grid1D(float(lo), float(hi), int(z["n"])), z["eigenvalues"], z["node_values"]
            )
        if kind == "grid2d":
            lox, hix = z["box_x"]
            loy, hiy = z["box_y"]
            n = z["n"]
            return Grid2DEigenSystem(
                Grid1D(float(lox), float(hix), int(n[0])),
                Grid1D(float(loy), float(hiy), int(n[1])),
                z["eigenvalues"],
                z["node_values"],
            )
        raise GridSolverError(f"unknown cache kind {kind!r}")
