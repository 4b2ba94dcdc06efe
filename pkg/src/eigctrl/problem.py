"""Problem definition and the operators governing gradient-drift control.

The controlled dynamics are dX = (-grad E(X) + u) dt + sqrt(1/beta) dW with
running cost f and terminal cost g. The diffusion is the identity; anisotropic
noise must be removed by a linear change of variables before constructing a
problem here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import ScalarField


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class InitialLaw:
    """Point mass or diagonal Gaussian initial distribution."""

    kind: str  # "point" | "gaussian"
    mean: np.ndarray
    std: np.ndarray | None = None  # per-coordinate, gaussian only

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        mean = np.asarray(self.mean, dtype=float)
        if self.kind == "point":
            return np.tile(mean, (n, 1))
        if self.kind == "gaussian":
            return mean + np.asarray(self.std) * rng.standard_normal((n, mean.size))
        raise ValueError(f"unknown initial law kind {self.kind!r}")


def point_mass(x0) -> InitialLaw:
    return InitialLaw("point", np.atleast_1d(np.asarray(x0, dtype=float)))


def gaussian_law(mean, std) -> InitialLaw:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    std = np.broadcast_to(np.asarray(std, dtype=float), mean.shape)
    return InitialLaw("gaussian", mean, std)


@dataclass(frozen=True)
class SocProblem:
    """Immutable gradient-drift stochastic optimal control problem."""

    dim: int
    energy: ScalarField
    running_cost: ScalarField
    terminal_cost: ScalarField
    beta: float
    horizon: float
    initial_law: InitialLaw = field(default=None)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.initial_law is None:
            object.__setattr__(self, "initial_law", point_mass(np.zeros(self.dim)))


def _as_batch(problem_dim: int, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != problem_dim:
        raise DimensionMismatchError(
            f"point has dimension {x.shape[1]}, problem has dimension {problem_dim}"
        )
    return x, single


def effective_potential(problem: SocProblem, x) -> np.ndarray | float:
    """Schrodinger potential beta^2 |grad E|^2 - beta lap E + 2 beta^2 f."""
    xb, single = _as_batch(problem.dim, x)
    b = problem.beta
    gE = problem.energy.grad(xb)
    v = (
        b ** 2 * np.sum(gE ** 2, axis=1)
        - b * problem.energy.laplacian(xb)
        + 2.0 * b ** 2 * problem.running_cost.value(xb)
    )
    return float(v[0]) if single else v


def apply_L(problem: SocProblem, psi: ScalarField, x) -> np.ndarray | float:
    """-lap psi + 2 beta <grad E, grad psi> + 2 beta^2 f psi."""
    xb, single = _as_batch(problem.dim, x)
    b = problem.beta
    out = (
        -psi.laplacian(xb)
        + 2.0 * b * np.sum(problem.energy.grad(xb) * psi.grad(xb), axis=1)
        + 2.0 * b ** 2 * problem.running_cost.value(xb) * psi.value(xb)
    )
    return float(out[0]) if single else out


def apply_K(problem: SocProblem, v: ScalarField, x) -> np.ndarray | float:
    """HJB operator (1/2beta) lap v - <grad E, grad v> - |grad v|^2/2 + f."""
    xb, single = _as_batch(problem.dim, x)
    b = problem.beta
    gv = v.grad(xb)
    out = (
        v.laplacian(xb) / (2.0 * b)
        - np.sum(problem.energy.grad(xb) * gv, axis=1)
        - 0.5 * np.sum(gv ** 2, axis=1)
        + problem.running_cost.value(xb)
    )
    return float(out[0]) if single else out


@dataclass(frozen=True)
class AssumptionReport:
    """Advisory evidence for confinement of the effective potential."""

    v_min: float
    v_argmin: np.ndarray
    interior_median: float
    boundary_min: float
    growth_flag: bool
    n_probe: int


def check_assumptions(
    problem: SocProblem, box_half_width: float, n_probe: int, seed: int = 0
) -> AssumptionReport:
    """Probe the effective potential on a box; advisory only, never blocks.

    Growth evidence: the minimum of V over a thin boundary shell exceeds the
    median of V over the interior. Lower-boundedness evidence: min over all
    probe points.
    """
    if n_probe < 2:
        raise ValueError("n_probe must be >= 2")
    rng = np.random.default_rng(seed)
    hw = float(box_half_width)
    pts = rng.uniform(-hw, hw, size=(n_probe, problem.dim))
    # force some probes onto the boundary shell so the flag is well defined
    n_shell = max(n_probe // 4, 1)
    shell = rng.uniform(-hw, hw, size=(n_shell, problem.dim))
    axes = rng.integers(0, problem.dim, size=n_shell)
    signs = rng.choice([-1.0, 1.0], size=n_shell)
    shell[np.arange(n_shell), axes] = signs * hw
    pts = np.vstack([pts, shell])

    v = effective_potential(problem, pts)
    if np.isscalar(v):
        v = np.atleast_1d(v)
    inf_norm = np.max(np.abs(pts), axis=1)
    on_shell = inf_norm >= 0.9 * hw
    interior = ~on_shell
    interior_median = float(np.median(v[interior])) if interior.any() else float(np.median(v))
    boundary_min = float(np.min(v[on_shell])) if on_shell.any() else float("nan")
    i_min = int(np.argmin(v))
    return AssumptionReport(
        v_min=float(v[i_min]),
        v_argmin=pts[i_min],
        interior_median=interior_median,
        boundary_min=boundary_min,
        growth_flag=bool(on_shell.any() and boundary_min > interior_median),
        n_probe=int(pts.shape[0]),
    )
