"""Benchmark registry and run orchestration.

Six settings (quadratic isotropic / repulsive / anisotropic, double well,
ring, opinion) with their published parameterizations, six control methods
(riccati, eigf-exact, eigf-grid, eigf-learned, hybrid, zero-control), and
deterministic machine-readable metric emission.
"""

from __future__ import annotations

import json
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .fields import (
    ScalarField,
    double_well_field,
    linear_field,
    quadratic_field,
    ring_field,
    zero_field,
)
from .grid import (
    Grid1D,
    ProductSeriesControl,
    eigf_control,
    schrodinger_fd_1d,
    schrodinger_fd_2d,
    tensor_eigensystem,
    to_L_eigenfunctions,
)
from .models import TimeFeatureCorrection
from .oscillator import (
    QuadraticProblem,
    lqr_eigensystem,
    lqr_series_control,
    riccati_control,
    riccati_solve,
)
from .problem import SocProblem, gaussian_law, point_mass
from .simulate import (
    HybridControl,
    LogVarConfig,
    choose_tcut,
    control_objective,
    default_epsilon,
    euler_maruyama,
    hybrid_control,
    l2_error,
    train_logvar_correction,
)
from .training import TrainConfig, train_two_phase

SCHEMA_VERSION = 1
METHODS = ("riccati", "eigf-exact", "eigf-grid", "eigf-learned", "hybrid", "zero-control")
BENCH_NAMES = (
    "quadratic-isotropic",
    "quadratic-repulsive",
    "quadratic-anisotropic",
    "double-well",
    "ring",
    "opinion",
)


class BenchmarkError(RuntimeError):
    pass


@dataclass
class BenchmarkConfig:
    name: str
    method: str = "zero-control"
    seed: int = 0
    batch: int = 65536                 # objective trajectories
    l2_batch: int = 4096               # reference trajectories for L2 curves
    k_modes: int = 8
    smoke: bool = False
    assumptions: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in BENCH_NAMES:
            raise BenchmarkError(
                f"unknown benchmark {self.name!r}; available: {', '.join(BENCH_NAMES)}"
            )
        if self.method not in METHODS:
            raise BenchmarkError(
                f"unknown method {self.method!r}; available: {', '.join(METHODS)}"
            )
        if self.smoke:
            self.batch = min(self.batch, 256)
            self.l2_batch = min(self.l2_batch, 256)


def registry() -> list[BenchmarkConfig]:
    return [BenchmarkConfig(name) for name in BENCH_NAMES]


def _random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish orthogonal matrix via QR of a Gaussian with sign fix."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _opinion_matrix(d: int, gamma: float = 0.1) -> np.ndarray:
    L = np.zeros((d, d))
    np.fill_diagonal(L, 0.5)
    for i in range(d - 1):
        L[i, i + 1] = 0.25
        L[i + 1, i] = 0.25
    return gamma * np.eye(d) + np.eye(d) - L


def build_problem(config: BenchmarkConfig):
    """Returns (SocProblem, extras) with method-relevant matrices and grids."""
    name = config.name
    extras: dict = {"K": 200}
    if name.startswith("quadratic"):
        d = 20
        rng = np.random.default_rng(config.seed)
        if name == "quadratic-isotropic":
            A = np.eye(d)
            P = np.eye(d)
        elif name == "quadratic-repulsive":
            A = -np.eye(d)
            P = np.eye(d)
        else:
            a = rng.standard_normal(d)
            p = rng.standard_normal(d)
            U = _random_orthogonal(d, rng)
            A = np.diag(np.exp(a))
            P = U @ np.diag(np.exp(p)) @ U.T
        Q = 0.5 * np.eye(d)
        prob = SocProblem(
            dim=d,
            energy=quadratic_field(0.5 * A),
            running_cost=quadratic_field(P),
            terminal_cost=quadratic_field(Q),
            beta=1.0,
            horizon=4.0,
            initial_law=gaussian_law(np.zeros(d), np.sqrt(0.5)),
        )
        extras.update(A=A, P=P, Q=Q, K=200)
        return prob, extras
    if name == "double-well":
        d = 10
        kappa = np.array([5.0, 5.0, 5.0] + [1.0] * 7)
        nu = np.array([3.0, 3.0, 3.0] + [1.0] * 7)
        prob = SocProblem(
            dim=d,
            energy=double_well_field(kappa),
            running_cost=double_well_field(nu),
            terminal_cost=zero_field(),
            beta=1.0,
            horizon=4.0,
            initial_law=point_mass(np.zeros(d)),
        )
        extras.update(kappa=kappa, nu=nu, K=400, box=(-8.0, 8.0))
        return prob, extras
    if name == "ring":
        R = 5.0 / np.sqrt(2.0)
        prob = SocProblem(
            dim=2,
            energy=ring_field(1.0, R),
            running_cost=linear_field([2.0, 0.0]),
            terminal_cost=zero_field(),
            beta=1.0,
            horizon=5.0,
            initial_law=point_mass([R, 0.0]),
        )
        extras.update(K=500, box=(-6.0, 6.0))
        return prob, extras
    if name == "opinion":
        d = 10
        M = _opinion_matrix(d)
        prob = SocProblem(
            dim=d,
            energy=quadratic_field(0.5 * M),
            running_cost=double_well_field(np.ones(d)),
            terminal_cost=zero_field(),
            beta=1.0,
            horizon=10.0,
            initial_law=point_mass(np.zeros(d)),
        )
        # K and x0 are not published for this setting; both are assumptions
        config.assumptions.update({"K": 200, "x0": "0"})
        extras.update(M=M, K=200)
        return prob, extras
    raise BenchmarkError(f"unknown benchmark {config.name!r}")


def _schrodinger_potential(problem: SocProblem):
    b = problem.beta

    def v(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        gE = problem.energy.grad(x)
        return (
            b ** 2 * np.sum(gE ** 2, axis=1)
            - b * problem.energy.laplacian(x)
            + 2.0 * b ** 2 * problem.running_cost.value(x)
        )

    return v


def grid_reference_system(config: BenchmarkConfig, problem: SocProblem, extras,
                          n_1d: int = 2000, n_2d: int = 151, k: int | None = None):
    """Grid eigensystem in L-space for the separable or 2-D settings."""
    k = k or config.k_modes
    lo, hi = extras.get("box", (-8.0, 8.0))
    if config.name == "double-well":
        kappa, nu = extras["kappa"], extras["nu"]
        b = problem.beta
        per_dim = []
        for i in range(problem.dim):
            ki, ni = kappa[i], nu[i]

            def v(x, ki=ki, ni=ni):
                gE = 4.0 * ki * x * (x ** 2 - 1.0)
                lapE = ki * (12.0 * x ** 2 - 4.0)
                return b ** 2 * gE ** 2 - b * lapE + 2.0 * b ** 2 * ni * (x ** 2 - 1.0) ** 2

            n = n_1d if config.smoke is False else 500
            per_dim.append(schrodinger_fd_1d(v, Grid1D(lo, hi, n), max(k, 8)))
        sys_s = tensor_eigensystem(per_dim, k)
        return to_L_eigenfunctions(sys_s, problem.energy, problem.beta)
    if config.name == "ring":
        # no smoke downgrade here: the ring well is ~0.1 wide, and coarser
        # grids produce a ground state whose log-gradient is unusable
        g = Grid1D(lo, hi, n_2d)
        sys_s = schrodinger_fd_2d(_schrodinger_potential(problem), g, g, min(k, 16))
        return to_L_eigenfunctions(sys_s, problem.energy, problem.beta)
    raise BenchmarkError(f"no grid route for benchmark {config.name!r}")


def _quadratic_problem(problem: SocProblem, extras) -> QuadraticProblem:
    return QuadraticProblem(
        A=extras["A"], P=extras["P"], Q=extras["Q"],
        beta=problem.beta, horizon=problem.horizon,
    )


def build_control(config: BenchmarkConfig, problem: SocProblem, extras):
    """Assemble the control for the configured method.

    Returns (control callable or None, info dict)."""
    info: dict = {}
    method = config.method
    if method == "zero-control":
        return None, info
    if method == "riccati":
        if "A" not in extras:
            raise BenchmarkError("riccati method requires a quadratic benchmark")
        sol = riccati_solve(_quadratic_problem(problem, extras), steps=2000)
        return riccati_control(sol), info
    if method == "eigf-exact":
        if "A" not in extras:
            raise BenchmarkError("eigf-exact requires a quadratic benchmark")
        es = lqr_eigensystem(_quadratic_problem(problem, extras), config.k_modes)
        ctrl = lqr_series_control(es, q_matrix=extras["Q"])
        info["eigenvalues"] = es.eigenvalues
        return ctrl, info
    if method == "eigf-grid":
        sys_l = grid_reference_system(config, problem, extras)
        ctrl = eigf_control(sys_l, problem.terminal_cost, problem.beta,
                            problem.horizon, config.k_modes)
        info["eigenvalues"] = sys_l.eigenvalues
        return ctrl, info
    if method == "eigf-learned":
        tc = _train_config(config, problem)
        model, lam0, lam1, diag = train_two_phase(problem, tc)
        info.update(lambda0=lam0, lambda1=lam1, model=model,
                    phase_switch=diag.phase_switch_iter)

        def ctrl(x, t, model=model):
            return -model.grad_v0(np.atleast_2d(np.asarray(x, dtype=float)))

        return ctrl, info
    if method == "hybrid":
        return _build_hybrid(config, problem, extras, info)
    raise BenchmarkError(f"unknown method {config.method!r}")


def _train_config(config: BenchmarkConfig, problem: SocProblem) -> TrainConfig:
    repulsive = config.name == "quadratic-repulsive"
    if config.smoke:
        return TrainConfig(
            iterations=600, phase2_iterations=200, min_phase1_iters=400,
            batch_size=256, warmup_steps=200, seed=config.seed,
            learning_rate=1e-2, n_centers=16, importance_route=repulsive,
        )
    return TrainConfig(
        iterations=20000, phase2_iterations=5000, batch_size=4096,
        seed=config.seed, learning_rate=1e-3, importance_route=repulsive,
    )


def _dw_coordinate_controls(config: BenchmarkConfig, problem: SocProblem, extras):
    """One 1-D eigenseries control per coordinate of the separable double well."""
    kappa, nu = extras["kappa"], extras["nu"]
    b, T = problem.beta, problem.horizon
    lo, hi = extras.get("box", (-8.0, 8.0))
    n = 500 if config.smoke else 2000
    cache: dict = {}
    controls = []
    for ki, ni in zip(kappa, nu):
        if (ki, ni) not in cache:
            def v(x, ki=ki, ni=ni):
                gE = 4.0 * ki * x * (x ** 2 - 1.0)
                lapE = ki * (12.0 * x ** 2 - 4.0)
                return b ** 2 * gE ** 2 - b * lapE + 2.0 * b ** 2 * ni * (x ** 2 - 1.0) ** 2

            gs = schrodinger_fd_1d(v, Grid1D(lo, hi, n), 8)
            ls = to_L_eigenfunctions(gs, double_well_field([ki]), b)
            cache[(ki, ni)] = eigf_control(ls, zero_field(), b, T, 8)
        controls.append(cache[(ki, ni)])
    return controls


def _first_live_gap(eigenvalues, coeffs, tol: float = 1e-8) -> float:
    """Gap to the first excited mode with a non-vanishing series coefficient.

    The raw lambda_1 - lambda_0 can badly underestimate the decay rate of the
    control correction: for symmetric wells the near-degenerate tunneling
    modes are odd and drop out of the expansion of e^{-beta g} by parity."""
    live = np.nonzero(np.abs(coeffs[1:]) > tol)[0]
    j = int(live[0]) + 1 if live.size else 1
    return float(eigenvalues[j] - eigenvalues[0])


def _build_hybrid(config: BenchmarkConfig, problem: SocProblem, extras, info):
    beta, T = problem.beta, problem.horizon
    if config.name in ("double-well", "ring"):
        sys_l = grid_reference_system(config, problem, extras)
        lam0 = float(sys_l.eigenvalues[0])
        glp0 = lambda x: sys_l.grad_log_phi(0, x)
        if config.name == "double-well":
            gaps = [
                _first_live_gap(c.sys.eigenvalues, c.coeffs)
                for c in _dw_coordinate_controls(config, problem, extras)
            ]
            lam1 = lam0 + min(gaps)
        else:
            c2d = eigf_control(sys_l, problem.terminal_cost, beta, T, sys_l.k)
            lam1 = lam0 + _first_live_gap(sys_l.eigenvalues, c2d.coeffs)
    elif "A" in extras:
        es = lqr_eigensystem(_quadratic_problem(problem, extras), 2)
        lam0, lam1 = float(es.eigenvalues[0]), float(es.eigenvalues[1])
        glp0 = lambda x: es.grad_log_phi(0, np.atleast_2d(np.asarray(x, dtype=float)))
    else:
        tc = _train_config(config, problem)
        model, lam0, lam1, _ = train_two_phase(problem, tc)
        if not lam1 > lam0:
            lam1 = lam0 + 1.0
        glp0 = lambda x: -problem.beta * model.grad_v0(
            np.atleast_2d(np.asarray(x, dtype=float))
        )
    eps = default_epsilon(lam0, lam1, beta)
    t_cut = choose_tcut(lam0, lam1, beta, eps, T)
    corr = TimeFeatureCorrection(problem.dim, T)
    h = HybridControl(glp0, lam0, lam1, corr, t_cut, beta, T)
    lv = LogVarConfig(
        iterations=50 if config.smoke else 500,
        batch=64 if config.smoke else 256,
        K=extras["K"] // 4,
        seed=config.seed,
    )
    h, diag = train_logvar_correction(problem, h, lv)
    info.update(lambda0=lam0, lambda1=lam1, t_cut=t_cut,
                logvar_final=diag["loss_trace"][-1])
    return hybrid_control(h), info


def build_reference(config: BenchmarkConfig, problem: SocProblem, extras):
    """Best-available optimal control for L2 error, or None (opinion)."""
    if "A" in extras:
        sol = riccati_solve(_quadratic_problem(problem, extras), steps=2000)
        return riccati_control(sol)
    if config.name == "double-well":
        # the problem separates coordinatewise (g = 0), so the reference is a
        # product of 1-D series controls; each factor keeps the even excited
        # modes that carry the near-terminal correction, which a low-order
        # tensor truncation misses (its low modes are odd by parity)
        return ProductSeriesControl(_dw_coordinate_controls(config, problem, extras))
    if config.name == "ring":
        k_ref = 8 if config.smoke else 16
        sys_l = grid_reference_system(config, problem, extras, k=k_ref)
        return eigf_control(sys_l, problem.terminal_cost, problem.beta,
                            problem.horizon, k_ref)
    return None


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def write_metrics(path: str, scalars: dict, curve=None) -> None:
    lines = [f"schema={SCHEMA_VERSION}"]
    for key, val in scalars.items():
        lines.append(f"{key}={_fmt(val) if isinstance(val, float) else val}")
    if curve is not None:
        lines.append("")
        lines.append("t,l2_error")
        t, vals = curve
        for ti, vi in zip(t, vals):
            lines.append(f"{_fmt(ti)},{_fmt(vi)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_metrics(path: str):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith("schema="):
        raise BenchmarkError(f"{path}: missing schema header")
    schema = int(lines[0].split("=", 1)[1])
    if schema != SCHEMA_VERSION:
        raise BenchmarkError(f"{path}: schema version {schema} != {SCHEMA_VERSION}")
    scalars: dict = {}
    curve_t, curve_v = [], []
    in_curve = False
    for ln in lines[1:]:
        if not ln:
            continue
        if ln == "t,l2_error":
            in_curve = True
            continue
        if in_curve:
            t, v = ln.split(",")
            curve_t.append(float(t))
            curve_v.append(float(v))
        else:
            key, val = ln.split("=", 1)
            scalars[key] = val
    curve = (np.array(curve_t), np.array(curve_v)) if curve_t else None
    return scalars, curve


def run(config: BenchmarkConfig, output_dir: str) -> dict:
    """Execute the pipeline and write manifest + metrics. Returns file paths."""
    os.makedirs(output_dir, exist_ok=True)
    problem, extras = build_problem(config)
    # K stays at its published value even in smoke mode: the quartic drifts
    # need the fine step for explicit Euler stability; smoke economizes on
    # batch sizes and grid resolution instead
    K = extras["K"]
    control, info = build_control(config, problem, extras)
    obj_mean, obj_err = control_objective(problem, control, config.batch, K, config.seed)

    scalars = {
        "name": config.name,
        "method": config.method,
        "seed": str(config.seed),
        "batch": str(config.batch),
        "K": str(K),
        "objective_mean": float(obj_mean),
        "objective_stderr": float(obj_err),
    }
    for key in ("lambda0", "lambda1", "t_cut"):
        if key in info:
            scalars[key] = float(info[key])

    curve = None
    reference = build_reference(config, problem, extras)
    if reference is not None:
        ref_traj = euler_maruyama(problem, reference, 0.0, config.l2_batch, K,
                                  config.seed + 10000)
        ctrl_for_err = control if control is not None else (
            lambda x, t: np.zeros_like(np.atleast_2d(x))
        )
        per_time, avg = l2_error(ctrl_for_err, reference, ref_traj)
        scalars["l2_average"] = float(avg)
        curve = (ref_traj.time_grid, per_time)

    stem = f"{config.name}_{config.method}_seed{config.seed}"
    metrics_path = os.path.join(output_dir, f"{stem}.metrics")
    manifest_path = os.path.join(output_dir, f"{stem}.manifest.json")
    write_metrics(metrics_path, scalars, curve)
    manifest = {
        "config": {
            "name": config.name,
            "method": config.method,
            "seed": config.seed,
            "batch": config.batch,
            "l2_batch": config.l2_batch,
            "k_modes": config.k_modes,
            "smoke": config.smoke,
        },
        "assumptions": config.assumptions,
        "versions": {
            "eigctrl": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return {"metrics": metrics_path, "manifest": manifest_path}


def report(result_files: list[str]) -> str:
    """Aligned comparison table across metric files."""
    if not result_files:
        raise BenchmarkError("report needs at least one result file")
    rows = []
    for path in result_files:
        scalars, _ = read_metrics(path)
        rows.append(
            (
                scalars.get("name", "?"),
                scalars.get("method", "?"),
                scalars.get("seed", "?"),
                scalars.get("objective_mean", "nan"),
                scalars.get("objective_stderr", "nan"),
                scalars.get("l2_average", "-"),
            )
        )
    header = ("name", "method", "seed", "objective", "stderr", "l2_avg")
    widths = [max(len(header[i]), *(len(str(r[i])) for r in rows)) for i in range(6)]
    out = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for r in rows:
        out.append("  ".join(str(c).ljust(w) for c, w in zip(r, widths)))
    return "\n".join(out)
