"""Euler-Maruyama simulation, objective and error metrics, hybrid control,
and log-variance training of the short-horizon correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import SocProblem


class SimulationDivergenceError(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"trajectory diverged at step {step}")
        self.step = step


class LogVarTrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrajectoryBatch:
    time_grid: np.ndarray          # (K+1,) uniform on [t_start, T]
    states: np.ndarray             # (batch, K+1, d)
    noise: np.ndarray              # (batch, K, d) standard normal draws
    seed: int


def euler_maruyama(
    problem: SocProblem,
    control,
    t_start: float,
    batch: int,
    K: int,
    seed: int,
    x0: np.ndarray | None = None,
) -> TrajectoryBatch:
    """X_{k+1} = X_k + (-grad E + u) dt + sqrt(dt/beta) xi_k.

    control is a callable (x batch, t) -> (batch, d), or None for u = 0.
    Initial states come from the problem's initial law unless supplied.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = np.random.default_rng(seed)
    if x0 is None:
        x0 = problem.initial_law.sample(rng, batch)
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    T = problem.horizon
    dt = (T - t_start) / K
    times = t_start + dt * np.arange(K + 1)
    noise = rng.standard_normal((x0.shape[0], K, problem.dim))
    states = np.empty((x0.shape[0], K + 1, problem.dim))
    states[:, 0] = x0
    sig = np.sqrt(dt / problem.beta)
    x = x0
    for k in range(K):
        drift = -problem.energy.grad(x)
        if control is not None:
            drift = drift + control(x, times[k])
        x = x + drift * dt + sig * noise[:, k]
        if not np.all(np.isfinite(x)):
            raise SimulationDivergenceError(k)
        states[:, k + 1] = x
    return TrajectoryBatch(time_grid=times, states=states, noise=noise, seed=seed)


def path_cost(problem: SocProblem, control, traj: TrajectoryBatch) -> np.ndarray:
    """Per-path left-endpoint quadrature of int (|u|^2/2 + f) dt + g(X_T)."""
    dt = traj.time_grid[1] - traj.time_grid[0]
    cost = np.zeros(traj.states.shape[0])
    for k in range(traj.time_grid.size - 1):
        xk = traj.states[:, k]
        u = control(xk, traj.time_grid[k]) if control is not None else 0.0
        run = problem.running_cost.value(xk)
        if control is not None:
            run = run + 0.5 * np.sum(u ** 2, axis=1)
        cost += run * dt
    return cost + problem.terminal_cost.value(traj.states[:, -1])


def _streamed_cost(problem: SocProblem, control, batch: int, K: int, seed: int) -> np.ndarray:
    """Per-path costs with left-endpoint quadrature, without storing paths."""
    rng = np.random.default_rng(seed)
    x = problem.initial_law.sample(rng, batch)
    T = problem.horizon
    dt = T / K
    sig = np.sqrt(dt / problem.beta)
    cost = np.zeros(batch)
    for k in range(K):
        t = k * dt
        run = problem.running_cost.value(x)
        drift = -problem.energy.grad(x)
        if control is not None:
            u = control(x, t)
            run = run + 0.5 * np.sum(u ** 2, axis=1)
            drift = drift + u
        cost += run * dt
        x = x + drift * dt + sig * rng.standard_normal(x.shape)
        if not np.all(np.isfinite(x)):
            raise SimulationDivergenceError(k)
    return cost + problem.terminal_cost.value(x)


def control_objective(
    problem: SocProblem, control, batch: int, K: int, seed: int, chunk: int = 16384
):
    """Monte Carlo estimate of the control objective: (mean, standard error).

    Large batches are simulated in chunks with seeds derived from the base
    seed, so the result is deterministic and memory stays bounded.
    """
    if batch < 2:
        raise ValueError("batch must be >= 2")
    costs = []
    done = 0
    i = 0
    while done < batch:
        b = min(chunk, batch - done)
        costs.append(_streamed_cost(problem, control, b, K, seed + i))
        done += b
        i += 1
    cost = np.concatenate(costs)
    return float(np.mean(cost)), float(np.std(cost, ddof=1) / np.sqrt(batch))


def l2_error(control, reference, traj: TrajectoryBatch):
    """E_t |u - u*|^2 along reference trajectories: (per-time curve, average)."""
    times = traj.time_grid
    curve = np.empty(times.size)
    for k in range(times.size):
        xk = traj.states[:, k]
        diff = control(xk, times[k]) - reference(xk, times[k])
        curve[k] = np.mean(np.sum(diff ** 2, axis=1))
    return curve, float(np.mean(curve))


def choose_tcut(lambda0: float, lambda1: float, beta: float, epsilon: float, T: float) -> float:
    """T_cut = max(0, T + 2 beta log(eps) / (lambda1 - lambda0))."""
    gap = lambda1 - lambda0
    if gap <= 0:
        raise ValueError("spectral gap must be positive")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    return max(0.0, T + 2.0 * beta * np.log(epsilon) / gap)


def default_epsilon(lambda0: float, lambda1: float, beta: float) -> float:
    """Epsilon making T - T_cut = 1 (the switch threshold used throughout)."""
    return float(np.exp(-(lambda1 - lambda0) / (2.0 * beta)))


@dataclass
class HybridControl:
    """Ground-state control plus a damped short-horizon correction.

    u(x,t) = beta^{-1} grad log phi_0(x) for t <= t_cut, and additionally
    beta^{-1} e^{-(lambda1-lambda0)(T-t)/(2 beta)} v(x,t) for t > t_cut.
    """

    grad_log_phi0: object          # callable (n,d) -> (n,d)
    lambda0: float
    lambda1: float
    correction: object             # TimeFeatureCorrection or None
    t_cut: float
    beta: float
    T: float

    def __post_init__(self):
        if not self.lambda1 > self.lambda0:
            raise ValueError("lambda1 must exceed lambda0")
        if not self.t_cut < self.T:
            raise ValueError("t_cut must be < T")

    def damp(self, t: float) -> float:
        gap = self.lambda1 - self.lambda0
        return float(np.exp(-gap * (self.T - t) / (2.0 * self.beta)))


def hybrid_control(h: HybridControl):
    def u(x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = h.grad_log_phi0(x) / h.beta
        if h.correction is not None and t > h.t_cut:
            out = out + (h.damp(t) / h.beta) * h.correction.value(x, t)
        return out

    return u


def logvar_loss_and_grad(
    problem: SocProblem,
    control,
    grad_control_dot,
    t_start: float,
    batch: int,
    K: int,
    seed: int,
    x0: np.ndarray | None = None,
):
    """Log-variance loss Var(Ytilde - g(X_T)) and its parameter gradient.

    Paths are simulated under the current control with parameter gradients
    detached (v = stopgrad(u)), in which case the Girsanov integrand
    collapses to Ytilde = -int (|u|^2/2 + f) dt - sqrt(1/beta) int u . dW and
    the theta-gradient flows only through the Ito integral:
    dY/dtheta = -sqrt(1/beta) int (du/dtheta) . dW.
    grad_control_dot(x, t, a) must return d/dtheta of sum_k u_k(x,t) a_k per
    sample, shape (n, p).
    """
    if batch < 2:
        raise ValueError("batch must be >= 2")
    traj = euler_maruyama(problem, control, t_start, batch, K, seed, x0)
    dt = traj.time_grid[1] - traj.time_grid[0]
    sqdt = np.sqrt(dt)
    inv_sqrt_beta = 1.0 / np.sqrt(problem.beta)
    y = np.zeros(batch)
    gy = None
    for k in range(K):
        xk = traj.states[:, k]
        t = traj.time_grid[k]
        u = control(xk, t)
        dw = sqdt * traj.noise[:, k]
        y += (-0.5 * np.sum(u ** 2, axis=1) - problem.running_cost.value(xk)) * dt
        y -= inv_sqrt_beta * np.sum(u * dw, axis=1)
        g = grad_control_dot(xk, t, dw)
        gy = -inv_sqrt_beta * g if gy is None else gy - inv_sqrt_beta * g
    y -= problem.terminal_cost.value(traj.states[:, -1])
    if not np.all(np.isfinite(y)):
        raise LogVarTrainingError("non-finite pathwise values in the log-variance loss")
    ybar = np.mean(y)
    loss = float(np.var(y, ddof=0))
    grad = 2.0 * np.mean((y - ybar).reshape(batch, *([1] * (gy.ndim - 1))) * gy, axis=0)
    return loss, grad, traj


@dataclass(frozen=True)
class LogVarConfig:
    iterations: int = 500
    batch: int = 256
    learning_rate: float = 1e-2
    refresh_every: int = 100           # iterations between start-state refreshes
    K: int = 100                       # steps on [t_cut, T]
    K_warm: int = 100                  # steps for rolling 0 -> t_cut
    seed: int = 0


def train_logvar_correction(problem: SocProblem, h: HybridControl, config: LogVarConfig):
    """Minimize the log-variance loss over the correction parameters.

    Start states at t_cut come from rolling the pure ground-state control on
    [0, t_cut], refreshed every refresh_every iterations. Returns the updated
    HybridControl and a diagnostics dict with the loss trace.
    """
    if config.batch < 2:
        raise ValueError("batch must be >= 2")
    from .training import Adam

    corr = h.correction
    if corr is None:
        raise ValueError("hybrid control has no correction to train")
    opt = Adam(config.learning_rate)
    rng = np.random.default_rng(config.seed)
    trace = []
    x_start = None
    ground = HybridControl(h.grad_log_phi0, h.lambda0, h.lambda1, None,
                           h.t_cut, h.beta, h.T)
    u_ground = hybrid_control(ground)
    for it in range(config.iterations):
        if it % config.refresh_every == 0:
            if h.t_cut > 0:
                sub = SocProblem(
                    dim=problem.dim,
                    energy=problem.energy,
                    running_cost=problem.running_cost,
                    terminal_cost=problem.terminal_cost,
                    beta=problem.beta,
                    horizon=h.t_cut,
                    initial_law=problem.initial_law,
                )
                warm = euler_maruyama(
                    sub, u_ground, 0.0, config.batch, config.K_warm,
                    int(rng.integers(2 ** 31)),
                )
                x_start = warm.states[:, -1]
            else:
                x_start = problem.initial_law.sample(rng, config.batch)
        hc = HybridControl(h.grad_log_phi0, h.lambda0, h.lambda1, corr,
                           h.t_cut, h.beta, h.T)
        u = hybrid_control(hc)

        def gdot(x, t, a, hc=hc, corr=corr):
            if t <= hc.t_cut:
                return np.zeros((x.shape[0],) + corr.theta.shape)
            return (hc.damp(t) / hc.beta) * corr.grad_theta_dot(x, t, a)

        loss, grad, _ = logvar_loss_and_grad(
            problem, u, gdot, h.t_cut, config.batch, config.K,
            int(rng.integers(2 ** 31)), x0=x_start,
        )
        if not np.isfinite(loss):
            raise LogVarTrainingError(f"loss became non-finite at iteration {it}")
        trace.append(loss)
        corr = corr.with_theta(opt.step(corr.theta.ravel(), grad.ravel()))
    out = HybridControl(h.grad_log_phi0, h.lambda0, h.lambda1, corr,
                        h.t_cut, h.beta, h.T)
    return out, {"loss_trace": trace}
