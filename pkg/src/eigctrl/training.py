"""Two-phase eigenfunction training.

Phase 1 minimizes the deep Ritz loss until the running eigenvalue estimate
stabilizes; phase 2 freezes lambda_0, fine-tunes with the relative loss and
concurrently trains a two-function system with the multi variational loss to
extract the spectral gap.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .fields import ScalarField, scale_field
from .losses import (
    extract_eigvals,
    loss_deep_ritz,
    loss_pinn,
    loss_relative,
    loss_variational_multi,
    make_tables,
)
from .models import GaussianRbfModel, ShiftedModel
from .problem import SocProblem
from .sampling import init_sampler, mala_step, warmup

CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    iterations: int = 20000            # phase-1 cap
    phase2_iterations: int = 5000
    reg_alpha: float = 1.0
    batch_size: int = 4096
    seed: int = 0
    var_threshold: float = 1e-4        # EMA variance of eigenvalue estimates
    min_phase1_iters: int = 5000
    ema_factor: float = 0.5
    n_centers: int = 32
    mcmc_refresh: int = 100            # iterations between sample refreshes
    mcmc_steps: int = 100              # MALA steps per refresh
    mcmc_dt: float = 0.01
    warmup_steps: int = 1000
    importance_route: bool = False     # sample mubar ∝ e^{+2 beta E}, train V0bar
    lambda_trainable: bool = False     # ablation: re-estimate lambda_hat in phase 2
    phase2_loss: str = "relative"      # relative | pinn | deep-ritz

    def __post_init__(self):
        for name in ("learning_rate", "iterations", "phase2_iterations", "reg_alpha",
                     "batch_size", "var_threshold", "min_phase1_iters", "n_centers",
                     "mcmc_refresh", "mcmc_steps", "mcmc_dt", "warmup_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def digest(self) -> str:
        return hashlib.sha256(repr(self).encode()).hexdigest()[:16]


class Adam:
    """Per-parameter adaptive first-order updates (EMA of grad and grad^2)."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad ** 2
        mh = self.m / (1.0 - self.beta1 ** self.t)
        vh = self.v / (1.0 - self.beta2 ** self.t)
        return theta - self.lr * mh / (np.sqrt(vh) + self.eps)


@dataclass
class Diagnostics:
    loss_trace: list = field(default_factory=list)
    lambda_trace: list = field(default_factory=list)
    phase2_loss_trace: list = field(default_factory=list)
    acceptance_rate: float = 0.0
    phase_switch_iter: int = -1
    converged_phase1: bool = False
    lambda1_raw: np.ndarray | None = None


def _sampling_energy(problem: SocProblem, importance: bool) -> ScalarField:
    return scale_field(problem.energy, -1.0) if importance else problem.energy


def train_two_phase(problem: SocProblem, config: TrainConfig, k: int = 2):
    """Returns (model for phi_0, lambda_0, lambda_1, diagnostics).

    On the importance route the returned model is a ShiftedModel exposing the
    physical V0 = V0bar - 2E while training happened on V0bar against mubar.
    """
    rng = np.random.default_rng(config.seed)
    beta = problem.beta
    f = problem.running_cost
    E_sample = _sampling_energy(problem, config.importance_route)

    # start chains in a tight cloud and let warm-up adaptation grow the step
    # size; wide initializations can strand chains where steep gradients make
    # MALA reject every proposal
    x0 = 0.5 * rng.standard_normal((config.batch_size, problem.dim))
    state = init_sampler(x0, dt=config.mcmc_dt / 100.0, seed=config.seed + 1)
    warmup(state, E_sample, beta, config.warmup_steps)

    base = GaussianRbfModel.from_samples(state.chains, config.n_centers, seed=config.seed)
    model = (
        ShiftedModel(base, scale_field(problem.energy, -2.0))
        if config.importance_route
        else base
    )

    diag = Diagnostics()
    opt = Adam(config.learning_rate)
    tables = make_tables(model, state.chains, f, problem.energy)
    lam_est = None
    ema_mean = None
    ema_var = None
    alpha = config.reg_alpha

    # phase 1: deep Ritz
    it = 0
    for it in range(1, config.iterations + 1):
        value, grad = loss_deep_ritz(model, None, f, problem.energy, beta, alpha, tables=tables)
        model = model.with_theta(opt.step(model.theta, grad))
        diag.loss_trace.append(value)
        if it % config.mcmc_refresh == 0:
            mala_step(state, E_sample, beta, config.mcmc_steps)
            tables = make_tables(model, state.chains, f, problem.energy)
        if it % 100 == 0:
            lam_est, _ = loss_deep_ritz(
                model, None, f, problem.energy, beta, 0.0, tables=tables
            )
            diag.lambda_trace.append(lam_est)
            if ema_mean is None:
                ema_mean, ema_var = lam_est, 0.0
            else:
                c = config.ema_factor
                delta = lam_est - ema_mean
                ema_mean = c * ema_mean + (1.0 - c) * lam_est
                ema_var = c * (ema_var + (1.0 - c) * delta ** 2)
            if it >= config.min_phase1_iters and ema_var is not None and ema_var < config.var_threshold:
                diag.converged_phase1 = True
                break
    diag.phase_switch_iter = it
    if lam_est is None:
        raise TrainingError("phase 1 produced no eigenvalue estimate")
    lam0 = float(ema_mean if ema_mean is not None else lam_est)

    # phase 2: freeze lambda_0, fine-tune with the relative loss; concurrently
    # train a second function through the multi variational loss for the gap
    pair = [model.with_theta(model.theta.copy()),
            model.with_theta(model.theta + 0.05 * rng.standard_normal(model.theta.size))]
    alpha_multi = max(abs(lam0), 1e-3)
    opt2 = Adam(config.learning_rate)
    opt_pair = [Adam(config.learning_rate), Adam(config.learning_rate)]
    pair_tables = [make_tables(m, state.chains, f, problem.energy) for m in pair]
    lam_hat = lam0
    if config.phase2_loss not in ("relative", "pinn", "deep-ritz"):
        raise ValueError(f"unknown phase2_loss {config.phase2_loss!r}")
    for it2 in range(1, config.phase2_iterations + 1):
        if config.phase2_loss == "relative":
            value, grad = loss_relative(
                model, lam_hat, None, f, problem.energy, beta, alpha, tables=tables
            )
        elif config.phase2_loss == "pinn":
            value, grad = loss_pinn(
                model, lam_hat, None, f, problem.energy, beta, alpha, tables=tables
            )
        else:
            value, grad = loss_deep_ritz(
                model, None, f, problem.energy, beta, alpha, tables=tables
            )
        model = model.with_theta(opt2.step(model.theta, grad))
        diag.phase2_loss_trace.append(value)
        mv, mgrads = loss_variational_multi(
            pair, None, f, problem.energy, beta, alpha_multi, tables_list=pair_tables
        )
        pair = [m.with_theta(o.step(m.theta, g)) for m, o, g in zip(pair, opt_pair, mgrads)]
        if it2 % config.mcmc_refresh == 0:
            mala_step(state, E_sample, beta, config.mcmc_steps)
            tables = make_tables(model, state.chains, f, problem.energy)
            pair_tables = [make_tables(m, state.chains, f, problem.energy) for m in pair]
        if config.lambda_trainable and it2 % 100 == 0:
            quotient, _ = loss_deep_ritz(
                model, None, f, problem.energy, beta, 0.0, tables=tables
            )
            lam_hat = quotient

    diag.acceptance_rate = state.acceptance_rate
    if config.importance_route:
        # spectral extraction needs mu-samples; the pair route is skipped and
        # lambda_1 falls back to the multi-loss Rayleigh quotients
        lams = np.sort([
            loss_deep_ritz(m, None, f, problem.energy, beta, 0.0,
                           tables=tb)[0]
            for m, tb in zip(pair, pair_tables)
        ])
        lam1 = float(lams[-1])
        diag.lambda1_raw = np.asarray(lams)
    else:
        lams, _ = extract_eigvals(pair, state.chains, alpha_multi, beta)
        diag.lambda1_raw = lams
        lam1 = float(lams[1]) if lams.size > 1 else float("nan")
    return model, lam0, lam1, diag


def save_checkpoint(path: str, model, lam0: float, lam1: float, config: TrainConfig) -> None:
    base = model.base if isinstance(model, ShiftedModel) else model
    np.savez_compressed(
        path,
        version=CHECKPOINT_VERSION,
        centers=base.centers,
        width=base.width,
        theta=base.theta,
        lam0=lam0,
        lam1=lam1,
        config_hash=config.digest(),
        importance=isinstance(model, ShiftedModel),
    )


def load_checkpoint(path: str, offset: ScalarField | None = None):
    """Returns (model, lam0, lam1, config_hash). A ShiftedModel checkpoint
    needs the offset field supplied by the caller."""
    with np.load(path, allow_pickle=False) as z:
        if int(z["version"]) != CHECKPOINT_VERSION:
            raise TrainingError("checkpoint version mismatch")
        base = GaussianRbfModel(z["centers"], float(z["width"]), z["theta"])
        model = base
        if bool(z["importance"]):
            if offset is None:
                raise TrainingError("checkpoint used the importance route; offset required")
            model = ShiftedModel(base, offset)
        return model, float(z["lam0"]), float(z["lam1"]), str(z["config_hash"])
