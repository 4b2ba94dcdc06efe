"""MALA sampling from mu ∝ exp(-2 beta E) and sample-based inner products."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import ScalarField

TARGET_ACCEPTANCE = 0.574
DEFAULT_DT = 0.01
DEFAULT_WARMUP_STEPS = 1000


@dataclass
class SamplerState:
    """State of a bank of independent MALA chains."""

    chains: np.ndarray            # (n_chains, d)
    step_dt: float
    rng: np.random.Generator
    accepted: int = 0
    proposed: int = 0
    reset_warnings: int = 0
    adapting: bool = False

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def init_sampler(x0: np.ndarray, dt: float = DEFAULT_DT, seed: int = 0) -> SamplerState:
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    return SamplerState(chains=x0.copy(), step_dt=float(dt), rng=np.random.default_rng(seed))


def mala_step(state: SamplerState, E: ScalarField, beta: float, n_steps: int) -> SamplerState:
    """Advance every chain n_steps MALA updates targeting exp(-2 beta E).

    Langevin proposal x' = x + dt grad log mu(x) + sqrt(2 dt) xi with
    grad log mu = -2 beta grad E, Metropolis-Hastings accepted. Chains that
    propose a non-finite energy or gradient stay put and bump a warning
    counter. Mutates and returns the state.
    """
    if state.step_dt <= 0:
        raise ValueError("step_dt must be positive")
    dt = state.step_dt
    x = state.chains
    n, d = x.shape
    logp = -2.0 * beta * E.value(x)
    glogp = -2.0 * beta * E.grad(x)
    for _ in range(n_steps):
        xi = state.rng.standard_normal((n, d))
        prop = x + dt * glogp + np.sqrt(2.0 * dt) * xi
        logp_p = -2.0 * beta * E.value(prop)
        glogp_p = -2.0 * beta * E.grad(prop)
        ok = np.isfinite(logp_p) & np.all(np.isfinite(glogp_p), axis=1)
        state.reset_warnings += int(np.sum(~ok))
        # forward and reverse proposal log densities (up to the common constant)
        fwd = -np.sum((prop - x - dt * glogp) ** 2, axis=1) / (4.0 * dt)
        rev = -np.sum((x - prop - dt * glogp_p) ** 2, axis=1) / (4.0 * dt)
        with np.errstate(invalid="ignore"):
            log_alpha = logp_p - logp + rev - fwd
        accept = ok & (np.log(state.rng.uniform(size=n)) < log_alpha)
        x = np.where(accept[:, None], prop, x)
        logp = np.where(accept, logp_p, logp)
        glogp = np.where(accept[:, None], glogp_p, glogp)
        state.accepted += int(np.sum(accept))
        state.proposed += n
    state.chains = x
    return state


def warmup(
    state: SamplerState,
    E: ScalarField,
    beta: float,
    n_steps: int = DEFAULT_WARMUP_STEPS,
    target: float = TARGET_ACCEPTANCE,
    adapt_every: int = 50,
) -> SamplerState:
    """Warm-up with step-size adaptation toward the target acceptance rate.

    The step size is frozen when warm-up ends.
    """
    state.adapting = True
    done = 0
    while done < n_steps:
        block = min(adapt_every, n_steps - done)
        a0, p0 = state.accepted, state.proposed
        mala_step(state, E, beta, block)
        rate = (state.accepted - a0) / max(state.proposed - p0, 1)
        state.step_dt *= float(np.exp(0.5 * (rate - target)))
        done += block
    state.adapting = False
    return state


def inner_product_samples(phi: ScalarField, psi: ScalarField, samples: np.ndarray) -> float:
    """<phi, psi>_mu against the empirical normalized measure of the samples."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    return float(np.mean(phi.value(samples) * psi.value(samples)))


def dirichlet_form(
    phi: ScalarField, psi: ScalarField, f: ScalarField, beta: float, samples: np.ndarray
) -> float:
    """First-derivative form of <phi, L psi>_mu:
    E_mu[<grad phi, grad psi>] + 2 beta^2 E_mu[phi f psi]."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    grad_term = np.mean(np.sum(phi.grad(samples) * psi.grad(samples), axis=1))
    zo_term = np.mean(phi.value(samples) * f.value(samples) * psi.value(samples))
    return float(grad_term + 2.0 * beta ** 2 * zo_term)


@dataclass(frozen=True)
class ImportanceResult:
    value: float
    ess: float                    # Kish effective sample size
    n_nonfinite: int


def inner_product_importance(
    phi_bar: ScalarField, psi_bar: ScalarField, E: ScalarField, beta: float, samples: np.ndarray
) -> ImportanceResult:
    """<phi, psi>_mu = E_mubar[phi_bar psi_bar] with phi_bar = e^{-2 beta E} phi.

    Samples must come from mubar ∝ e^{+2 beta E} (MALA on -E). The caller
    supplies the reweighted fields phi_bar, psi_bar directly so the
    exponential factor is applied analytically. Non-finite products are
    dropped and counted; the Kish effective sample size of the summand
    magnitudes is reported so weight degeneracy is visible.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    p = phi_bar.value(samples) * psi_bar.value(samples)
    finite = np.isfinite(p)
    n_bad = int(np.sum(~finite))
    p = p[finite]
    if p.size == 0:
        return ImportanceResult(float("nan"), 0.0, n_bad)
    mag = np.abs(p)
    denom = np.sum(mag ** 2)
    ess = float(np.sum(mag) ** 2 / denom) if denom > 0 else float(p.size)
    return ImportanceResult(float(np.mean(p)), min(ess, float(p.size)), n_bad)
