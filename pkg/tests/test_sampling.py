import numpy as np
import pytest

from eigctrl.fields import ScalarField, double_well_field, quadratic_field
from eigctrl.oscillator import QuadraticProblem, lqr_eigensystem
from eigctrl.sampling import (
    TARGET_ACCEPTANCE,
    dirichlet_form,
    init_sampler,
    inner_product_importance,
    inner_product_samples,
    mala_step,
    warmup,
)

E_GAUSS = quadratic_field(0.5 * np.eye(1))  # mu = N(0, 1/2) at beta=1
E_DW = double_well_field([5.0])


def test_init_sampler():
    st = init_sampler(np.zeros((7, 2)), dt=0.02, seed=5)
    assert st.chains.shape == (7, 2)
    assert st.step_dt == 0.02
    assert st.acceptance_rate == 0.0
    assert not st.adapting


def test_mala_step_validation():
    st = init_sampler(np.zeros((4, 1)))
    st.step_dt = 0.0
    with pytest.raises(ValueError):
        mala_step(st, E_GAUSS, 1.0, 10)


def test_mala_determinism():
    a = init_sampler(np.ones((16, 1)), seed=3)
    b = init_sampler(np.ones((16, 1)), seed=3)
    mala_step(a, E_GAUSS, 1.0, 50)
    mala_step(b, E_GAUSS, 1.0, 50)
    assert np.array_equal(a.chains, b.chains)
    assert a.accepted == b.accepted


def test_mala_gaussian_moments():
    rng = np.random.default_rng(0)
    st = init_sampler(0.5 * rng.standard_normal((512, 1)), dt=0.01, seed=1)
    warmup(st, E_GAUSS, 1.0)
    # pool decorrelated snapshots for the moment estimates
    pool = []
    for _ in range(10):
        mala_step(st, E_GAUSS, 1.0, 200)
        pool.append(st.chains.copy())
    x = np.concatenate(pool)
    assert abs(x.mean()) < 0.05
    assert x.var() == pytest.approx(0.5, abs=0.05)


def test_tiny_step_accepts_everything():
    st = init_sampler(np.zeros((256, 1)), dt=1e-5, seed=3)
    mala_step(st, E_GAUSS, 1.0, 200)
    assert st.acceptance_rate > 0.999


def test_warmup_targets_acceptance_double_well():
    rng = np.random.default_rng(1)
    st = init_sampler(0.5 * rng.standard_normal((2048, 1)), dt=0.01, seed=2)
    warmup(st, E_DW, 1.0)
    assert not st.adapting
    a0, p0 = st.accepted, st.proposed
    mala_step(st, E_DW, 1.0, 500)
    rate = (st.accepted - a0) / (st.proposed - p0)
    assert abs(rate - TARGET_ACCEPTANCE) < 0.15


def test_double_well_mode_mass():
    rng = np.random.default_rng(1)
    st = init_sampler(0.5 * rng.standard_normal((2048, 1)), dt=0.01, seed=2)
    warmup(st, E_DW, 1.0)
    mala_step(st, E_DW, 1.0, 3000)
    mass = np.mean(st.chains > 0)
    assert mass == pytest.approx(0.5, abs=0.07)


def test_reset_warnings_on_nonfinite_energy():
    bad = ScalarField(
        value=lambda x: np.where(np.abs(x[:, 0]) > 0.5, np.inf, 0.0),
        grad=lambda x: np.zeros_like(x),
        laplacian=lambda x: np.zeros(x.shape[0]),
    )
    st = init_sampler(np.zeros((64, 1)), dt=1.0, seed=0)
    mala_step(st, bad, 1.0, 20)
    assert st.reset_warnings > 0
    assert np.all(np.abs(st.chains) <= 0.5)


@pytest.fixture(scope="module")
def lqr_eig():
    return lqr_eigensystem(QuadraticProblem(np.eye(1), np.eye(1), None, 1.0, 4.0), 3)


@pytest.fixture(scope="module")
def mu_samples():
    # exact draws from mu = N(0, 1/2)
    return np.random.default_rng(0).normal(0.0, np.sqrt(0.5), size=(2 ** 20, 1))


def test_inner_product_ground_state_norm(lqr_eig, mu_samples):
    # eigenfunctions are unit-norm against the unnormalized density e^{-2E};
    # against the normalized empirical measure the norm is 1/sqrt(pi)
    phi0 = lqr_eig.phi_field(0)
    got = inner_product_samples(phi0, phi0, mu_samples)
    assert got == pytest.approx(np.pi ** -0.5, rel=3e-3)


def test_inner_product_orthogonality(lqr_eig, mu_samples):
    phi0 = lqr_eig.phi_field(0)
    phi1 = lqr_eig.phi_field(1)
    assert abs(inner_product_samples(phi0, phi1, mu_samples)) < 3e-3


def test_dirichlet_form_rayleigh_quotient(lqr_eig, mu_samples):
    # <phi0, L phi0> / <phi0, phi0> recovers lambda_0 = sqrt(3) - 1
    f = quadratic_field(np.eye(1))
    phi0 = lqr_eig.phi_field(0)
    norm = inner_product_samples(phi0, phi0, mu_samples)
    ray = dirichlet_form(phi0, phi0, f, 1.0, mu_samples) / norm
    assert ray == pytest.approx(np.sqrt(3.0) - 1.0, abs=2e-3)


def _bare(value):
    return ScalarField(value=value, grad=lambda x: None, laplacian=lambda x: None)


def test_importance_matches_direct_mean(mu_samples):
    s = mu_samples[:10000]
    pb = _bare(lambda x: x[:, 0] ** 2)
    r = inner_product_importance(pb, pb, E_GAUSS, 1.0, s)
    assert r.value == pytest.approx(float(np.mean(s[:, 0] ** 4)), rel=1e-12)
    assert r.n_nonfinite == 0
    assert 0 < r.ess <= s.shape[0]


def test_importance_ess_full_for_constant_weights(mu_samples):
    s = mu_samples[:1000]
    one = _bare(lambda x: np.ones(x.shape[0]))
    r = inner_product_importance(one, one, E_GAUSS, 1.0, s)
    assert r.ess == pytest.approx(1000.0)


def test_importance_counts_nonfinite(mu_samples):
    s = mu_samples[:10000]
    pb = _bare(lambda x: x[:, 0] ** 2)
    qb = _bare(lambda x: np.where(np.abs(x[:, 0]) > 2.5, np.inf, 1.0))
    r = inner_product_importance(pb, qb, E_GAUSS, 1.0, s)
    assert r.n_nonfinite == int(np.sum(np.abs(s[:, 0]) > 2.5))
    assert np.isfinite(r.value)


def test_importance_all_nonfinite():
    s = np.zeros((10, 1))
    bad = _bare(lambda x: np.full(x.shape[0], np.inf))
    r = inner_product_importance(bad, bad, E_GAUSS, 1.0, s)
    assert np.isnan(r.value)
    assert r.n_nonfinite == 10
