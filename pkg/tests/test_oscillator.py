import numpy as np
import pytest

from eigctrl.fields import quadratic_field
from eigctrl.grid import Grid1D, schrodinger_fd_1d
from eigctrl.hermite import (
    HermiteOverflowError,
    hermite_eval,
    hermite_normalized_deriv,
    hermite_normalized_table,
)
from eigctrl.oscillator import (
    CoefficientError,
    QuadraticProblem,
    RiccatiDivergenceError,
    enumerate_multi_indices,
    lqr_eigensystem,
    lqr_series_control,
    oscillator_eigensystem_1d,
    oscillator_eigensystem_dd,
    riccati_control,
    riccati_solve,
)

SQ3 = np.sqrt(3.0)


# hermite ---------------------------------------------------------------


def test_hermite_low_orders():
    v, d = hermite_eval(0, 1.7)
    assert v == 1.0 and d == 0.0
    v, d = hermite_eval(1, 2.0)
    assert v == pytest.approx(4.0)
    assert d == pytest.approx(2.0)
    v, _ = hermite_eval(2, 1.0)
    assert v == pytest.approx(2.0)


def test_hermite_derivative_identity():
    x = np.linspace(-2, 2, 9)
    for n in range(1, 8):
        _, d = hermite_eval(n, x)
        prev, _ = hermite_eval(n - 1, x)
        assert np.allclose(d, 2 * n * prev)


def test_hermite_overflow_cap():
    with pytest.raises(HermiteOverflowError):
        hermite_eval(61, 0.5)
    with pytest.raises(ValueError):
        hermite_eval(-1, 0.5)


def test_normalized_table_matches_raw():
    import math

    x = np.linspace(-3, 3, 11)
    tab = hermite_normalized_table(10, x)
    for n in range(11):
        raw, _ = hermite_eval(n, x)
        norm = np.pi ** 0.25 * np.sqrt(2.0 ** n * math.factorial(n))
        assert np.allclose(tab[n], raw / norm, rtol=1e-12, atol=1e-12)


def test_normalized_table_stable_at_high_order():
    # no overflow far beyond the raw cap
    tab = hermite_normalized_table(200, np.linspace(-5, 5, 7))
    assert np.all(np.isfinite(tab))


def test_normalized_deriv_identity():
    x = np.linspace(-2, 2, 9)
    tab = hermite_normalized_table(6, x)
    dtab = hermite_normalized_deriv(tab)
    for n in range(1, 7):
        assert np.allclose(dtab[n], np.sqrt(2.0 * n) * tab[n - 1])


# 1-D oscillator --------------------------------------------------------


def test_oscillator_1d_eigenvalues():
    es = oscillator_eigensystem_1d(8)
    assert es.eigenvalues[0] == 1.0
    assert es.eigenvalues[3] == 7.0


def test_oscillator_1d_ground_state_value():
    es = oscillator_eigensystem_1d(2)
    assert es.phi(0, np.array([0.0]))[0] == pytest.approx(np.pi ** -0.25)


def test_oscillator_1d_normalization():
    es = oscillator_eigensystem_1d(6)
    # Gauss-Hermite: int phi_n^2 dx = sum w_q hhat_n(t_q)^2 (e^{-x^2} folded in)
    t, w = np.polynomial.hermite.hermgauss(80)
    for n in range(6):
        tab = hermite_normalized_table(n, t)
        val = np.sum(w * tab[n] ** 2)
        assert val == pytest.approx(1.0, abs=1e-10)


# d-D oscillator --------------------------------------------------------


def test_oscillator_dd_isotropic_eigenvalues():
    es = oscillator_eigensystem_dd(np.eye(2), 4)
    assert es.eigenvalues[0] == pytest.approx(2.0)
    assert sorted(es.eigenvalues[1:3]) == pytest.approx([4.0, 4.0])


def test_oscillator_dd_rescaling():
    es = oscillator_eigensystem_dd(np.array([[9.0]]), 5)
    assert np.allclose(es.eigenvalues, 3.0 * (2 * np.arange(5) + 1))


def test_oscillator_dd_matches_grid():
    es = oscillator_eigensystem_dd(np.eye(2), 3)
    g = schrodinger_fd_1d(lambda x: x ** 2, Grid1D(-8, 8, 1200), 3)
    # lambda_(0,0) = 2 lambda_0^(1d), lambda_(1,0) = lambda_0 + lambda_1
    assert es.eigenvalues[0] == pytest.approx(2 * g.eigenvalues[0], abs=1e-3)
    assert es.eigenvalues[1] == pytest.approx(g.eigenvalues[0] + g.eigenvalues[1], abs=1e-3)


def test_oscillator_dd_orthonormal():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((2, 2))
    A_cost = M @ M.T + np.eye(2)
    es = oscillator_eigensystem_dd(A_cost, 6)
    # Lebesgue quadrature on a tensor Gauss-Legendre grid over [-7, 7]^2
    t, w = np.polynomial.legendre.leggauss(120)
    t = 7.0 * t
    w = 7.0 * w
    X, Y = np.meshgrid(t, t, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    ww = np.outer(w, w).ravel()
    vals = np.stack([es.phi(i, pts) for i in range(6)], axis=0)
    G = (vals * ww) @ vals.T
    assert np.max(np.abs(G - np.eye(6))) < 1e-8


def test_oscillator_dd_rejects_non_pd():
    with pytest.raises(ValueError):
        oscillator_eigensystem_dd(-np.eye(2), 2)


# multi-index enumeration ------------------------------------------------


def test_enumerate_isotropic_ties():
    lam = lambda i, n: 2 * n + 1.0
    assert enumerate_multi_indices(2, 3, lam) == [(0, 0), (0, 1), (1, 0)]


def test_enumerate_1d():
    lam = lambda i, n: 2 * n + 1.0
    assert enumerate_multi_indices(1, 4, lam) == [(0,), (1,), (2,), (3,)]


def test_enumerate_anisotropic():
    s = np.array([1.0, 4.0])  # sqrt of diag(1, 16)
    lam = lambda i, n: s[i] * (2 * n + 1)
    out = enumerate_multi_indices(2, 5, lam)
    assert out == [(0, 0), (1, 0), (2, 0), (3, 0), (0, 1)]


@pytest.mark.parametrize("d", [1, 2, 3])
def test_enumerate_matches_brute_force(d):
    rng = np.random.default_rng(d)
    s = rng.uniform(0.5, 3.0, size=d)
    lam = lambda i, n: s[i] * (2 * n + 1)
    k = 12
    out = enumerate_multi_indices(d, k, lam)
    # brute force over a box large enough to contain the first k indices
    from itertools import product

    box = sorted(product(range(25 if d == 1 else 7), repeat=d),
                 key=lambda a: (sum(s[i] * (2 * ai + 1) for i, ai in enumerate(a)), a))
    assert out == [tuple(a) for a in box[:k]]
    lams = [sum(s[i] * (2 * ai + 1) for i, ai in enumerate(a)) for a in out]
    assert all(l1 <= l2 + 1e-12 for l1, l2 in zip(lams, lams[1:]))


# LQR eigensystem -------------------------------------------------------


def _iso_problem(d=1, Q=True):
    return QuadraticProblem(np.eye(d), np.eye(d), 0.5 * np.eye(d) if Q else None,
                            1.0, 4.0)


def test_lqr_isotropic_d20_ground_energy():
    es = lqr_eigensystem(_iso_problem(20), 2)
    assert es.eigenvalues[0] == pytest.approx(20 * (SQ3 - 1), rel=1e-12)
    assert es.eigenvalues[1] - es.eigenvalues[0] == pytest.approx(2 * SQ3, rel=1e-12)


def test_lqr_matches_grid_per_coordinate():
    g = schrodinger_fd_1d(lambda x: 3 * x ** 2 - 1, Grid1D(-8, 8, 2000), 2)
    es = lqr_eigensystem(_iso_problem(1), 2)
    assert es.eigenvalues[0] == pytest.approx(g.eigenvalues[0], abs=1e-3)
    assert es.eigenvalues[1] == pytest.approx(g.eigenvalues[1], abs=1e-3)


def test_lqr_ground_log_gradient_slope():
    es = lqr_eigensystem(_iso_problem(1), 1)
    x = np.linspace(-2, 2, 9)[:, None]
    assert np.allclose(es.grad_log_phi(0, x), -(SQ3 - 1) * x, rtol=1e-12)


def test_lqr_quadrature_norms_are_unit():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((3, 3))
    prob = QuadraticProblem(0.5 * (M + M.T) + 2 * np.eye(3), np.eye(3), None, 1.3, 4.0)
    es = lqr_eigensystem(prob, 6)
    assert np.allclose(es.quad_norms, 1.0, atol=1e-10)


def test_lqr_eigenrelation_pointwise():
    # apply_L phi_i = lambda_i phi_i with a genuine finite-difference Laplacian
    prob = QuadraticProblem(np.array([[1.0, 0.2], [0.2, 1.5]]), np.eye(2), None, 1.0, 4.0)
    es = lqr_eigensystem(prob, 4)
    rng = np.random.default_rng(1)
    x = rng.uniform(-1.5, 1.5, size=(100, 2))
    h = 1e-3
    beta = prob.beta
    for i in range(4):
        lap = np.zeros(x.shape[0])
        for j in range(2):
            xp, xm = x.copy(), x.copy()
            xp[:, j] += h
            xm[:, j] -= h
            lap += (es.phi(i, xp) - 2 * es.phi(i, x) + es.phi(i, xm)) / h ** 2
        gE = x @ prob.A
        f = np.einsum("ni,ij,nj->n", x, prob.P, x)
        lhs = -lap + 2 * beta * np.sum(gE * es.grad_phi(i, x), axis=1) \
            + 2 * beta ** 2 * f * es.phi(i, x)
        want = es.eigenvalues[i] * es.phi(i, x)
        assert np.max(np.abs(lhs - want)) < 1e-4 * max(1.0, np.max(np.abs(want)))


def test_quadratic_problem_validation():
    with pytest.raises(ValueError):
        QuadraticProblem(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2), None, 1.0, 1.0)
    with pytest.raises(ValueError):
        QuadraticProblem(np.zeros((2, 2)), -np.eye(2), None, 1.0, 1.0)


# Riccati ----------------------------------------------------------------


def test_riccati_terminal_condition():
    sol = riccati_solve(_iso_problem(2), 400)
    assert np.allclose(sol.F[-1], 0.5 * np.eye(2))
    u = riccati_control(sol)
    x = np.array([[1.0, -2.0]])
    assert np.allclose(u(x, 4.0), -x)


def test_riccati_stationary_limit():
    sol = riccati_solve(_iso_problem(1), 4000)
    assert np.allclose(sol.at(0.0), 0.5 * (SQ3 - 1) * np.eye(1), atol=1e-6)


def test_riccati_ode_residual():
    prob = _iso_problem(2)
    # the midpoint-form residual of the stored trajectory is O(h^2)
    sol = riccati_solve(prob, 4000)
    tg, F = sol.time_grid, sol.F
    h = tg[1] - tg[0]
    worst = 0.0
    for k in range(len(tg) - 1):
        dF = (F[k + 1] - F[k]) / h
        Fm = 0.5 * (F[k] + F[k + 1])
        rhs = prob.A.T @ Fm + Fm @ prob.A + 2 * Fm @ Fm.T - prob.P
        worst = max(worst, np.max(np.abs(dF - rhs)))
    assert worst < 1e-6


def test_riccati_divergence_reported():
    # negative terminal cost drives backward blow-up in finite time
    prob = QuadraticProblem(np.zeros((1, 1)), np.eye(1), -10.0 * np.eye(1), 1.0, 4.0)
    with pytest.raises(RiccatiDivergenceError):
        riccati_solve(prob, 20000)


def test_riccati_validation():
    with pytest.raises(ValueError):
        riccati_solve(_iso_problem(1, Q=False), 100)
    with pytest.raises(ValueError):
        riccati_solve(_iso_problem(1), 5)


# eigenseries control ----------------------------------------------------


def test_series_control_matches_riccati_at_t0():
    prob = _iso_problem(1)
    es = lqr_eigensystem(prob, 8)
    u = lqr_series_control(es, q_matrix=prob.Q)
    sol = riccati_solve(prob, 2000)
    ur = riccati_control(sol)
    x = np.arange(-2.0, 2.5, 1.0)[:, None]
    a, b = u(x, 0.0), ur(x, 0.0)
    mask = np.abs(b) > 1e-12
    assert np.max(np.abs(a[mask] - b[mask]) / np.abs(b[mask])) < 1e-2


def test_series_control_terminal_behavior():
    prob = _iso_problem(1)
    es = lqr_eigensystem(prob, 64)
    u = lqr_series_control(es, q_matrix=prob.Q)
    sol = riccati_solve(prob, 4000)
    ur = riccati_control(sol)
    t = prob.horizon - 0.01
    x = np.linspace(-2, 2, 5)[:, None]
    a, b = u(x, t), ur(x, t)
    assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 5e-2


def test_series_control_zero_terminal_cost():
    prob = _iso_problem(1, Q=False)
    es = lqr_eigensystem(prob, 8)
    u = lqr_series_control(es)
    # odd modes project to zero against the even weight
    assert abs(u.coeffs[1]) < 1e-12
    assert abs(u.coeffs[3]) < 1e-12
    # corrections decay at the second gap, faster than the first
    x = np.linspace(-1.5, 1.5, 7)[:, None]
    base = es.grad_log_phi(0, x)
    gap2 = es.eigenvalues[2] - es.eigenvalues[0]
    for t in (0.0, 1.0, 2.0):
        dev = np.max(np.abs(u(x, t) - base))
        bound = 10.0 * np.exp(-gap2 * (prob.horizon - t) / 2.0)
        assert dev < bound


def test_series_coefficient_errors():
    # non-decoupling quadratic terminal cost
    prob = QuadraticProblem(np.diag([1.0, 2.0]), np.eye(2), None, 1.0, 4.0)
    es = lqr_eigensystem(prob, 4)
    with pytest.raises(CoefficientError):
        lqr_series_control(es, q_matrix=np.array([[1.0, 0.5], [0.5, 1.0]]))
    # general g in high dimension has no quadrature route
    prob5 = QuadraticProblem(np.eye(5), np.eye(5), None, 1.0, 4.0)
    es5 = lqr_eigensystem(prob5, 2)
    with pytest.raises(CoefficientError):
        lqr_series_control(es5, g=quadratic_field(np.eye(5), b=np.ones(5)))
