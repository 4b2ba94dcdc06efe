import numpy as np
import pytest

from eigctrl.fields import (
    ScalarField,
    constant_field,
    double_well_field,
    linear_field,
    quadratic_field,
    ring_field,
    scale_field,
    sum_fields,
    zero_field,
)
from eigctrl.oscillator import QuadraticProblem, lqr_eigensystem
from eigctrl.problem import (
    DimensionMismatchError,
    SocProblem,
    apply_K,
    apply_L,
    check_assumptions,
    effective_potential,
    gaussian_law,
    point_mass,
)


def fd_grad(field, x, h=1e-4):
    g = np.zeros_like(x)
    for i in range(x.shape[1]):
        xp, xm = x.copy(), x.copy()
        xp[:, i] += h
        xm[:, i] -= h
        g[:, i] = (field.value(xp) - field.value(xm)) / (2 * h)
    return g


def fd_laplacian(field, x, h=1e-4):
    out = np.zeros(x.shape[0])
    for i in range(x.shape[1]):
        xp, xm = x.copy(), x.copy()
        xp[:, i] += h
        xm[:, i] -= h
        out += (field.value(xp) - 2 * field.value(x) + field.value(xm)) / h ** 2
    return out


FIELDS_3D = [
    quadratic_field(np.array([[2.0, 0.3, 0.0], [0.3, 1.0, -0.2], [0.0, -0.2, 0.5]]),
                    b=np.array([0.1, -0.4, 0.2]), c=0.7),
    linear_field([1.0, -2.0, 0.5]),
    double_well_field([5.0, 1.0, 3.0]),
    ring_field(1.0, 2.0),
    sum_fields(double_well_field([1.0, 1.0, 1.0]), linear_field([0.5, 0.0, 0.0])),
    scale_field(ring_field(0.5, 1.5), -2.0),
]


@pytest.mark.parametrize("field", FIELDS_3D)
def test_field_gradients_match_finite_differences(field):
    rng = np.random.default_rng(0)
    x = rng.uniform(-3, 3, size=(100, 3))
    g = field.grad(x)
    g_fd = fd_grad(field, x)
    scale = np.maximum(np.abs(g_fd), 1.0)
    assert np.max(np.abs(g - g_fd) / scale) < 1e-5


@pytest.mark.parametrize("field", FIELDS_3D)
def test_field_laplacians_match_finite_differences(field):
    rng = np.random.default_rng(1)
    x = rng.uniform(-3, 3, size=(100, 3))
    lap = field.laplacian(x)
    lap_fd = fd_laplacian(field, x)
    scale = np.maximum(np.abs(lap_fd), 1.0)
    assert np.max(np.abs(lap - lap_fd) / scale) < 1e-4


def _lqr_problem_1d(f_coeff=0.0):
    return SocProblem(
        dim=1,
        energy=quadratic_field(0.5 * np.eye(1)),
        running_cost=quadratic_field(f_coeff * np.eye(1)),
        terminal_cost=zero_field(),
        beta=1.0,
        horizon=4.0,
    )


def test_effective_potential_harmonic():
    prob = _lqr_problem_1d(0.0)
    assert effective_potential(prob, np.array([0.0])) == pytest.approx(-1.0)
    assert effective_potential(prob, np.array([2.0])) == pytest.approx(3.0)


def test_effective_potential_free():
    prob = SocProblem(1, zero_field(), zero_field(), zero_field(), 2.0, 1.0)
    assert effective_potential(prob, np.array([5.0])) == pytest.approx(0.0)


def test_effective_potential_dimension_mismatch():
    prob = _lqr_problem_1d()
    with pytest.raises(DimensionMismatchError):
        effective_potential(prob, np.array([1.0, 2.0]))


def test_apply_L_constant_function():
    prob = _lqr_problem_1d(1.0)
    one = constant_field(1.0)
    x = np.array([1.3])
    assert apply_L(prob, one, x) == pytest.approx(2.0 * prob.beta ** 2 * x[0] ** 2)


def test_apply_L_on_lqr_ground_state():
    # isotropic d=1, E = x^2/2, f = x^2: ground state is exp(-sqrt(3) x^2 / 2)
    prob = _lqr_problem_1d(1.0)
    a = np.sqrt(3.0) - 1.0
    phi = ScalarField(
        value=lambda x: np.exp(-0.5 * a * x[:, 0] ** 2),
        grad=lambda x: (-a * x[:, 0] * np.exp(-0.5 * a * x[:, 0] ** 2))[:, None],
        laplacian=lambda x: (a ** 2 * x[:, 0] ** 2 - a) * np.exp(-0.5 * a * x[:, 0] ** 2),
    )
    lam0 = np.sqrt(3.0) - 1.0
    rng = np.random.default_rng(2)
    x = rng.uniform(-2, 2, size=(50, 1))
    got = apply_L(prob, phi, x)
    want = lam0 * phi.value(x)
    assert np.max(np.abs(got - want) / np.abs(want)) < 1e-10


def test_apply_L_on_grid_eigenfunction():
    from eigctrl.grid import Grid1D, schrodinger_fd_1d, to_L_eigenfunctions

    prob = _lqr_problem_1d(1.0)
    gs = schrodinger_fd_1d(lambda x: 3.0 * x ** 2 - 1.0, Grid1D(-8.0, 8.0, 2000), 4)
    lsys = to_L_eigenfunctions(gs, prob.energy, prob.beta)
    f = prob.running_cost
    for i in range(3):
        # genuine second derivative via finite differences of the spline value
        fld = lsys.phi_field(i, f)
        x = np.linspace(-1.5, 1.5, 31)[:, None]
        psi = ScalarField(fld.value, fld.grad, lambda xx, fl=fld: fd_laplacian(fl, xx, h=1e-3))
        got = apply_L(prob, psi, x)
        want = lsys.eigenvalues[i] * fld.value(x)
        assert np.max(np.abs(got - want)) < 1e-3 * max(1.0, np.max(np.abs(want)))


def test_apply_K_zero_value_function():
    prob = _lqr_problem_1d(1.0)
    x = np.array([0.7])
    assert apply_K(prob, zero_field(), x) == pytest.approx(x[0] ** 2)


def test_apply_K_stationary_hjb():
    # V0 with exp(-beta V0) the LQR ground state: K V0 = lam0 / (2 beta^2)
    prob = _lqr_problem_1d(1.0)
    v0 = quadratic_field(0.5 * (np.sqrt(3.0) - 1.0) * np.eye(1))
    lam0 = np.sqrt(3.0) - 1.0
    rng = np.random.default_rng(3)
    x = rng.uniform(-3, 3, size=(50, 1))
    got = apply_K(prob, v0, x)
    assert np.max(np.abs(got - lam0 / 2.0)) < 1e-10


def test_apply_K_against_symbolic():
    # v = sin(x) + 0.5 y^2 with E = x^2/2 + y^2/2, f = x^2 + y^2
    prob = SocProblem(2, quadratic_field(0.5 * np.eye(2)), quadratic_field(np.eye(2)),
                      zero_field(), 1.5, 1.0)
    v = ScalarField(
        value=lambda x: np.sin(x[:, 0]) + 0.5 * x[:, 1] ** 2,
        grad=lambda x: np.stack([np.cos(x[:, 0]), x[:, 1]], axis=1),
        laplacian=lambda x: -np.sin(x[:, 0]) + 1.0,
    )
    rng = np.random.default_rng(4)
    x = rng.uniform(-2, 2, size=(20, 2))
    b = prob.beta
    want = (
        (-np.sin(x[:, 0]) + 1.0) / (2 * b)
        - (x[:, 0] * np.cos(x[:, 0]) + x[:, 1] ** 2)
        - 0.5 * (np.cos(x[:, 0]) ** 2 + x[:, 1] ** 2)
        + np.sum(x ** 2, axis=1)
    )
    assert np.max(np.abs(apply_K(prob, v, x) - want)) < 1e-10


def test_L_K_identity_random_fields():
    # L phi / phi = 2 beta^2 K V0 for phi = exp(-beta V0), checked to 1e-9
    rng = np.random.default_rng(5)
    for trial in range(100):
        d = int(rng.integers(1, 4))
        beta = float(rng.uniform(0.5, 2.0))
        M = rng.standard_normal((d, d))
        prob = SocProblem(d, quadratic_field(0.1 * (M + M.T)),
                          quadratic_field(np.eye(d)), zero_field(), beta, 1.0)
        A = rng.standard_normal((d, d))
        v0 = quadratic_field(0.2 * (A + A.T), b=rng.standard_normal(d))
        x = rng.uniform(-2, 2, size=d)
        phi_val = np.exp(-beta * v0.value(x[None, :])[0])
        g = v0.grad(x[None, :])[0]
        phi = ScalarField(
            value=lambda xx, v0=v0, beta=beta: np.exp(-beta * v0.value(xx)),
            grad=lambda xx, v0=v0, beta=beta: -beta * np.exp(-beta * v0.value(xx))[:, None] * v0.grad(xx),
            laplacian=lambda xx, v0=v0, beta=beta: np.exp(-beta * v0.value(xx))
            * (beta ** 2 * np.sum(v0.grad(xx) ** 2, axis=1) - beta * v0.laplacian(xx)),
        )
        lhs = apply_L(prob, phi, x) / phi_val
        rhs = 2.0 * beta ** 2 * apply_K(prob, v0, x)
        assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(rhs))


def test_check_assumptions_isotropic():
    d = 3
    prob = SocProblem(d, quadratic_field(0.5 * np.eye(d)), quadratic_field(np.eye(d)),
                      zero_field(), 1.0, 4.0)
    rep = check_assumptions(prob, 5.0, 4000)
    assert rep.growth_flag
    # V(x) = 3|x|^2 - d beta, minimized near the origin; random probes land
    # within ~0.5 of the origin at this density
    assert -d * prob.beta <= rep.v_min < -d * prob.beta + 1.0


def test_check_assumptions_repulsive():
    d = 2
    prob = SocProblem(d, quadratic_field(-0.5 * np.eye(d)), quadratic_field(np.eye(d)),
                      zero_field(), 1.0, 4.0)
    rep = check_assumptions(prob, 5.0, 4000)
    assert rep.growth_flag


def test_check_assumptions_flat():
    prob = SocProblem(1, zero_field(), zero_field(), zero_field(), 1.0, 1.0)
    rep = check_assumptions(prob, 3.0, 500)
    assert not rep.growth_flag


def test_check_assumptions_probe_validation():
    prob = _lqr_problem_1d()
    with pytest.raises(ValueError):
        check_assumptions(prob, 3.0, 1)


def test_soc_problem_validation():
    with pytest.raises(ValueError):
        SocProblem(0, zero_field(), zero_field(), zero_field(), 1.0, 1.0)
    with pytest.raises(ValueError):
        SocProblem(1, zero_field(), zero_field(), zero_field(), -1.0, 1.0)
    with pytest.raises(ValueError):
        SocProblem(1, zero_field(), zero_field(), zero_field(), 1.0, 0.0)


def test_initial_laws():
    rng = np.random.default_rng(0)
    pm = point_mass([1.0, 2.0])
    assert np.all(pm.sample(rng, 5) == np.array([1.0, 2.0]))
    gl = gaussian_law(np.zeros(2), 0.5)
    x = gl.sample(rng, 100000)
    assert np.allclose(np.std(x, axis=0), 0.5, atol=0.01)


def test_default_initial_law_is_origin_point_mass():
    prob = _lqr_problem_1d()
    rng = np.random.default_rng(0)
    assert np.all(prob.initial_law.sample(rng, 3) == 0.0)
