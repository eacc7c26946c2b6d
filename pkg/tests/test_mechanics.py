import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import densities, density_and_fibers, fibers
from statbundle.calculus import CurveJet2, fd_natural_gradient, riemannian_acceleration
from statbundle.cumulant import K, dual_kl_of_momentum, entropy, kl
from statbundle.integrate import IntegratorConfig, integrate
from statbundle.mechanics import (
    KINDS,
    NEGENTROPY,
    KLParams,
    QuadraticParams,
    ScheduleABG,
    SystemSpec,
    action_integral,
    builtin_potentials,
    chart_perturbation,
    damped_kl_el_field,
    damped_kl_hamilton_field,
    damped_kl_momentum_derivative,
    entropy_flow_field,
    kl_el_field,
    kl_fiber_gradient,
    kl_hamilton_field,
    kl_hamiltonian_gradient,
    kl_hamiltonian_value,
    kl_lagrangian_gradient,
    kl_lagrangian_value,
    kl_legendre_inverse,
    kl_replicator_field,
    linear,
    kl_to_target,
    negentropy,
    path_action,
    quadratic_el_field,
    quadratic_hamilton_field,
    quadratic_hamiltonian,
    quadratic_lagrangian_value,
    zero_potential,
)
from statbundle.simplex import DomainError, center, expectation, m_transport, pairing, patch_e

E = np.e
abc = st.tuples(st.floats(0.3, 3), st.floats(0.3, 3), st.floats(0.3, 3))


def fd_fiber_gradient(F, q, w, eps=1e-6):
    """Fiber gradient of w -> F(w) at w, by central differences along centered directions."""
    n = q.size
    basis = np.eye(n)[: n - 1] - (q[: n - 1] / n)[:, None]
    d = np.array([(F(w + eps * b) - F(w - eps * b)) / (2 * eps) for b in basis])
    gram = (basis * q) @ basis.T / n
    return center(q, np.linalg.solve(gram, d) @ basis)


# -- values and examples -----------------------------------------------------

def test_quadratic_lagrangian_examples():
    assert quadratic_lagrangian_value(1, 0, np.ones(3), np.zeros(3)) == 0
    assert quadratic_lagrangian_value(1, 0, [1, 1], [1, -1]) == pytest.approx(0.5)
    q = np.array([1.5, 0.5])
    assert quadratic_lagrangian_value(2, 1, q, [0, 0]) == pytest.approx(entropy(q), abs=1e-15)
    assert quadratic_lagrangian_value(2, 1, q, [0, 0]) == pytest.approx(-0.130812, abs=1e-6)


def test_quadratic_hamiltonian_examples():
    q = np.array([1.5, 0.5])
    assert quadratic_hamiltonian(q, [0, 0], m=2) == 0
    np.testing.assert_array_equal(quadratic_hamilton_field(2.0)(0, np.array([1.5, 0.5, 0, 0])), 0)
    w = center(q, [0.3, 0.1])
    sys = SystemSpec("quadratic_hamiltonian", QuadraticParams(2.0, 0.0))
    np.testing.assert_array_equal(sys.velocity(0, sys.state_from_velocity(q, w)), w)


def test_kl_lagrangian_examples():
    q = np.array([1.5, 0.5])
    f = negentropy()
    assert kl_lagrangian_value(0.7, 1.3, 2.0, q, [0, 0], f) == pytest.approx(-2.0 * 1.3 * f(q), abs=1e-15)
    w = center(q, [0.4, -0.2])
    assert kl_lagrangian_value(1, 1, 1, q, w, zero_potential()) == pytest.approx(kl(q, patch_e(q, w)), abs=1e-14)
    assert kl_lagrangian_value(1, 1, 1, [1, 1], [1, -1], zero_potential()) == pytest.approx(np.log(np.cosh(1)), abs=1e-15)


def test_kl_fiber_gradient_examples():
    np.testing.assert_array_equal(kl_fiber_gradient(0.5, 2.0, np.ones(2), np.zeros(2)), 0)
    z = E + 1 / E
    expected = [2 * E / z - 1, 2 / E / z - 1]
    np.testing.assert_allclose(kl_fiber_gradient(1, 1, np.ones(2), [1, -1]), expected, atol=1e-15)
    np.testing.assert_allclose(expected, [0.7616, -0.7616], atol=1e-4)


def test_kl_legendre_inverse_examples():
    np.testing.assert_array_equal(kl_legendre_inverse(0.5, 2.0, np.ones(3), np.zeros(3)), 0)
    with pytest.raises(DomainError):
        kl_legendre_inverse(1.0, 2.0, np.ones(2), [-2.0, 2.0])
    with pytest.raises(DomainError):
        kl_hamiltonian_value(1.0, 1.0, 2.0, np.ones(2), [-2.5, 2.5])


def test_kl_hamiltonian_examples():
    q = np.array([1.5, 0.5])
    f = negentropy()
    assert kl_hamiltonian_value(0.4, 1.2, 3.0, q, [0, 0], f) == pytest.approx(3.0 * 1.2 * f(q), abs=1e-15)
    eta = center(q, [0.2, -0.3])
    assert kl_hamiltonian_value(1, 1, 1, q, eta, zero_potential()) == pytest.approx(dual_kl_of_momentum(q, eta), abs=1e-15)


def test_potentials_examples():
    pots = builtin_potentials()
    assert set(pots) >= {"negentropy", "linear", "kl_to_target"}
    np.testing.assert_array_equal(pots["negentropy"]().natural_grad(np.ones(3)), 0)
    c = np.array([1.0, -2.0, 0.5])
    q = np.array([0.6, 1.5, 0.9])
    np.testing.assert_allclose(linear(c).natural_grad(q), c - expectation(q, c))
    assert linear(c)(q) == pytest.approx(expectation(q, c))
    target = np.array([1.2, 0.3, 1.5])
    assert kl_to_target(target)(target) == pytest.approx(0, abs=1e-15)


@given(st.data())
def test_potential_gradients_match_finite_differences(data):
    n = data.draw(st.integers(2, 6))
    q, target = data.draw(densities(n=n)), data.draw(densities(n=n))
    c = np.array(data.draw(st.lists(st.floats(-2, 2), min_size=n, max_size=n)))
    for pot in (negentropy(), linear(c), kl_to_target(target)):
        g = pot.natural_grad(q)
        assert abs(expectation(q, g)) < 1e-12
        np.testing.assert_allclose(g, fd_natural_gradient(pot.value, q), atol=1e-6)


# -- Legendre structure --------------------------------------------------------

@given(density_and_fibers(k=1, scale=1.5), abc)
def test_legendre_roundtrip_and_identity(args, params):
    q, w = args
    a, b, c = params
    f = NEGENTROPY
    eta = kl_fiber_gradient(a, c, q, w)
    assert np.all(1 + eta / c > 0)
    np.testing.assert_allclose(kl_legendre_inverse(a, c, q, eta), w, atol=1e-10)
    np.testing.assert_allclose(kl_fiber_gradient(a, c, q, kl_legendre_inverse(a, c, q, eta)), eta, atol=1e-10)
    H = kl_hamiltonian_value(a, b, c, q, eta, f)
    assert H == pytest.approx(pairing(q, eta, w) - kl_lagrangian_value(a, b, c, q, w, f), abs=1e-10)


@given(density_and_fibers(k=1, scale=1.0), abc)
def test_lagrangian_gradients_match_finite_differences(args, params):
    q, w = args
    a, b, c = params
    f = NEGENTROPY
    L = lambda r, x: kl_lagrangian_value(a, b, c, r, x, f)
    np.testing.assert_allclose(kl_fiber_gradient(a, c, q, w), fd_fiber_gradient(lambda x: L(q, x), q, w), atol=1e-6)
    # natural gradient in q with w moved by e-transport
    np.testing.assert_allclose(kl_lagrangian_gradient(a, b, c, q, w, f),
                               fd_natural_gradient(lambda r: L(r, center(r, w)), q), atol=1e-6)


@given(density_and_fibers(k=1, scale=1.0), abc)
def test_hamiltonian_gradients_match_finite_differences(args, params):
    q, w = args
    a, b, c = params
    f = NEGENTROPY
    eta = kl_fiber_gradient(a, c, q, w)
    H = lambda r, e: kl_hamiltonian_value(a, b, c, r, e, f)
    np.testing.assert_allclose(kl_legendre_inverse(a, c, q, eta), fd_fiber_gradient(lambda e: H(q, e), q, eta), atol=1e-6)
    # natural gradient in q with η moved by m-transport
    np.testing.assert_allclose(kl_hamiltonian_gradient(a, b, c, q, eta, f),
                               fd_natural_gradient(lambda r: H(r, m_transport(q, r, eta)), q), atol=1e-6)


def test_limits_small_a():
    rng = np.random.default_rng(3)
    f = NEGENTROPY
    for _ in range(20):
        q = patch_e(np.ones(5), rng.standard_normal(5))
        w = center(q, rng.standard_normal(5))
        b, c = rng.uniform(0.5, 2, size=2)
        norms = []
        for a in (1e-4, 1e-6):
            norms.append(np.abs(kl_fiber_gradient(a, c, q, w)).max())
            assert norms[-1] <= 1e-5 * c if a == 1e-6 else True
            dev = np.abs(kl_lagrangian_gradient(a, b, 1 / b, q, w, f) + f.natural_grad(q)).max()
            assert dev <= 2 * a * (1 + np.abs(w).max()) ** 2
        assert norms[0] / norms[1] == pytest.approx(100, rel=1e-2)
        assert kl_lagrangian_value(1e-6, b, 1 / b, q, w, f) == pytest.approx(-f(q), abs=1e-5)


# -- fields satisfy their variational equations ------------------------------

def el_residual(system: SystemSpec, t, q, v, eps=1e-6):
    """D/dt Grad_e L - Grad L along the system's field, by finite differences."""
    P = system.params
    if system.kind == "quadratic_lagrangian":
        fiber = lambda s, q_, v_: P.m * v_
    else:
        fiber = lambda s, q_, v_: kl_fiber_gradient(*_ac(system, s), q_, v_)
    y = np.concatenate([q, v])
    F = system.field(t, y)
    yp, ym = y + eps * F, y - eps * F
    etadot = (fiber(t + eps, *np.split(yp, 2)) - fiber(t - eps, *np.split(ym, 2))) / (2 * eps)
    Deta = v * fiber(t, q, v) + etadot
    gradL = fd_natural_gradient(lambda r: system.lagrangian(t, r, center(r, v)), q)
    return np.abs(Deta - gradL).max()


def _ac(system, t):
    P = system.params.kl_params(t) if system.time_dependent else system.params
    return P.a, P.c


@given(density_and_fibers(k=1, scale=1.0, n=4), abc)
def test_kl_el_field_solves_euler_lagrange(args, params):
    q, v = args
    system = SystemSpec("kl_lagrangian", KLParams(*params), NEGENTROPY)
    assert el_residual(system, 0.0, q, v) < 1e-5


@given(density_and_fibers(k=1, scale=1.0, n=4), st.floats(0.5, 3), st.floats(0.2, 2), st.floats(0.15, 3))
def test_damped_el_field_solves_euler_lagrange(args, p_index, C, t):
    q, v = args
    system = SystemSpec("damped_kl_lagrangian", ScheduleABG(p_index, C, 0.1), NEGENTROPY)
    assert el_residual(system, t, q, v) < 1e-5


@given(density_and_fibers(k=1, scale=1.0, n=4), st.floats(0.5, 3), st.floats(0, 2))
def test_quadratic_el_field_solves_euler_lagrange(args, m, kappa):
    q, v = args
    system = SystemSpec("quadratic_lagrangian", QuadraticParams(m, kappa), NEGENTROPY)
    assert el_residual(system, 0.0, q, v) < 1e-5


def hamilton_residual(system, t, q, eta):
    """(★q - Grad_m H, Dη/dt + Grad H) for the field, gradients by finite differences."""
    if system.kind == "quadratic_hamiltonian":
        H = lambda r, e: quadratic_hamiltonian(r, e, system.params.m, system.params.kappa, system.potential)
    else:
        P = system.params.kl_params(t) if system.time_dependent else system.params
        H = lambda r, e: kl_hamiltonian_value(P.a, P.b, P.c, r, e, system.potential)
    dy = system.field(t, np.concatenate([q, eta]))
    w = dy[: q.size] / q
    Deta = dy[q.size:] + w * eta
    r1 = np.abs(w - fd_fiber_gradient(lambda e: H(q, e), q, eta)).max()
    r2 = np.abs(Deta + fd_natural_gradient(lambda r: H(r, m_transport(q, r, eta)), q)).max()
    return max(r1, r2)


@given(density_and_fibers(k=1, scale=1.0, n=4), abc)
def test_kl_hamilton_field_solves_hamilton_equations(args, params):
    q, w = args
    a, b, c = params
    system = SystemSpec("kl_hamiltonian", KLParams(a, b, c), NEGENTROPY)
    assert hamilton_residual(system, 0.0, q, kl_fiber_gradient(a, c, q, w)) < 1e-5


@given(density_and_fibers(k=1, scale=1.0, n=4), st.floats(0.5, 3), st.floats(0.2, 2), st.floats(0.15, 3))
def test_damped_hamilton_field_solves_hamilton_equations(args, p_index, C, t):
    q, w = args
    system = SystemSpec("damped_kl_hamiltonian", ScheduleABG(p_index, C, 0.1), NEGENTROPY)
    y = system.state_from_velocity(q, w, t)
    assert hamilton_residual(system, t, q, y[q.size:]) < 1e-5


@given(density_and_fibers(k=1, scale=1.0, n=4), st.floats(0.5, 3), st.floats(0, 2))
def test_quadratic_hamilton_field_solves_hamilton_equations(args, m, kappa):
    q, eta = args
    system = SystemSpec("quadratic_hamiltonian", QuadraticParams(m, kappa), NEGENTROPY)
    assert hamilton_residual(system, 0.0, q, eta) < 1e-5


@given(density_and_fibers(k=1, scale=1.0, n=4), st.floats(0.3, 3), st.floats(0.3, 3))
def test_replicator_is_conjugate_to_el(args, a, b):
    q, v = args
    el = SystemSpec("kl_lagrangian", KLParams(a, b, 1.0))
    rep = SystemSpec("kl_replicator", KLParams(a, b, 1.0))
    y = np.concatenate([q, v])
    F = el.field(0, y)
    chi = lambda z: patch_e(z[:4], a * z[4:])
    eps = 1e-6
    chidot = (chi(y + eps * F) - chi(y - eps * F)) / (2 * eps)
    dz = rep.field(0, rep.state_from_velocity(q, v))
    np.testing.assert_allclose(dz[:4], chidot, atol=1e-6)
    np.testing.assert_allclose(dz[4:], F[:4], atol=1e-10)
    assert abs(dz[:4].sum()) < 1e-12 and abs(dz[4:].sum()) < 1e-12


@given(density_and_fibers(k=1, scale=1.0))
def test_quadratic_accelerations(args):
    q, v = args
    for m, kappa in ((1.0, 0.0), (2.0, 0.7)):
        dy = quadratic_el_field(m, kappa)(0, np.concatenate([q, v]))
        vdot = dy[q.size:]
        jet = CurveJet2(q, q * v, q * (v**2 + vdot))
        np.testing.assert_allclose(riemannian_acceleration(jet), -(kappa / m) * NEGENTROPY.natural_grad(q), atol=1e-12)
        assert abs(expectation(q, vdot) + expectation(q, v * v)) < 1e-12  # keeps E_q[v] = 0


# -- equilibria ----------------------------------------------------------------

def test_equilibria():
    u3 = np.ones(3)
    z = np.zeros(3)
    y = np.concatenate([u3, z])
    for field in (quadratic_el_field(1.0, 1.0), kl_el_field(1, 1, 1), kl_hamilton_field(1, 1, 1)):
        np.testing.assert_allclose(field(0, y), 0, atol=1e-15)
    np.testing.assert_allclose(kl_replicator_field(1, 1)(0, np.concatenate([u3, u3])), 0, atol=1e-15)
    np.testing.assert_allclose(entropy_flow_field()(0, u3), 0, atol=1e-15)
    sch = ScheduleABG(2, 0.5, 0.1)
    np.testing.assert_allclose(damped_kl_el_field(sch)(0.3, y), 0, atol=1e-15)
    np.testing.assert_allclose(damped_kl_hamilton_field(sch)(0.3, y), 0, atol=1e-15)
    # zero potential: any q with v = 0 is at rest
    q = np.array([0.4, 1.1, 1.5])
    yq = np.concatenate([q, z])
    np.testing.assert_allclose(kl_el_field(0.5, 2, 1, zero_potential())(0, yq), 0, atol=1e-15)
    np.testing.assert_allclose(kl_replicator_field(0.5, 2, zero_potential())(0, np.concatenate([q, q])), 0, atol=1e-15)


def test_entropy_flow_field_formula():
    q = np.array([0.4, 1.1, 1.5])
    np.testing.assert_allclose(entropy_flow_field()(0, q), -q * (np.log(q) + entropy(q)))


# -- schedule -------------------------------------------------------------------

def test_schedule_identities():
    sch = ScheduleABG(2.0, 0.5, 0.1)
    for t in np.linspace(0.1, 20, 57):
        assert abs(sch.gamma_dot(t) - sch.exp_alpha(t)) <= 1e-14
        assert abs(sch.exp_alpha(t) - sch.beta_dot(t)) <= 1e-14
        assert sch.exp_alpha(t) - sch.alpha_dot(t) == pytest.approx(3 / t, rel=1e-14)
        assert np.exp(sch.alpha(t)) == pytest.approx(sch.exp_alpha(t), rel=1e-13)
        assert np.exp(sch.beta(t)) == pytest.approx(sch.exp_beta(t), rel=1e-13)
        assert np.exp(sch.gamma(t)) == pytest.approx(sch.exp_gamma(t), rel=1e-13)
        # force coefficient e^{2α+β} = C p² t^{p-2}
        assert sch.exp_alpha(t) ** 2 * sch.exp_beta(t) == pytest.approx(0.5 * 4, rel=1e-13)
    with pytest.raises(DomainError):
        sch.alpha(0.05)
    with pytest.raises(DomainError):
        damped_kl_el_field(sch)(0.05, np.concatenate([np.ones(3), np.zeros(3)]))
    with pytest.raises(DomainError):
        ScheduleABG(0.0, 1.0)


@given(st.data())
def test_damped_momentum_forms_agree(data):
    sch = ScheduleABG(data.draw(st.floats(0.5, 3)), data.draw(st.floats(0.2, 2)), 0.1)
    q = data.draw(densities(n=4))
    t = data.draw(st.floats(0.1, 4))
    eta = sch.exp_gamma(t) * kl_fiber_gradient(1.0, 1.0, q, data.draw(fibers(q)))
    dy = damped_kl_hamilton_field(sch, NEGENTROPY)(t, np.concatenate([q, eta]))
    w = dy[:4] / q
    np.testing.assert_allclose(damped_kl_momentum_derivative(sch, NEGENTROPY, t, q, eta) - w * eta, dy[4:], atol=1e-10)


# -- system descriptor ----------------------------------------------------------

def test_system_spec_validation_and_defaults():
    assert len(KINDS) == 8
    with pytest.raises(DomainError):
        SystemSpec("heat_flow")
    with pytest.raises(DomainError):
        SystemSpec("kl_lagrangian", QuadraticParams())
    with pytest.raises(DomainError):
        KLParams(1, 0, 1)
    with pytest.raises(DomainError):
        QuadraticParams(1, -1)
    assert SystemSpec("kl_hamiltonian").params == KLParams()
    assert SystemSpec("damped_kl_lagrangian").params == ScheduleABG()
    assert SystemSpec("entropy_gradient_flow").energy(0, np.ones(3)) is None
    with pytest.raises(ValueError):
        SystemSpec("kl_hamiltonian").lagrangian(0, np.ones(2), np.zeros(2))


@given(density_and_fibers(k=1, scale=1.0))
def test_state_maps_roundtrip(args):
    q, v = args
    for kind in KINDS:
        sys = SystemSpec(kind)
        t = 0.5 if sys.time_dependent else 0.0
        y = sys.state_from_velocity(q, v, t)
        qq, aux = sys.split(y)
        np.testing.assert_array_equal(qq, q)
        np.testing.assert_array_equal(sys.join(qq, aux), y)
        if kind != "entropy_gradient_flow":
            np.testing.assert_allclose(sys.velocity(t, y), v, atol=1e-10)


@given(density_and_fibers(k=1, scale=1.0))
def test_energies_agree_across_formulations(args):
    q, v = args
    H = [SystemSpec(k).energy(0, SystemSpec(k).state_from_velocity(q, v))
         for k in ("kl_lagrangian", "kl_hamiltonian", "kl_replicator")]
    assert np.ptp(H) < 1e-12


# -- action ---------------------------------------------------------------------

class _Path:
    def __init__(self, times, states):
        self.times, self.states = times, states


def test_action_of_rest_is_zero():
    sys = SystemSpec("kl_lagrangian", KLParams(), zero_potential())
    y = np.concatenate([np.array([0.5, 1.5]), np.zeros(2)])
    assert action_integral(sys, _Path(np.linspace(0, 1, 11), np.array([y] * 11))) == 0
    with pytest.raises(ValueError):
        action_integral(SystemSpec("kl_hamiltonian"), _Path([0, 1], [y, y]))


def test_free_geodesic_action():
    sys = SystemSpec("quadratic_lagrangian", QuadraticParams(1.0, 0.0), zero_potential())
    q0, v0 = np.ones(3), np.array([-0.1, -0.4, 0.5])
    T = 2.0
    tr = integrate(sys, sys.state_from_velocity(q0, v0), (0, T), IntegratorConfig(), t_eval=np.linspace(0, T, 401))
    assert action_integral(sys, tr) == pytest.approx(0.5 * expectation(q0, v0**2) * T, rel=1e-10)


@pytest.mark.parametrize("sys,t_span", [
    (SystemSpec("kl_lagrangian", KLParams(1.0, 1.0, 1.0)), (0.0, 1.0)),
    (SystemSpec("quadratic_lagrangian", QuadraticParams(1.0, 0.5)), (0.0, 1.0)),
    (SystemSpec("damped_kl_lagrangian", ScheduleABG(2.0, 0.5, 0.1)), (0.5, 1.5)),
])
def test_solutions_are_stationary(sys, t_span):
    rng = np.random.default_rng(7)
    q0 = np.array([1.5, 0.9, 0.6])
    v0 = center(q0, [-0.1, -0.4, 0.5])
    tr = integrate(sys, sys.state_from_velocity(q0, v0, t_span[0]), t_span, IntegratorConfig(),
                   t_eval=np.linspace(*t_span, 2001))
    A0 = action_integral(sys, tr)
    eps = 1e-3
    scale = max(abs(A0), 1.0)
    for _ in range(5):
        h = rng.standard_normal(3)
        dA = path_action(sys, *chart_perturbation(sys, tr, h, eps)) - A0
        dA2 = path_action(sys, *chart_perturbation(sys, tr, h, 2 * eps)) - A0
        assert abs(dA) <= 10 * eps**2 * scale
        assert dA2 / dA == pytest.approx(4, rel=0.05)  # second order in ε
