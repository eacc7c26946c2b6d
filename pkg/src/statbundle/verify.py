"""Invariant suites run by ``statbundle verify``.

Each suite is a function of a numpy Generator returning a list of Check
records (measured error against a tolerance).  Suites are independent and
share no state.
"""
from __future__ import annotations

import os
import zlib
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import oracles
from .calculus import (
    exp_acceleration,
    exp_covariant_derivative,
    mix_acceleration,
    mix_covariant_derivative,
    riemannian_acceleration,
    velocity,
)
from .cumulant import d2K, d3K, dK, kl, log_normalizer
from .integrate import IntegratorConfig, integrate, project
from .mechanics import (
    KLParams,
    QuadraticParams,
    ScheduleABG,
    SystemSpec,
    damped_kl_momentum_derivative,
    kl_fiber_gradient,
    kl_lagrangian_gradient,
    negentropy,
    quadratic_el_field,
    zero_potential,
)
from .simplex import center, chart_s, e_transport, expectation, fisher_matrix, m_transport, pairing, patch_e

DEFAULT_SEED = 20240611


@dataclass
class Check:
    suite: str
    name: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.measured) and self.measured <= self.tolerance)

    def as_dict(self):
        return {**asdict(self), "passed": self.passed}


def seed_from_env() -> int:
    return int(os.environ.get("STATBUNDLE_SEED", DEFAULT_SEED))


def random_density(rng, n, spread=1.0):
    return patch_e(np.ones(n), spread * rng.standard_normal(n))


def random_fiber(rng, q, scale=1.0):
    return center(q, scale * rng.standard_normal(q.size))


def _max(xs):
    return float(np.max(xs)) if len(xs) else 0.0


# -- suites ---------------------------------------------------------------------

def suite_transports(rng, count=1000):
    semi_e, semi_m, dual, cons = [], [], [], []
    for _ in range(count):
        n = int(rng.integers(2, 9))
        p, q, r = (random_density(rng, n) for _ in range(3))
        v, eta = random_fiber(rng, p), random_fiber(rng, p)
        semi_e.append(np.abs(e_transport(q, r, e_transport(p, q, v)) - e_transport(p, r, v)).max())
        semi_m.append(np.abs(m_transport(q, r, m_transport(p, q, eta)) - m_transport(p, r, eta)).max())
        w = random_fiber(rng, q)
        dual.append(abs(pairing(q, m_transport(p, q, eta), w) - pairing(p, eta, e_transport(q, p, w))))
        cons.append(abs(pairing(q, m_transport(p, q, eta), e_transport(p, q, v)) - pairing(p, eta, v)))
    return [Check("transports", "e-transport semigroup", _max(semi_e), 1e-12),
            Check("transports", "m-transport semigroup", _max(semi_m), 1e-12),
            Check("transports", "transport duality", _max(dual), 1e-12),
            Check("transports", "pairing conservation", _max(cons), 1e-12)]


def suite_cumulant(rng, count=200):
    e1, e2, e3, cov, mean_id = [], [], [], [], []
    for _ in range(count):
        n = int(rng.integers(2, 9))
        p = random_density(rng, n)
        u = random_fiber(rng, p, 0.5)
        h1, h2, h3 = (random_fiber(rng, p) for _ in range(3))
        e1.append(abs(dK(p, u, h1) - oracles.fd_dK(p, u, h1)))
        e2.append(abs(d2K(p, u, h1, h2) - oracles.fd_d2K(p, u, h1, h2)))
        e3.append(abs(d3K(p, u, h1, h2, h3) - oracles.fd_d3K(p, u, h1, h2, h3)))
        cov.append(abs(d2K(p, np.zeros(n), h1, h2) - oracles.sample_covariance(p, h1, h2)))
        q = patch_e(p, u)
        mean_id.append(abs(expectation(q, u) - (log_normalizer(p, u) + kl(q, p))))
    return [Check("cumulant", "dK vs finite differences", _max(e1), 1e-8),
            Check("cumulant", "d2K vs finite differences", _max(e2), 1e-6),
            Check("cumulant", "d3K vs finite differences", _max(e3), 1e-4),
            Check("cumulant", "d2K at 0 equals covariance", _max(cov), 1e-12),
            Check("cumulant", "E_q[u] = K_p(u) + D(q, p)", _max(mean_id), 1e-12)]


def fisher_by_pullback(theta) -> np.ndarray:
    """Fisher matrix as d2K at s_p(q) along the coordinate score directions."""
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    n = k + 1
    probs = np.append(theta, 1 - theta.sum())
    q = n * probs
    p = np.ones(n)
    u = chart_s(p, q)
    scores = []
    for i in range(k):
        h = np.zeros(n)
        h[i] = 1 / theta[i]
        h[-1] = -1 / probs[-1]
        scores.append(h)
    return np.array([[d2K(p, u, a, b) for b in scores] for a in scores])


def suite_fisher(rng, count=100):
    errs = []
    for _ in range(count):
        n = int(rng.integers(2, 5))
        theta = rng.dirichlet(np.ones(n))[: n - 1]
        G = fisher_matrix(theta)
        errs.append(np.abs(G - fisher_by_pullback(theta)).max() / np.abs(G).max())
    return [Check("fisher", "Fisher matrix vs chart pullback of d2K (relative)", _max(errs), 1e-8)]


def suite_covariant(rng, count=50):
    """Duality of the covariant derivatives along exponential curves."""
    duality, accel = [], []
    for _ in range(count):
        n = int(rng.integers(2, 9))
        p = random_density(rng, n)
        u = random_fiber(rng, p, 0.5)
        eta0, eta1, w0, w1 = (rng.standard_normal(n) for _ in range(4))
        eta0, eta1 = center(p, eta0), center(p, eta1)

        def fields(t):
            jet = oracles.exp_family_geodesic(p, u, t)
            q, v = jet.q, velocity(jet)
            eta = (p / q) * (eta0 + t * eta1)
            etadot = -v * eta + (p / q) * eta1
            raw = w0 + t * w1
            w = center(q, raw)
            wdot = w1 - expectation(q, w1) - expectation(q, v * raw)
            return q, v, eta, etadot, w, wdot

        t, h = float(rng.uniform(0, 1)), 1e-5
        q, v, eta, etadot, w, wdot = fields(t)
        pair_at = lambda s: pairing(fields(s)[0], fields(s)[2], fields(s)[4])
        lhs = (pair_at(t + h) - pair_at(t - h)) / (2 * h)
        rhs = pairing(q, mix_covariant_derivative(q, v, eta, etadot), w) + pairing(q, eta, exp_covariant_derivative(q, wdot))
        duality.append(abs(lhs - rhs))
        jet = oracles.exp_family_geodesic(p, u, t)
        avg = 0.5 * (exp_acceleration(jet) + mix_acceleration(jet))
        accel.append(np.abs(riemannian_acceleration(jet) - avg).max())
    return [Check("covariant", "d/dt<η,w> = <Dη,w> + <η,Dw>", _max(duality), 1e-7),
            Check("covariant", "Riemannian acceleration is the mean", _max(accel), 1e-12)]


def suite_oracles(rng, count=20):
    gp = oracles.GeodesicParams.from_velocity(oracles.TERNARY_Q0, oracles.TERNARY_W0)
    field = quadratic_el_field(1.0, 0.0, zero_potential())
    tb = gp.first_boundary_time()
    resid, racc, const = [], [], []
    for t in np.linspace(0, 0.95 * tb, 40):
        jet = oracles.sphere_geodesic(gp, t)
        v = velocity(jet)
        vdot = (jet.qddot * jet.q - jet.qdot**2) / jet.q**2
        dy = field(t, np.concatenate([jet.q, v]))
        resid.append(max(np.abs(dy[:3] - jet.qdot).max(), np.abs(dy[3:] - vdot).max()))
        racc.append(np.abs(riemannian_acceleration(jet)).max())
        const.append(np.abs(mix_acceleration(jet) - 0.5 * v**2 - gp.acceleration_constant()).max())
    iso, expacc, shift = [], [], []
    for _ in range(count):
        n = int(rng.integers(2, 9))
        q = random_density(rng, n)
        w1, w2 = random_fiber(rng, q), random_fiber(rng, q)
        iso.append(abs(expectation(q, w1 * w2) - oracles.tangent_to_sphere(q, w1) @ oracles.tangent_to_sphere(q, w2)))
        u = random_fiber(rng, q, 0.5)
        for t in np.linspace(-1, 1, 5):
            expacc.append(np.abs(exp_acceleration(oracles.exp_family_geodesic(q, u, t))).max())
            jet = oracles.exp_family_geodesic(q, u, t)
            shift.append(np.abs(patch_e(jet.q, velocity(jet)) - oracles.exp_family_geodesic(q, u, t + 1).q).max())
    return [Check("oracles", "sphere geodesic solves the free Euler-Lagrange field", _max(resid), 1e-9),
            Check("oracles", "Riemannian acceleration of sphere geodesic", _max(racc), 1e-10),
            Check("oracles", "q̈/q - ½★q² = -2σ²", _max(const), 1e-10),
            Check("oracles", "sphere covering is an isometry", _max(iso), 1e-12),
            Check("oracles", "exponential acceleration of e_p(tu)", _max(expacc), 1e-10),
            Check("oracles", "χ-shift e_q(t)(★q) = q(t+1)", _max(shift), 1e-10)]


_TIGHT = IntegratorConfig(rtol=1e-10, atol=1e-10)


def _rel_drift(H):
    return float(np.max(np.abs(H - H[0])) / max(abs(H[0]), 1e-300))


def suite_conservation(rng):
    q0, v0 = oracles.TERNARY_Q0, oracles.TERNARY_W0
    out = []
    for label, sys in [("quadratic", SystemSpec("quadratic_hamiltonian", QuadraticParams(1.0, 0.0))),
                       ("quadratic with entropy potential", SystemSpec("quadratic_hamiltonian", QuadraticParams(1.0, 0.5))),
                       ("KL a=b=c=1", SystemSpec("kl_hamiltonian", KLParams(1, 1, 1)))]:
        tr = integrate(sys, sys.state_from_velocity(q0, v0), (0, 1), _TIGHT, t_eval=np.linspace(0, 1, 51))
        out.append(Check("conservation", f"{label} Hamiltonian relative drift", _rel_drift(tr.diagnostics["hamiltonian"]), 1e-8))
        out.append(Check("conservation", f"{label} mass drift", float(tr.diagnostics["mass_drift"].max()), 1e-9))
        out.append(Check("conservation", f"{label} centering drift", float(tr.diagnostics["centering_drift"].max()), 1e-9))
    sys = SystemSpec("kl_replicator", KLParams(1, 1, 1), zero_potential())
    tr = integrate(sys, sys.state_from_velocity(q0, v0), (0, 1), _TIGHT, t_eval=np.linspace(0, 1, 51))
    D = np.array([kl(*np.split(y, 2)) for y in tr.states])
    out.append(Check("conservation", "free replicator conserves D(χ, q)", _rel_drift(D), 1e-8))
    return out


def formulation_trajectories(kinds, params, potential, q0, v0, t_span, t_eval, config=_TIGHT):
    """q(t) of several formulations started from the same (q0, ★q0)."""
    out = {}
    for kind in kinds:
        sys = SystemSpec(kind, params, potential)
        tr = integrate(sys, sys.state_from_velocity(q0, v0, t_span[0]), t_span, config, t_eval=t_eval)
        out[kind] = np.array([sys.split(y)[0] for y in tr.states])
    return out


def suite_equivalence(rng):
    ts = np.linspace(0, 1, 51)
    qs = formulation_trajectories(("kl_lagrangian", "kl_hamiltonian", "kl_replicator"), KLParams(1, 1, 1),
                                  negentropy(), oracles.TERNARY_Q0, oracles.TERNARY_W0, (0, 1), ts)
    a, b, c = qs.values()
    return [Check("equivalence", "Euler-Lagrange vs Hamilton", float(np.abs(a - b).max()), 1e-6),
            Check("equivalence", "Euler-Lagrange vs replicator", float(np.abs(a - c).max()), 1e-6)]


def suite_entropy(rng):
    q0 = np.array([0.5, 0.3, 0.2]) * 3
    sys = SystemSpec("entropy_gradient_flow")
    ts = np.linspace(0, 2, 41)
    tr = integrate(sys, q0, (0, 2), _TIGHT, t_eval=ts)
    err = max(np.abs(y - oracles.entropy_flow_closed_form(q0, t)).max() for t, y in zip(tr.times, tr.states))
    H = np.array([-negentropy()(y) for y in tr.states])
    return [Check("entropy", "flow vs q0^{exp(-t)}", float(err), 1e-8),
            Check("entropy", "entropy decrease (max)", float(max(0.0, -np.diff(H).min())), 0.0)]


DAMPED_Q0 = np.array([0.5, 0.3, 0.2]) * 3


def suite_damped(rng):
    sch = ScheduleABG(2.0, 0.5, 0.1)
    f = negentropy()
    v0 = center(DAMPED_Q0, oracles.TERNARY_W0)
    t_end = 5.0
    ts = np.linspace(sch.t0, t_end, 50)
    res = {}
    for kind in ("damped_kl_lagrangian", "damped_kl_hamiltonian"):
        sys = SystemSpec(kind, sch, f)
        res[kind] = integrate(sys, sys.state_from_velocity(DAMPED_Q0, v0, sch.t0), (sch.t0, t_end), _TIGHT, t_eval=ts)
    el, ham = res["damped_kl_lagrangian"], res["damped_kl_hamiltonian"]
    span = t_end - sch.t0
    und = SystemSpec("kl_lagrangian", KLParams(1, 1, 1), f)
    tr_u = integrate(und, und.state_from_velocity(DAMPED_Q0, v0), (0, span), _TIGHT, t_eval=ts - sch.t0)
    f_end = f(el.states[-1][:3])
    t_grid = np.linspace(sch.t0, t_end, 25)
    ident = max(max(abs(sch.gamma_dot(t) - sch.exp_alpha(t)), abs(sch.exp_alpha(t) - sch.beta_dot(t))) for t in t_grid)
    consistency = []
    sys_h = SystemSpec("damped_kl_hamiltonian", sch, f)
    for _ in range(20):
        q = random_density(rng, 4)
        eta = kl_fiber_gradient(0.7, 1.0, q, random_fiber(rng, q))
        t = float(rng.uniform(sch.t0, 3))
        eta = eta * sch.exp_gamma(t)
        dy = sys_h.field(t, np.concatenate([q, eta]))
        w = dy[:4] / q
        consistency.append(np.abs(damped_kl_momentum_derivative(sch, f, t, q, eta) - w * eta - dy[4:]).max())
    return [
        Check("damped", "mass drift per unit time", float(max(el.diagnostics["mass_drift"].max(), ham.diagnostics["mass_drift"].max()) / span), 1e-9),
        Check("damped", "centering drift per unit time", float(max(el.diagnostics["centering_drift"].max(), ham.diagnostics["centering_drift"].max()) / span), 1e-9),
        Check("damped", "E_q[v] along the Euler-Lagrange flow", float(el.diagnostics["centering_drift"].max()), 1e-9),
        Check("damped", "f(q(5)) - f(q(t0)) (must be < 0)", float(f_end - f(DAMPED_Q0)), -1e-12),
        Check("damped", "f(q(5)) - undamped f at equal span (must be < 0)", float(f_end - f(tr_u.states[-1][:3])), -1e-12),
        Check("damped", "Hamilton vs Euler-Lagrange q(t)", float(np.abs(el.states[:, :3] - ham.states[:, :3]).max()), 1e-6),
        Check("damped", "ideal scaling identities", float(ident), 1e-14),
        Check("damped", "covariant and embedded momentum equations agree", _max(consistency), 1e-10),
    ]


def suite_limits(rng, count=50):
    a = 1e-6
    fib, grad = [], []
    f = negentropy()
    for _ in range(count):
        n = int(rng.integers(2, 9))
        q = random_density(rng, n)
        w = random_fiber(rng, q)
        b = float(rng.uniform(0.5, 2))
        c = float(rng.uniform(0.5, 2))
        fib.append(np.abs(kl_fiber_gradient(a, c, q, w)).max() / c)
        grad.append(np.abs(kl_lagrangian_gradient(a, b, 1 / b, q, w, f) + f.natural_grad(q)).max())
    return [Check("limits", "‖Grad_e L‖/c at a=1e-6", _max(fib), 1e-5),
            Check("limits", "‖Grad L^{a,b,1/b} + Grad f‖ at a=1e-6", _max(grad), 1e-4)]


def rk4_error_ratios(steps=(0.1, 0.05, 0.025)):
    """Error ratios under step halving against the sphere and entropy oracles."""
    q0, v0 = oracles.TERNARY_Q0, oracles.TERNARY_W0
    gp = oracles.GeodesicParams.from_velocity(q0, v0)
    free = SystemSpec("quadratic_lagrangian", QuadraticParams(1.0, 0.0), zero_potential())
    ent = SystemSpec("entropy_gradient_flow")
    qe = DAMPED_Q0
    es, ee = [], []
    for h in steps:
        cfg = IntegratorConfig(method="rk4_fixed", step=h)
        tr = integrate(free, free.state_from_velocity(q0, v0), (0, 3), cfg)
        es.append(np.abs(tr.states[-1][:3] - oracles.sphere_geodesic(gp, 3.0).q).max())
        tr = integrate(ent, qe, (0, 2), cfg)
        ee.append(np.abs(tr.states[-1] - oracles.entropy_flow_closed_form(qe, 2.0)).max())
    return [es[i] / es[i + 1] for i in range(len(steps) - 1)], [ee[i] / ee[i + 1] for i in range(len(steps) - 1)]


def suite_integrator(rng):
    rs, re = rk4_error_ratios()
    dev = lambda rs: max(abs(r - 16) for r in rs)
    free = SystemSpec("quadratic_lagrangian", QuadraticParams(1.0, 0.0), zero_potential())
    tr = integrate(free, free.state_from_velocity(oracles.TERNARY_Q0, oracles.TERNARY_W0), (0, 10), _TIGHT)
    below = float(max(0.0, 1e-6 - tr.diagnostics["min_q"].min()))
    y = free.state_from_velocity(oracles.TERNARY_Q0, oracles.TERNARY_W0)
    return [Check("integrator", "rk4 order vs sphere oracle: |ratio - 16|", dev(rs), 4.0),
            Check("integrator", "rk4 order vs entropy oracle: |ratio - 16|", dev(re), 4.0),
            Check("integrator", "boundary guard: stopped at boundary (0 = yes)", 0.0 if tr.reason == "boundary" else 1.0, 0.0),
            Check("integrator", "boundary guard: shortfall below floor", below, 0.0),
            Check("integrator", "projection idempotent", float(np.abs(project(project(y)) - project(y)).max()), 0.0)]


SUITES: dict[str, Callable] = {
    "transports": suite_transports,
    "cumulant": suite_cumulant,
    "fisher": suite_fisher,
    "covariant": suite_covariant,
    "oracles": suite_oracles,
    "conservation": suite_conservation,
    "equivalence": suite_equivalence,
    "entropy": suite_entropy,
    "damped": suite_damped,
    "limits": suite_limits,
    "integrator": suite_integrator,
}


def run_suites(names=None, seed: int | None = None) -> list[Check]:
    seed = seed_from_env() if seed is None else seed
    names = list(SUITES) if not names else list(names)
    checks = []
    for name in names:
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        checks.extend(SUITES[name](rng))
    return checks
