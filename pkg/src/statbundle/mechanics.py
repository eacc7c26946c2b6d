"""Lagrangian and Hamiltonian systems on the statistical bundle.

Every system is a first-order vector field ``field(t, y) -> dy`` on the
embedded state ``y = (q, aux)`` in R^{2n} (R^n for the entropy flow).  The
constraints ``sum(q) = n`` and ``E_q[aux] = 0`` are preserved by the fields
but not enforced; integrators monitor them.

Conventions, with ``G = Grad f(q)`` the natural gradient of the potential:

* quadratic:   L = (m/2) E_q[w^2] - κ f(q)
* KL family:   L = c (a⁻¹ K_q(a w) - b f(q)),  momentum η = c (e_q(a w)/q - 1)
* damped KL:   the KL family with a = e^{-α_t}, b = e^{α_t+β_t}, c = e^{γ_t}
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .calculus import Potential
from .cumulant import entropy, kl
from .simplex import EXP_BOUND, DomainError, _check_exp_bound, _vec, center, chart_s, expectation, log_normalizer, patch_e

Field = Callable[[float, np.ndarray], np.ndarray]


# -- potentials --------------------------------------------------------------

def negentropy() -> Potential:
    return Potential(
        "negentropy",
        lambda q: -entropy(q),
        lambda q: center(q, np.log(_vec(q))),
    )


def linear(c) -> Potential:
    c = _vec(c).copy()
    return Potential("linear", lambda q: expectation(q, c), lambda q: center(q, c))


def kl_to_target(target) -> Potential:
    """f(q) = D(q, target)."""
    target = _vec(target).copy()
    return Potential(
        "kl_to_target",
        lambda q: kl(q, target),
        lambda q: center(q, np.log(_vec(q) / target)),
    )


def zero_potential() -> Potential:
    return Potential("zero", lambda q: 0.0, lambda q: np.zeros_like(_vec(q)))


def builtin_potentials() -> dict[str, Callable[..., Potential]]:
    return {
        "negentropy": negentropy,
        "linear": linear,
        "kl_to_target": kl_to_target,
        "zero": zero_potential,
    }


NEGENTROPY = negentropy()


# -- parameters --------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticParams:
    m: float = 1.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.m <= 0 or self.kappa < 0:
            raise DomainError("quadratic system needs m > 0 and kappa >= 0")


@dataclass(frozen=True)
class KLParams:
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if min(self.a, self.b, self.c) <= 0:
            raise DomainError("KL system needs a, b, c > 0")


@dataclass(frozen=True)
class ScheduleABG:
    """α_t = log p - log t, β_t = p log t + log C, γ_t = p log t, for t >= t0.

    Under this choice γ̇ = e^α = β̇ = p/t (ideal scaling).
    """

    p_index: float = 2.0
    C: float = 0.5
    t0: float = 0.1

    def __post_init__(self):
        if self.p_index <= 0 or self.C <= 0 or self.t0 <= 0:
            raise DomainError("schedule needs p > 0, C > 0, t0 > 0")

    def _check(self, t):
        if t < self.t0:
            raise DomainError(f"schedule evaluated at t={t} before t0={self.t0}")

    def alpha(self, t):
        self._check(t)
        return np.log(self.p_index) - np.log(t)

    def beta(self, t):
        self._check(t)
        return self.p_index * np.log(t) + np.log(self.C)

    def gamma(self, t):
        self._check(t)
        return self.p_index * np.log(t)

    def exp_alpha(self, t):
        self._check(t)
        return self.p_index / t

    def exp_beta(self, t):
        self._check(t)
        return self.C * t**self.p_index

    def exp_gamma(self, t):
        self._check(t)
        return t**self.p_index

    def alpha_dot(self, t):
        self._check(t)
        return -1.0 / t

    def beta_dot(self, t):
        self._check(t)
        return self.p_index / t

    def gamma_dot(self, t):
        self._check(t)
        return self.p_index / t

    def kl_params(self, t) -> KLParams:
        """The frozen-time KL parameters (a, b, c)."""
        ea = self.exp_alpha(t)
        return KLParams(a=1.0 / ea, b=ea * self.exp_beta(t), c=self.exp_gamma(t))


# -- quadratic Lagrangian / Hamiltonian -------------------------------------

def quadratic_lagrangian_value(m, kappa, q, w, potential: Potential = NEGENTROPY) -> float:
    return 0.5 * m * expectation(q, _vec(w) ** 2) - kappa * potential(q)


def quadratic_el_field(m: float, kappa: float, potential: Potential = NEGENTROPY) -> Field:
    """q̇ = q v,  v̇ = -v²/2 - E_q[v²]/2 - (κ/m) Grad f(q)."""
    QuadraticParams(m, kappa)
    k = kappa / m

    def rhs(t, y):
        q, v = np.split(y, 2)
        vdot = -0.5 * v**2 - 0.5 * expectation(q, v**2)
        if k:
            vdot = vdot - k * potential.natural_grad(q)
        return np.concatenate([q * v, vdot])

    return rhs


def quadratic_hamiltonian(q, eta, m: float = 1.0, kappa: float = 0.0, potential: Potential = NEGENTROPY) -> float:
    """H = E_q[η²]/(2m) + κ f(q), the Legendre transform of the quadratic Lagrangian."""
    h = 0.5 / m * expectation(q, _vec(eta) ** 2)
    return h + kappa * potential(q) if kappa else h


def quadratic_hamilton_field(m: float, kappa: float = 0.0, potential: Potential = NEGENTROPY) -> Field:
    """★q = η/m,  Dη/dt = (η² - E_q[η²])/(2m) - κ Grad f, embedded via η̇ = Dη/dt - ★q η."""
    QuadraticParams(m, kappa)

    def rhs(t, y):
        q, eta = np.split(y, 2)
        w = eta / m
        deta = center(q, eta**2) / (2 * m)
        if kappa:
            deta = deta - kappa * potential.natural_grad(q)
        return np.concatenate([q * w, deta - w * eta])

    return rhs


# -- KL family ---------------------------------------------------------------

def _ratio_minus_one(q, u, bound=EXP_BOUND) -> np.ndarray:
    """e_q(u)/q - 1 = expm1(u - K_q(u))."""
    u = _vec(u)
    _check_exp_bound(u, bound)
    return np.expm1(u - log_normalizer(q, u))


def kl_lagrangian_value(a, b, c, q, w, potential: Potential = NEGENTROPY) -> float:
    _check_exp_bound(a * _vec(w), EXP_BOUND)
    return c * (log_normalizer(q, a * _vec(w)) / a - b * potential(q))


def kl_fiber_gradient(a, c, q, w) -> np.ndarray:
    """Momentum map Grad_e L = c (e_q(a w)/q - 1)."""
    return c * _ratio_minus_one(q, a * _vec(w))


def kl_lagrangian_gradient(a, b, c, q, w, potential: Potential = NEGENTROPY) -> np.ndarray:
    """Natural gradient in q: c (a⁻¹(e_q(a w)/q - 1) - w - b Grad f)."""
    w = _vec(w)
    return c * (_ratio_minus_one(q, a * w) / a - w - b * potential.natural_grad(q))


def _log_one_plus(eta, c) -> np.ndarray:
    x = _vec(eta) / c
    if np.any(x <= -1):
        raise DomainError("momentum outside domain: some 1 + eta/c <= 0")
    return np.log1p(x)


def kl_legendre_inverse(a, c, q, eta) -> np.ndarray:
    """w(η) = a⁻¹ (log(1 + η/c) - E_q[log(1 + η/c)])."""
    return center(q, _log_one_plus(eta, c)) / a


def kl_hamiltonian_value(a, b, c, q, eta, potential: Potential = NEGENTROPY) -> float:
    """c (a⁻¹ E_q[(1+η/c) log(1+η/c)] + b f(q))."""
    ell = _log_one_plus(eta, c)
    return c * (expectation(q, (1.0 + _vec(eta) / c) * ell) / a + b * potential(q))


def kl_hamiltonian_gradient(a, b, c, q, eta, potential: Potential = NEGENTROPY) -> np.ndarray:
    """Natural gradient in q of the KL Hamiltonian, c w(η) - η/a + c b Grad f."""
    w = kl_legendre_inverse(a, c, q, eta)
    return c * w - _vec(eta) / a + c * b * potential.natural_grad(q)


def kl_el_field(a: float, b: float, c: float = 1.0, potential: Potential = NEGENTROPY) -> Field:
    """Euler-Lagrange flow of L^{a,b,c} in (q, v).

    With r = q/χ, χ = e_q(a v):
        a(v̇ + E_q[v²]) + v = -a⁻¹(r - E_q r) - b(r G - E_q[r G]).
    The factor c scales the Lagrangian and drops out.
    """
    KLParams(a, b, c)

    def rhs(t, y):
        q, v = np.split(y, 2)
        u = a * v
        _check_exp_bound(u, EXP_BOUND)
        r1 = np.expm1(log_normalizer(q, u) - u)  # q/χ - 1
        force = -center(q, r1) / a
        if b:
            g = potential.natural_grad(q)
            force = force - b * center(q, (1.0 + r1) * g)
        vdot = (force - v) / a - expectation(q, v**2)
        return np.concatenate([q * v, vdot])

    return rhs


def kl_hamilton_field(a: float, b: float, c: float = 1.0, potential: Potential = NEGENTROPY) -> Field:
    """Hamilton flow of H^{a,b,c} in (q, η): ★q = Grad_m H, Dη/dt = -Grad H."""
    KLParams(a, b, c)

    def rhs(t, y):
        q, eta = np.split(y, 2)
        w = kl_legendre_inverse(a, c, q, eta)
        deta = eta / a - c * w - c * b * potential.natural_grad(q)
        return np.concatenate([q * w, deta - w * eta])

    return rhs


def kl_replicator_field(a: float, b: float, potential: Potential = NEGENTROPY) -> Field:
    """Replicator pair in (χ, q):
        χ̇ = a⁻¹(χ - q) - b q G,   q̇ = a⁻¹ q (log(χ/q) - E_q[log(χ/q)]).
    """
    KLParams(a, b, 1.0)

    def rhs(t, y):
        chi, q = np.split(y, 2)
        chidot = (chi - q) / a - b * q * potential.natural_grad(q)
        qdot = q * center(q, np.log(chi / q)) / a
        return np.concatenate([chidot, qdot])

    return rhs


# -- damped KL (time-dependent) ---------------------------------------------

def damped_kl_el_field(schedule: ScheduleABG, potential: Potential = NEGENTROPY) -> Field:
    """Damped KL Euler-Lagrange flow in (q, v).

        v̇ = -(e^α - α̇) v - e^α (e^α - γ̇)(r - E_q r)
             - e^{2α+β} (r G - E_q[r G]) - E_q[v²],      r = q / e_q(e^{-α} v).

    The second term vanishes under ideal scaling; with the p-schedule the
    friction is (p+1)/t and the force factor C p² t^{p-2}.
    """

    def rhs(t, y):
        q, v = np.split(y, 2)
        ea = schedule.exp_alpha(t)
        u = v / ea
        _check_exp_bound(u, EXP_BOUND)
        r1 = np.expm1(log_normalizer(q, u) - u)
        g = potential.natural_grad(q)
        vdot = (
            -(ea - schedule.alpha_dot(t)) * v
            - ea * (ea - schedule.gamma_dot(t)) * center(q, r1)
            - ea**2 * schedule.exp_beta(t) * center(q, (1.0 + r1) * g)
            - expectation(q, v**2)
        )
        return np.concatenate([q * v, vdot])

    return rhs


def damped_kl_momentum_derivative(schedule: ScheduleABG, potential: Potential, t, q, eta) -> np.ndarray:
    """Covariant form Dη/dt = e^α η - e^{α+γ}(ℓ - E_q ℓ) - e^{γ+α+β} Grad f, ℓ = log(1 + e^{-γ}η)."""
    ea, eb, ec = schedule.exp_alpha(t), schedule.exp_beta(t), schedule.exp_gamma(t)
    ell = center(q, _log_one_plus(eta, ec))
    return ea * _vec(eta) - ea * ec * ell - ec * ea * eb * potential.natural_grad(q)


def damped_kl_hamilton_field(schedule: ScheduleABG, potential: Potential = NEGENTROPY) -> Field:
    """Damped KL Hamilton flow in (q, η), embedded form:

        η̇ = e^α η - e^{α+γ}(1 + e^{-γ}η)(ℓ - E_q ℓ) - e^{γ+α+β} Grad f
        q̇ = e^α q (ℓ - E_q ℓ)
    """

    def rhs(t, y):
        q, eta = np.split(y, 2)
        ea, eb, ec = schedule.exp_alpha(t), schedule.exp_beta(t), schedule.exp_gamma(t)
        ell = center(q, _log_one_plus(eta, ec))
        etadot = ea * eta - ea * ec * (1.0 + eta / ec) * ell - ec * ea * eb * potential.natural_grad(q)
        return np.concatenate([ea * q * ell, etadot])

    return rhs


def damped_kl_hamiltonian_value(schedule: ScheduleABG, t, q, eta, potential: Potential = NEGENTROPY) -> float:
    p = schedule.kl_params(t)
    return kl_hamiltonian_value(p.a, p.b, p.c, q, eta, potential)


# -- entropy gradient flow ---------------------------------------------------

def entropy_flow_field() -> Field:
    """q̇ = q Grad H(q) = -q (log q + H(q))."""

    def rhs(t, q):
        return -q * (np.log(q) + entropy(q))

    return rhs


# -- system descriptor -------------------------------------------------------

KINDS = (
    "quadratic_lagrangian",
    "quadratic_hamiltonian",
    "kl_lagrangian",
    "kl_hamiltonian",
    "kl_replicator",
    "damped_kl_lagrangian",
    "damped_kl_hamiltonian",
    "entropy_gradient_flow",
)
LAGRANGIAN_KINDS = ("quadratic_lagrangian", "kl_lagrangian", "damped_kl_lagrangian")
KL_KINDS = ("kl_lagrangian", "kl_hamiltonian", "kl_replicator", "damped_kl_lagrangian", "damped_kl_hamiltonian")

_PARAM_TYPES = {
    "quadratic_lagrangian": QuadraticParams,
    "quadratic_hamiltonian": QuadraticParams,
    "kl_lagrangian": KLParams,
    "kl_hamiltonian": KLParams,
    "kl_replicator": KLParams,
    "damped_kl_lagrangian": ScheduleABG,
    "damped_kl_hamiltonian": ScheduleABG,
    "entropy_gradient_flow": type(None),
}


@dataclass(frozen=True)
class SystemSpec:
    kind: str
    params: QuadraticParams | KLParams | ScheduleABG | None = None
    potential: Potential = field(default=NEGENTROPY)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown system kind {self.kind!r}")
        ptype = _PARAM_TYPES[self.kind]
        if self.params is None and ptype is not type(None):
            object.__setattr__(self, "params", ptype())
        if not isinstance(self.params, ptype):
            raise DomainError(f"{self.kind} needs parameters of type {ptype.__name__}")

    @property
    def time_dependent(self) -> bool:
        return self.kind.startswith("damped")

    @property
    def t0(self) -> float:
        return self.params.t0 if self.time_dependent else -np.inf

    @property
    def aux_kind(self) -> str | None:
        if self.kind == "entropy_gradient_flow":
            return None
        if self.kind == "kl_replicator":
            return "companion"
        return "velocity" if self.kind in LAGRANGIAN_KINDS else "momentum"

    @cached_property
    def field(self) -> Field:
        P, f = self.params, self.potential
        k = self.kind
        if k == "quadratic_lagrangian":
            return quadratic_el_field(P.m, P.kappa, f)
        if k == "quadratic_hamiltonian":
            return quadratic_hamilton_field(P.m, P.kappa, f)
        if k == "kl_lagrangian":
            return kl_el_field(P.a, P.b, P.c, f)
        if k == "kl_hamiltonian":
            return kl_hamilton_field(P.a, P.b, P.c, f)
        if k == "kl_replicator":
            return kl_replicator_field(P.a, P.b, f)
        if k == "damped_kl_lagrangian":
            return damped_kl_el_field(P, f)
        if k == "damped_kl_hamiltonian":
            return damped_kl_hamilton_field(P, f)
        return entropy_flow_field()

    def split(self, y) -> tuple[np.ndarray, np.ndarray | None]:
        """(q, aux) from a state vector, whatever the storage order."""
        y = _vec(y)
        if self.kind == "entropy_gradient_flow":
            return y, None
        first, second = np.split(y, 2)
        return (second, first) if self.kind == "kl_replicator" else (first, second)

    def join(self, q, aux=None) -> np.ndarray:
        if self.kind == "entropy_gradient_flow":
            return _vec(q).copy()
        if self.kind == "kl_replicator":
            return np.concatenate([_vec(aux), _vec(q)])
        return np.concatenate([_vec(q), _vec(aux)])

    def _kl_at(self, t) -> KLParams:
        return self.params.kl_params(t) if self.time_dependent else self.params

    def state_from_velocity(self, q, v, t: float = 0.0) -> np.ndarray:
        """Phase point for density q moving with velocity v (Legendre / χ map)."""
        q, v = _vec(q), _vec(v)
        if self.kind == "entropy_gradient_flow":
            return q.copy()
        if self.kind in LAGRANGIAN_KINDS:
            return self.join(q, v)
        if self.kind == "quadratic_hamiltonian":
            return self.join(q, self.params.m * v)
        P = self._kl_at(t)
        if self.kind == "kl_replicator":
            return self.join(q, patch_e(q, P.a * v))
        return self.join(q, kl_fiber_gradient(P.a, P.c, q, v))

    def velocity(self, t, y) -> np.ndarray | None:
        q, aux = self.split(y)
        if self.kind == "entropy_gradient_flow":
            return self.field(t, y) / q
        if self.kind in LAGRANGIAN_KINDS:
            return aux
        if self.kind == "quadratic_hamiltonian":
            return aux / self.params.m
        P = self._kl_at(t)
        if self.kind == "kl_replicator":
            return chart_s(q, aux) / P.a
        return kl_legendre_inverse(P.a, P.c, q, aux)

    def lagrangian(self, t, q, v) -> float:
        if self.kind not in LAGRANGIAN_KINDS:
            raise ValueError(f"{self.kind} is not a Lagrangian system")
        if self.kind == "quadratic_lagrangian":
            return quadratic_lagrangian_value(self.params.m, self.params.kappa, q, v, self.potential)
        P = self._kl_at(t)
        return kl_lagrangian_value(P.a, P.b, P.c, q, v, self.potential)

    def energy(self, t, y) -> float | None:
        """Hamiltonian value at the phase point (conserved when time-independent)."""
        if self.kind == "entropy_gradient_flow":
            return None
        q, aux = self.split(y)
        if self.kind.startswith("quadratic"):
            P = self.params
            eta = P.m * aux if self.kind == "quadratic_lagrangian" else aux
            return quadratic_hamiltonian(q, eta, P.m, P.kappa, self.potential)
        P = self._kl_at(t)
        if self.kind == "kl_replicator":
            return P.c * (kl(aux, q) / P.a + P.b * self.potential(q))
        eta = kl_fiber_gradient(P.a, P.c, q, aux) if self.aux_kind == "velocity" else aux
        return kl_hamiltonian_value(P.a, P.b, P.c, q, eta, self.potential)


# -- action ------------------------------------------------------------------

def _trapezoid(y, x) -> float:
    y, x = np.asarray(y), np.asarray(x)
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def path_action(system: SystemSpec, times, qs, vs) -> float:
    """Trapezoidal action of a sampled path (q(t_k), ★q(t_k))."""
    return _trapezoid([system.lagrangian(t, q, v) for t, q, v in zip(times, qs, vs)], times)


def action_integral(system: SystemSpec, trajectory) -> float:
    if system.kind not in LAGRANGIAN_KINDS:
        raise ValueError(f"action integral needs a Lagrangian system, got {system.kind}")
    qs, vs = zip(*(system.split(y) for y in trajectory.states))
    return path_action(system, trajectory.times, qs, vs)


def chart_perturbation(system: SystemSpec, trajectory, h, eps: float):
    """Perturb a sampled path in the chart at its initial point by ε sin(πs) h.

    Returns (times, qs, vs) of the perturbed path; endpoints are unchanged.
    """
    times = np.asarray(trajectory.times)
    qs, vs = zip(*(system.split(y) for y in trajectory.states))
    p = qs[0]
    h = center(p, h)
    T0, T = times[0], times[-1] - times[0]
    out_q, out_v = [], []
    for t, q, v in zip(times, qs, vs):
        s = (t - T0) / T
        u = chart_s(p, q) + eps * np.sin(np.pi * s) * h
        udot = center(p, v) + eps * np.pi / T * np.cos(np.pi * s) * h
        qn = patch_e(p, u)
        out_q.append(qn)
        out_v.append(center(qn, udot))
    return times, out_q, out_v
