"""Kinematics on the statistical bundle.

Velocities, covariant derivatives, accelerations, the χ-retraction and
natural gradients of scalar fields on the open simplex.  Curves enter as jets
``(q, q̇, q̈)`` in the embedding space R^n.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cumulant import entropy
from .simplex import CENTERING_TOL, CenteringError, DomainError, _vec, center, expectation, patch_e

JET_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CurveJet2:
    """Second-order jet of a density curve at one instant."""

    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray

    def __post_init__(self):
        q, qd, qdd = _vec(self.q), _vec(self.qdot), _vec(self.qddot)
        if not (q.shape == qd.shape == qdd.shape):
            raise DomainError("jet components differ in shape")
        if np.any(q <= 0):
            raise DomainError("jet base point is not a positive density")
        scale = 1.0 + np.abs(qd).sum() + np.abs(qdd).sum()
        if abs(qd.mean()) > JET_TOL * scale or abs(qdd.mean()) > JET_TOL * scale:
            raise DomainError("jet does not conserve mass (sum qdot, sum qddot != 0)")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qd)
        object.__setattr__(self, "qddot", qdd)


def jet_from_curve(curve: Callable[[float], np.ndarray], t: float, h: float = 1e-4) -> CurveJet2:
    """Central-difference jet of a mass-preserving curve t -> q(t).

    The differences carry O(eps/h²) roundoff in their sums; it is removed so
    the jet conserves mass exactly.
    """
    qm, q0, qp = _vec(curve(t - h)), _vec(curve(t)), _vec(curve(t + h))
    qd, qdd = (qp - qm) / (2 * h), (qp - 2 * q0 + qm) / h**2
    return CurveJet2(q0, qd - qd.mean(), qdd - qdd.mean())


@dataclass(frozen=True)
class Potential:
    """Scalar field f on densities together with its natural gradient."""

    name: str
    value: Callable[[np.ndarray], float]
    natural_grad: Callable[[np.ndarray], np.ndarray]

    def __call__(self, q) -> float:
        return self.value(q)


def velocity(jet: CurveJet2) -> np.ndarray:
    """Score q̇/q."""
    return jet.qdot / jet.q


def exp_covariant_derivative(q, wdot) -> np.ndarray:
    return center(q, wdot)


def mix_covariant_derivative(q, v, eta, etadot, tol: float = CENTERING_TOL) -> np.ndarray:
    """Dη/dt = v η + η̇, where v is the velocity of the base curve.

    The result is centered exactly when ``etadot`` comes from an actual curve
    in the dual bundle; anything further off than ``tol`` is rejected.
    """
    d = _vec(v) * _vec(eta) + _vec(etadot)
    m = expectation(q, d)
    if abs(m) > tol:
        raise CenteringError(f"mixture derivative not centered (E_q = {m:.3e}); "
                             "etadot is inconsistent with a dual-bundle curve")
    return d - m


def mix_acceleration(jet: CurveJet2) -> np.ndarray:
    return jet.qddot / jet.q


def exp_acceleration(jet: CurveJet2) -> np.ndarray:
    v = velocity(jet)
    return mix_acceleration(jet) - center(jet.q, v**2)


def riemannian_acceleration(jet: CurveJet2) -> np.ndarray:
    return 0.5 * (exp_acceleration(jet) + mix_acceleration(jet))


def chi_retraction(q, w) -> np.ndarray:
    """χ = e_q(w); with w the velocity, χ's own velocity encodes the acceleration."""
    return patch_e(q, w)


def natural_grad_entropy(q) -> np.ndarray:
    q = _vec(q)
    return -(np.log(q) + entropy(q))


def centered_indicator_basis(q) -> np.ndarray:
    """Rows δ_x - E_q[δ_x] for x = 0..n-2; a basis of the fiber at q."""
    q = _vec(q)
    n = q.size
    eye = np.eye(n)[: n - 1]
    return eye - (q[: n - 1] / n)[:, None]


def fd_natural_gradient(F: Callable[[np.ndarray], float], q, eps: float = 1e-5) -> np.ndarray:
    """Natural gradient of F at q by central differences along e_q(±ε b_i).

    Solves <g, b_i>_q = dF[b_i] for g in the span of the centered indicators.
    """
    q = _vec(q)
    basis = centered_indicator_basis(q)
    dF = np.array([(F(patch_e(q, eps * b)) - F(patch_e(q, -eps * b))) / (2 * eps) for b in basis])
    gram = (basis * q) @ basis.T / q.size
    coef = np.linalg.solve(gram, dF)
    return center(q, coef @ basis)
