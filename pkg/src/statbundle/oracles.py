"""Closed-form reference solutions.

Each oracle returns an analytic jet ``(q, q̇, q̈)`` so acceleration operators
can be checked without numerical differentiation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import CurveJet2
from .simplex import DomainError, _vec, center, expectation, log_normalizer, patch_e

# standard ternary example: uniform start, centered initial direction
TERNARY_Q0 = np.array([1.0, 1.0, 1.0])
TERNARY_W0 = np.array([-0.1, -0.4, 0.5])


@dataclass(frozen=True, eq=False)
class GeodesicParams:
    """Initial point q0 and direction w0 of a free (quadratic) geodesic.

    The curve q(t) = q0 (cos σt + σ⁻¹ sin σt · w0)² has initial velocity 2·w0
    and constant speed ‖★q‖ = 2σ, σ = sqrt(E_q0[w0²]).
    """

    q0: np.ndarray
    w0: np.ndarray

    def __post_init__(self):
        q0 = _vec(self.q0)
        if np.any(q0 <= 0):
            raise DomainError("q0 must be positive")
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "w0", center(q0, self.w0))

    @classmethod
    def from_velocity(cls, q0, v0) -> "GeodesicParams":
        """Parameters of the geodesic leaving q0 with velocity ★q(0) = v0."""
        return cls(q0, 0.5 * _vec(v0))

    @property
    def sigma(self) -> float:
        return float(np.sqrt(expectation(self.q0, self.w0**2)))

    def acceleration_constant(self) -> float:
        """q̈/q - ½★q² along the curve; equals -2σ²."""
        return -2.0 * self.sigma**2

    def first_boundary_time(self) -> float:
        """Earliest t > 0 at which some component of q(t) vanishes (inf if none)."""
        s = self.sigma
        if s == 0:
            return np.inf
        # cos σt + σ⁻¹ sin σt w = 0  <=>  (cos σt, sin σt) ∝ (-w, σ)
        return float(np.min(np.arctan2(s, -self.w0)) / s)


def _g(params: GeodesicParams, t):
    s, w = params.sigma, params.w0
    st = s * t
    g = np.cos(st) + t * np.sinc(st / np.pi) * w
    gd = -s * np.sin(st) + np.cos(st) * w
    return g, gd


def sphere_geodesic(params: GeodesicParams, t: float) -> CurveJet2:
    g, gd = _g(params, t)
    q0, s = params.q0, params.sigma
    q = q0 * g**2
    # past the first touch q0·g² is positive again but no longer a solution
    if np.any(q <= 0) or t >= params.first_boundary_time():
        raise DomainError(f"geodesic has reached the boundary by t = {t}")
    return CurveJet2(q, 2 * q0 * g * gd, 2 * q0 * (gd**2 - s**2 * g**2))


def to_sphere(q) -> np.ndarray:
    """Unit vector sqrt(q/n) on the positive orthant of the sphere."""
    q = _vec(q)
    return np.sqrt(q / q.size)


def from_sphere(alpha) -> np.ndarray:
    alpha = _vec(alpha)
    return alpha.size * alpha**2


def tangent_to_sphere(q, w) -> np.ndarray:
    """Fiber vector at q mapped to a tangent vector of the sphere at sqrt(q/n)."""
    return to_sphere(q) * _vec(w)


def tangent_from_sphere(q, beta) -> np.ndarray:
    return _vec(beta) / to_sphere(q)


def entropy_flow_closed_form(q0, t: float) -> np.ndarray:
    """q(t) ∝ q0^{e^{-t}}, normalized to mass n."""
    x = np.exp(-t) * np.log(_vec(q0))
    e = np.exp(x - x.max())
    return e * (e.size / e.sum())


def exp_family_geodesic(p, u, t: float) -> CurveJet2:
    """Jet of the exponential curve q(t) = e_p(t u)."""
    p, u = _vec(p), center(p, u)
    q = patch_e(p, t * u)
    v = center(q, u)
    return CurveJet2(q, q * v, q * (v**2 - expectation(q, v**2)))


# -- finite-difference references for the cumulant derivatives ---------------

def _K(p, u):
    return log_normalizer(p, u)


def fd_dK(p, u, h, eps: float = 1e-5) -> float:
    u, h = _vec(u), _vec(h)
    return (_K(p, u + eps * h) - _K(p, u - eps * h)) / (2 * eps)


def fd_d2K(p, u, h1, h2, eps: float = 1e-4) -> float:
    u, h1, h2 = _vec(u), _vec(h1), _vec(h2)
    s = 0.0
    for s1 in (1, -1):
        for s2 in (1, -1):
            s += s1 * s2 * _K(p, u + eps * (s1 * h1 + s2 * h2))
    return s / (4 * eps**2)


def fd_d3K(p, u, h1, h2, h3, eps: float = 1e-3) -> float:
    u, h1, h2, h3 = map(_vec, (u, h1, h2, h3))
    s = 0.0
    for s1 in (1, -1):
        for s2 in (1, -1):
            for s3 in (1, -1):
                s += s1 * s2 * s3 * _K(p, u + eps * (s1 * h1 + s2 * h2 + s3 * h3))
    return s / (8 * eps**3)


def sample_covariance(p, h1, h2) -> float:
    """Cov_p(h1, h2) by direct summation over the sample space."""
    p, h1, h2 = map(_vec, (p, h1, h2))
    n = p.size
    m1 = sum(p[i] * h1[i] for i in range(n)) / n
    m2 = sum(p[i] * h2[i] for i in range(n)) / n
    return sum(p[i] * (h1[i] - m1) * (h2[i] - m2) for i in range(n)) / n

