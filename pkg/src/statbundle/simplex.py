"""Densities, fibers, pairing, transports and charts on the open simplex.

Densities are stored relative to the uniform measure on ``n`` points, so a
density ``q`` satisfies ``q > 0`` and ``sum(q) == n``.  Expectations are
``E_q[f] = mean(f * q)``.  Every operation here is a pure function of numpy
arrays; the small value classes at the top validate inputs at API boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

POSITIVITY_FLOOR = 1e-300
MASS_TOL = 1e-9
CENTERING_TOL = 1e-9
EXP_BOUND = 500.0


class DomainError(ValueError):
    """An input lies outside the domain of the requested operation."""


class CenteringError(DomainError):
    """A fiber vector is not centered at its base density."""


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class SampleSpace:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"sample space needs n >= 2 points, got {self.n}")

    def uniform(self) -> "Density":
        return Density(np.ones(self.n))


@dataclass(frozen=True, eq=False)
class Density:
    """Strictly positive density w.r.t. the uniform probability."""

    values: np.ndarray

    def __post_init__(self):
        v = _vec(self.values).copy()
        if v.ndim != 1 or v.size < 2:
            raise DomainError("density must be a 1-d vector with at least 2 entries")
        if not np.all(np.isfinite(v)):
            raise DomainError("density has non-finite entries")
        if np.any(v < POSITIVITY_FLOOR):
            raise DomainError(f"density has entries below {POSITIVITY_FLOOR:g}")
        if abs(v.mean() - 1.0) > MASS_TOL:
            raise DomainError(f"density mean is {v.mean():.17g}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_probabilities(cls, probs) -> "Density":
        p = _vec(probs)
        return cls(p * p.size / p.sum())

    @property
    def n(self) -> int:
        return self.values.size

    def probabilities(self) -> np.ndarray:
        return self.values / self.n

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, Density) and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FiberVector:
    """Random variable centered at ``base``.

    Off-center input is re-centered when ``|E_base[v]| <= CENTERING_TOL`` and
    rejected otherwise.
    """

    values: np.ndarray
    base: Density

    def __post_init__(self):
        v = _vec(self.values)
        if v.shape != self.base.values.shape:
            raise DomainError("fiber vector and base density differ in dimension")
        m = expectation(self.base.values, v)
        if abs(m) > CENTERING_TOL:
            raise CenteringError(f"E_q[v] = {m:.3e} exceeds centering tolerance")
        v = v - m
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class BundleState:
    q: Density
    fiber: FiberVector
    fiber_kind: Literal["exponential", "mixture"] = "exponential"

    def __post_init__(self):
        if self.fiber.base != self.q:
            raise DomainError("fiber is not based at q")
        if self.fiber_kind not in ("exponential", "mixture"):
            raise DomainError(f"unknown fiber kind {self.fiber_kind!r}")


@dataclass(frozen=True, eq=False)
class ThetaCoordinates:
    """The first n-1 probabilities of a point of the open simplex."""

    theta: np.ndarray = field()

    def __post_init__(self):
        th = _vec(self.theta)
        if th.ndim != 1 or th.size < 1:
            raise DomainError("theta must be a non-empty 1-d vector")
        if np.any(th <= 0) or th.sum() >= 1:
            raise DomainError("theta must be positive with sum < 1")
        object.__setattr__(self, "theta", th)

    def to_density(self) -> np.ndarray:
        probs = np.append(self.theta, 1.0 - self.theta.sum())
        return probs * probs.size


def expectation(q, f) -> float:
    """E_q[f] = (1/n) sum_x f(x) q(x)."""
    q, f = _vec(q), _vec(f)
    if q.shape != f.shape:
        raise DomainError(f"dimension mismatch: {q.shape} vs {f.shape}")
    return float(np.mean(q * f))


def center(q, f) -> np.ndarray:
    """f - E_q[f]."""
    f = _vec(f)
    return f - expectation(q, f)


def pairing(q, eta, v) -> float:
    """Duality pairing <eta, v>_q = E_q[eta v]."""
    for x in (eta, v):
        if isinstance(x, FiberVector) and not np.array_equal(x.base.values, _vec(q)):
            raise DomainError("fiber base mismatch in pairing")
    return expectation(q, _vec(eta) * _vec(v))


def e_transport(p, q, v) -> np.ndarray:
    """Exponential transport from the fiber at p to the fiber at q."""
    return center(q, v)


def m_transport(p, q, eta) -> np.ndarray:
    """Mixture transport from the fiber at p to the fiber at q."""
    return _vec(p) / _vec(q) * _vec(eta)


def _check_exp_bound(u, bound: float):
    top = np.max(np.abs(u))
    if not np.isfinite(top) or top > bound:
        raise DomainError(f"max|u| = {top:.3g} exceeds exp-overflow bound {bound:g}")


def log_normalizer(p, u) -> float:
    """log E_p[exp(u)], shifted by max(u) before exponentiating."""
    p, u = _vec(p), _vec(u)
    m = np.max(u)
    return float(m + np.log(np.mean(p * np.exp(u - m))))


def patch_e(p, u, bound: float = EXP_BOUND) -> np.ndarray:
    """Exponential patch e_p(u) = exp(u - K_p(u)) p."""
    p, u = _vec(p), _vec(u)
    _check_exp_bound(u, bound)
    w = np.exp(u - np.max(u)) * p
    return w * (w.size / w.sum())


def chart_s(p, q) -> np.ndarray:
    """Exponential chart s_p(q) = log(q/p) - E_p[log(q/p)]."""
    return center(p, np.log(_vec(q) / _vec(p)))


def mixture_coordinate(p, q) -> np.ndarray:
    """Mixture chart q/p - 1 (centered at p automatically)."""
    return _vec(q) / _vec(p) - 1.0


def fisher_matrix(theta) -> np.ndarray:
    """Fisher information in the first n-1 probabilities, (diag θ - θθᵀ)⁻¹."""
    th = theta.theta if isinstance(theta, ThetaCoordinates) else ThetaCoordinates(theta).theta
    cov = np.diag(th) - np.outer(th, th)
    assert np.linalg.cond(cov) < 1e14, "singular diag(theta) - theta theta^T"
    return np.linalg.inv(cov)
