"""Cumulant functional K_p, its differentials, and the KL-type divergences."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simplex import (
    EXP_BOUND,
    DomainError,
    _check_exp_bound,
    _vec,
    center,
    expectation,
    log_normalizer,
    patch_e,
)


@dataclass(frozen=True)
class CumulantEval:
    value: float
    gradient_density: np.ndarray


def K(p, u, bound: float = EXP_BOUND) -> CumulantEval:
    """K_p(u) = log E_p[exp u], together with the moved density e_p(u)."""
    _check_exp_bound(_vec(u), bound)
    return CumulantEval(log_normalizer(p, u), patch_e(p, u, bound))


def dK(p, u, h) -> float:
    return expectation(patch_e(p, u), h)


def d2K(p, u, h1, h2) -> float:
    q = patch_e(p, u)
    return expectation(q, center(q, h1) * center(q, h2))


def d3K(p, u, h1, h2, h3) -> float:
    """Third cross-cumulant of the arguments under e_p(u)."""
    q = patch_e(p, u)
    return expectation(q, center(q, h1) * center(q, h2) * center(q, h3))


def kl(q, r) -> float:
    """D(q, r) = E_q[log q/r]."""
    q, r = _vec(q), _vec(r)
    return expectation(q, np.log(q / r))


def entropy(q) -> float:
    """H(q) = -E_q[log q]; zero at the uniform density, negative elsewhere."""
    q = _vec(q)
    return -expectation(q, np.log(q))


def _one_plus(eta, scale: float = 1.0) -> np.ndarray:
    x = 1.0 + _vec(eta) / scale
    if np.any(x <= 0):
        raise DomainError("momentum outside domain: some 1 + eta/c <= 0")
    return x


def dual_kl_of_momentum(q, eta) -> float:
    """E_q[(1+η) log(1+η)] = D((1+η)q, q)."""
    x = _one_plus(eta)
    return expectation(q, x * np.log(x))


def renyi_term(q, r, a: float) -> float:
    """a⁻¹ log E_q[(r/q)^a]."""
    if a <= 0:
        raise DomainError("renyi_term needs a > 0")
    q, r = _vec(q), _vec(r)
    return log_normalizer(q, a * np.log(r / q)) / a


def scaled_cumulant(q, w, a: float) -> float:
    """a⁻¹ K_q(a w); equals renyi_term(q, e_q(w), a) + kl(q, e_q(w))."""
    return log_normalizer(q, a * _vec(w)) / a

