"""Smoothing surrogates and singular value weight rules.

Two smoothing families drive the two reweighted solvers:

* shifted: add a positive, iteration-wise vanishing vector ``eps`` inside the
  power penalty, giving weights ``(sigma_i + eps_i)^(p-1)``;
* capped: replace ``t^p`` by its partial minimization ``linearized_power``,
  giving weights ``min(cap, sigma_i^(p-1))`` with a fixed cap derived from a
  single smoothing level ``eps``.

Both surrogates dominate the true composite objective and make the
nonmonotone acceptance test well defined at zero singular values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objectives import SmoothObjective, _check_p
from .spectral import singular_values

__all__ = [
    "EmptyEpsilonSetError",
    "GeometricEpsilonSchedule",
    "SmoothingParams",
    "shifted_penalty",
    "shifted_surrogate",
    "shifted_weights",
    "linearized_power",
    "capped_penalty",
    "capped_surrogate",
    "capped_weights",
    "conjugate_exponent",
    "epsilon_supremum",
]

_EPS_FLOOR = np.finfo(float).tiny


class EmptyEpsilonSetError(ValueError):
    """No admissible smoothing level above the bracket floor; reduce lambda
    or improve the starting point."""


def conjugate_exponent(p: float) -> float:
    """The negative exponent ``q`` with ``1/p + 1/q = 1`` for ``p in (0,1)``."""
    _check_p(p)
    return p / (p - 1.0)


@dataclass(frozen=True)
class GeometricEpsilonSchedule:
    """Constant positive vector shrinking geometrically per outer iteration.

    ``at(k) = decay^k * ones(length)``, floored at the smallest positive
    float so the vector stays strictly positive for every k.
    """

    length: int
    decay: float = 0.5
    floor: float = _EPS_FLOOR

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("length must be at least 1")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")
        if not self.floor > 0:
            raise ValueError("floor must be positive")

    def at(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("iteration index must be nonnegative")
        return np.full(self.length, max(self.decay**k, self.floor))


@dataclass(frozen=True)
class SmoothingParams:
    """Fixed smoothing level ``eps`` with its derived weight cap ``u``."""

    eps: float
    p: float
    q: float
    u: float

    @classmethod
    def from_eps(cls, eps: float, lam: float, p: float, l: int) -> "SmoothingParams":
        _check_p(p)
        if not eps > 0:
            raise ValueError(f"eps must be positive, got {eps}")
        if not lam > 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        if l < 1:
            raise ValueError("l must be at least 1")
        q = conjugate_exponent(p)
        u = float((eps / (lam * l)) ** (1.0 / q))
        return cls(eps=float(eps), p=float(p), q=q, u=u)


def _check_eps_vec(eps_vec, l: int) -> np.ndarray:
    eps_vec = np.asarray(eps_vec, dtype=float)
    if eps_vec.shape != (l,):
        raise ValueError(f"eps vector must have length {l}, got shape {eps_vec.shape}")
    if np.any(eps_vec <= 0):
        raise ValueError("eps vector must be strictly positive")
    return eps_vec


def shifted_penalty(sigma, eps_vec, p: float) -> float:
    """``sum_i (sigma_i + eps_i)^p`` with sigma descending."""
    _check_p(p)
    sigma = np.asarray(sigma, dtype=float)
    eps_vec = _check_eps_vec(eps_vec, sigma.size)
    return float(np.sum((sigma + eps_vec) ** p))


def shifted_surrogate(obj: SmoothObjective, x, eps_vec, p: float, lam: float) -> float:
    """``f(X) + lam * sum_i (sigma_i(X) + eps_i)^p``; dominates the true
    objective and decreases as eps does."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return obj.value(x) + lam * shifted_penalty(singular_values(x), eps_vec, p)


def shifted_weights(sigma, eps_vec, p: float) -> np.ndarray:
    """Weights ``(sigma_i + eps_i)^(p-1)``; nondecreasing when eps is constant."""
    _check_p(p)
    sigma = np.asarray(sigma, dtype=float)
    eps_vec = _check_eps_vec(eps_vec, sigma.size)
    return (sigma + eps_vec) ** (p - 1.0)


def linearized_power(t: float, u: float, p: float, q: float | None = None) -> float:
    """Partial minimization ``min_{0 <= s <= u} p (|t| s - s^q / q)``.

    Closed form: ``|t|^p`` when ``|t| >= u^(q-1)``, otherwise the boundary
    value ``p (|t| u - u^q / q)``, which is affine in ``|t|``.  Certified
    against a grid oracle in the test suite.
    """
    _check_p(p)
    if not u > 0:
        raise ValueError(f"u must be positive, got {u}")
    if q is None:
        q = conjugate_exponent(p)
    at = abs(t)
    if at >= u ** (q - 1.0):
        return float(at**p)
    return float(p * (at * u - u**q / q))


def capped_penalty(sigma, params: SmoothingParams) -> float:
    """``sum_i linearized_power(sigma_i, u)`` evaluated vectorized."""
    sigma = np.abs(np.asarray(sigma, dtype=float))
    u, p, q = params.u, params.p, params.q
    thresh = u ** (q - 1.0)
    vals = np.where(sigma >= thresh, sigma**p, p * (sigma * u - u**q / q))
    return float(np.sum(vals))


def capped_surrogate(obj: SmoothObjective, x, params: SmoothingParams, lam: float) -> float:
    """``f(X) + lam * sum_i linearized_power(sigma_i(X), u)``.

    Sandwiched between the true objective and the true objective plus
    ``params.eps`` when ``params`` was built with this lam and l.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return obj.value(x) + lam * capped_penalty(singular_values(x), params)


def capped_weights(sigma, params: SmoothingParams) -> np.ndarray:
    """Weights ``min(u, sigma_i^(p-1))``; zero sigma takes the cap (the
    uncapped value would be infinite), so the output is nondecreasing."""
    sigma = np.asarray(sigma, dtype=float)
    w = np.full(sigma.shape, params.u)
    pos = sigma > 0
    w[pos] = np.minimum(params.u, sigma[pos] ** (params.p - 1.0))
    return w


def epsilon_supremum(
    f_x0: float,
    lam: float,
    p: float,
    l_f: float,
    f_lower: float,
    l: int,
    tol: float = 1e-6,
) -> float:
    """Largest admissible smoothing level for the capped solver, within tol.

    The admissible set is ``{eps > 0 : eps < l*lam*[sqrt(2*L_f*(F0 + eps -
    f_lower)) / (lam*p)]^q}``; its indicator gap ``g(eps) = rhs(eps) - eps``
    is strictly decreasing, so bisection on ``[tol, hi]`` (hi doubled until
    ``g(hi) < 0``) brackets the unique root.  The returned value is a strict
    member of the set at distance at most tol below the supremum.

    Raises EmptyEpsilonSetError when ``g(tol) <= 0``, i.e. the whole set sits
    below the bracket floor.
    """
    _check_p(p)
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not l_f > 0:
        raise ValueError(f"L_f must be positive, got {l_f}")
    if l < 1:
        raise ValueError("l must be at least 1")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if f_x0 < f_lower:
        raise ValueError("F(X0) must be at least the lower bound of f")
    q = conjugate_exponent(p)

    def gap(eps: float) -> float:
        rhs = l * lam * (np.sqrt(2.0 * l_f * (f_x0 + eps - f_lower)) / (lam * p)) ** q
        return rhs - eps

    lo = tol
    if gap(lo) <= 0:
        raise EmptyEpsilonSetError(
            f"no admissible smoothing level above {tol}; reduce lambda or improve X0"
        )
    hi = max(1.0, 2.0 * lo)
    for _ in range(200):
        if gap(hi) < 0:
            break
        hi *= 2.0
    else:  # pragma: no cover - gap is eventually negative by monotonicity
        raise RuntimeError("failed to bracket the smoothing-level root")
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo
