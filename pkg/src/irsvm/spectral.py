"""Thin SVD and the weighted singular value proximal operator.

Every outer iteration of the reweighted solvers reduces to one call of
``weighted_sv_prox``: shrink the singular values of ``B - C/L`` by per-index
weights and rebuild the matrix from the same singular vectors.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

__all__ = [
    "DecompositionError",
    "SvdFactors",
    "thin_svd",
    "weighted_sv_prox",
    "prox_objective",
    "singular_values",
    "positive_mask",
    "rank_estimate",
    "ZERO_SIGMA_RTOL",
]

# sigma_i counts as numerically zero when sigma_i <= ZERO_SIGMA_RTOL * max(sigma_1, 1)
ZERO_SIGMA_RTOL = 1e-8


class DecompositionError(RuntimeError):
    """SVD could not be computed (non-finite input or LAPACK failure)."""


class SvdFactors(NamedTuple):
    """Thin SVD triple: ``A = U @ diag(sigma) @ V.T`` with sigma descending."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


def _as_matrix(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-d array, got shape {a.shape}")
    return a


def thin_svd(a) -> SvdFactors:
    """Full thin SVD with all ``min(m, n)`` triplets, sigma sorted descending.

    Raises DecompositionError on non-finite input or if both LAPACK drivers
    fail to converge.
    """
    a = _as_matrix(a)
    if not np.isfinite(a).all():
        raise DecompositionError("cannot decompose a matrix with non-finite entries")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but sturdier
        try:
            u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
        except Exception as exc:  # pragma: no cover - platform dependent
            raise DecompositionError(f"SVD failed: {exc}") from exc
    return SvdFactors(u, s, vt.T)


def singular_values(a) -> np.ndarray:
    """Singular values only, descending."""
    a = _as_matrix(a)
    if not np.isfinite(a).all():
        raise DecompositionError("cannot decompose a matrix with non-finite entries")
    return np.linalg.svd(a, compute_uv=False)


def positive_mask(sigma: np.ndarray) -> np.ndarray:
    """Boolean mask of singular values above the numerical-zero threshold."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0:
        return np.zeros(0, dtype=bool)
    return sigma > ZERO_SIGMA_RTOL * max(float(sigma.max()), 1.0)


def rank_estimate(sigma: np.ndarray) -> int:
    return int(np.count_nonzero(positive_mask(sigma)))


def _check_prox_args(b, c, L: float, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    b = _as_matrix(b, "B")
    c = _as_matrix(c, "C")
    if b.shape != c.shape:
        raise ValueError(f"shape mismatch: B is {b.shape}, C is {c.shape}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    s = np.asarray(s, dtype=float)
    l = min(b.shape)
    if s.shape != (l,):
        raise ValueError(f"weight vector must have length {l}, got shape {s.shape}")
    if np.any(s < 0):
        raise ValueError("weights must be nonnegative")
    return b, c, s


def weighted_sv_prox(b, c, L: float, s) -> tuple[np.ndarray, SvdFactors, np.ndarray]:
    """Minimize ``<C, X-B> + (L/2)||X-B||_F^2 + sum_i s_i sigma_i(X)``.

    Returns ``(X_star, z_factors, x_star)`` where ``z_factors`` is the thin
    SVD of ``Z = B - C/L`` and ``x_star = max(sigma(Z) - s/L, 0)``.

    ``x_star`` is aligned with the columns of ``z_factors`` and is descending
    only when ``s`` is nondecreasing; with other weight orders the shrunk
    values may come out unsorted, so ``sigma_i(X_star)`` need not equal
    ``x_star[i]``.
    """
    b, c, s = _check_prox_args(b, c, L, s)
    zf = thin_svd(b - c / L)
    x_star = np.maximum(zf.sigma - s / L, 0.0)
    X_star = (zf.U * x_star) @ zf.V.T
    return X_star, zf, x_star


def prox_objective(x, b, c, L: float, s) -> float:
    """The prox subproblem objective at ``x``, weights paired with descending
    singular values."""
    b, c, s = _check_prox_args(b, c, L, s)
    x = _as_matrix(x, "X")
    if x.shape != b.shape:
        raise ValueError(f"shape mismatch: X is {x.shape}, B is {b.shape}")
    diff = x - b
    sigma = singular_values(x)
    return float(np.vdot(c, diff) + 0.5 * L * np.vdot(diff, diff) + s @ sigma)
