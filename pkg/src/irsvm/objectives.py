"""Smooth data-fit objectives and the composite Schatten-p objective.

A smooth objective provides ``value``, ``gradient``, ``lipschitz_bound`` and
``lower_bound``.  Two concrete instances live here: masked least squares for
matrix completion, and an objective depending only on the diagonal (used to
cross-check matrix stationarity against its vector counterpart).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from .spectral import positive_mask, singular_values

__all__ = [
    "SmoothObjective",
    "CompletionProblem",
    "DiagonalObjective",
    "schatten_term",
    "total_objective",
    "schatten_term_from_sigma",
]


@runtime_checkable
class SmoothObjective(Protocol):
    """Contract for the smooth part ``f`` of the composite objective."""

    def value(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    def lipschitz_bound(self) -> float: ...

    def lower_bound(self) -> float: ...


@dataclass(frozen=True)
class CompletionProblem:
    """Masked least squares ``f(X) = sum_{(i,j) in Omega} (X_ij - M_ij)^2``.

    Observations are coordinate triplets (0-based row/col indices plus the
    observed value); the gradient is ``2 P_Omega(X - M)`` and vanishes off
    the mask.  The gradient is 2-Lipschitz and ``f >= 0``.
    """

    rows: int
    cols: int
    row_idx: np.ndarray
    col_idx: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix dimensions must be positive")
        ri = np.asarray(self.row_idx, dtype=np.intp)
        ci = np.asarray(self.col_idx, dtype=np.intp)
        vals = np.asarray(self.observed, dtype=float)
        if not (ri.shape == ci.shape == vals.shape) or ri.ndim != 1:
            raise ValueError("row_idx, col_idx and observed must be equal-length 1-d arrays")
        if ri.size:
            if ri.min() < 0 or ri.max() >= self.rows:
                raise ValueError("row index out of bounds")
            if ci.min() < 0 or ci.max() >= self.cols:
                raise ValueError("column index out of bounds")
            flat = ri * self.cols + ci
            if np.unique(flat).size != flat.size:
                raise ValueError("duplicate observation indices")
        if not np.isfinite(vals).all():
            raise ValueError("observed values must be finite")
        object.__setattr__(self, "row_idx", ri)
        object.__setattr__(self, "col_idx", ci)
        object.__setattr__(self, "observed", vals)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def n_observed(self) -> int:
        return int(self.row_idx.size)

    def _check_shape(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {x.shape}")
        return x

    def value(self, x) -> float:
        x = self._check_shape(x)
        d = x[self.row_idx, self.col_idx] - self.observed
        return float(d @ d)

    def gradient(self, x) -> np.ndarray:
        x = self._check_shape(x)
        g = np.zeros(self.shape)
        g[self.row_idx, self.col_idx] = 2.0 * (x[self.row_idx, self.col_idx] - self.observed)
        return g

    def lipschitz_bound(self) -> float:
        return 2.0

    def lower_bound(self) -> float:
        return 0.0

    def masked_matrix(self) -> np.ndarray:
        """Dense ``P_Omega(M)``: observed values on the mask, zeros elsewhere."""
        m = np.zeros(self.shape)
        m[self.row_idx, self.col_idx] = self.observed
        return m


@dataclass(frozen=True)
class DiagonalObjective:
    """Objective ``f(X) = h(diag(X))`` on square matrices.

    ``h`` maps an l-vector to a scalar and ``h_grad`` is its gradient; the
    matrix gradient is then ``Diag(h_grad(diag(X)))``.
    """

    dim: int
    h: Callable[[np.ndarray], float]
    h_grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float = 2.0
    lower: float = 0.0

    def _check_shape(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim, self.dim):
            raise ValueError(f"expected shape {(self.dim, self.dim)}, got {x.shape}")
        return x

    def value(self, x) -> float:
        x = self._check_shape(x)
        return float(self.h(np.diag(x).copy()))

    def gradient(self, x) -> np.ndarray:
        x = self._check_shape(x)
        return np.diag(np.asarray(self.h_grad(np.diag(x).copy()), dtype=float))

    def lipschitz_bound(self) -> float:
        return self.lipschitz

    def lower_bound(self) -> float:
        return self.lower


def _check_p(p: float):
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")


def schatten_term_from_sigma(sigma: np.ndarray, p: float, lam: float) -> float:
    """``lam * sum sigma_i^p`` over singular values above the zero threshold."""
    _check_p(p)
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    sigma = np.asarray(sigma, dtype=float)
    keep = sigma[positive_mask(sigma)]
    return float(lam * np.sum(keep**p))


def schatten_term(x, p: float, lam: float) -> float:
    """Schatten-p penalty ``lam * ||X||_p^p`` (numerically zero sigmas skipped)."""
    return schatten_term_from_sigma(singular_values(x), p, lam)


def total_objective(obj: SmoothObjective, x, p: float, lam: float) -> float:
    """Composite objective ``f(X) + lam * ||X||_p^p``."""
    return obj.value(x) + schatten_term(x, p, lam)
