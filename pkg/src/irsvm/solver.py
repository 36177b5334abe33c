"""Reweighted singular value solvers with nonmonotone backtracking.

Each outer iteration derives weights from the current singular values,
solves one weighted prox subproblem (doubling the step constant L until the
nonmonotone descent test passes), and stops when the spectral stationarity
residual drops below ``eps_bar``.  Three variants share the loop:

* ``irsvm1``: shifted weights with a per-iteration vanishing eps schedule;
* ``irsvm2``: capped weights with one fixed smoothing level;
* ``nuclear``: constant weights (plain proximal gradient on the nuclear-norm
  objective), used as a convex baseline.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .objectives import SmoothObjective, schatten_term_from_sigma
from .smoothing import (
    EmptyEpsilonSetError,
    GeometricEpsilonSchedule,
    SmoothingParams,
    capped_penalty,
    capped_weights,
    epsilon_supremum,
    shifted_penalty,
    shifted_weights,
)
from .spectral import SvdFactors, rank_estimate, singular_values, weighted_sv_prox

__all__ = [
    "VARIANTS",
    "SolverConfig",
    "IterationRecord",
    "SolveTrace",
    "IterateState",
    "bb_init",
    "inner_step",
    "accept_test",
    "stationarity_residual",
    "solve",
    "continuation_solve",
    "nuclear_pg_solve",
    "continuation_lambdas",
]

VARIANTS = ("irsvm1", "irsvm2", "nuclear")

_MAX_BACKTRACKS = 100
_MIN_EPS_BRACKET = 1e-250


@dataclass(frozen=True)
class SolverConfig:
    """Algorithmic constants; defaults follow the matrix-completion protocol."""

    variant: str = "irsvm1"
    p: float = 0.5
    lam: float = 1e-6
    l_min: float = 1e-2
    l_max: float = 1.0
    l0_init: float = 1.0
    tau: float = 2.0
    c: float = 1e-4
    window: int = 10
    eps_bar: float = 1e-3
    max_outer: int = 5000
    eps_tol: float = 1e-6

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not 0.0 < self.l_min < self.l_max:
            raise ValueError("need 0 < l_min < l_max")
        if not self.tau > 1.0:
            raise ValueError(f"tau must exceed 1, got {self.tau}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.window < 0:
            raise ValueError("window must be nonnegative")
        if not self.eps_bar > 0:
            raise ValueError("eps_bar must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if not self.eps_tol > 0:
            raise ValueError("eps_tol must be positive")


@dataclass
class IterationRecord:
    k: int
    f_value: float
    objective: float
    surrogate: float
    l_bar: float
    backtracks: int
    residual: float
    rank: int
    elapsed: float


@dataclass
class SolveTrace:
    """Per-iteration diagnostics of one solve run.

    ``mhat`` is the variant-specific certificate level bounding the composite
    objective along the run (initial shifted surrogate for irsvm1, initial
    objective plus the smoothing level for irsvm2, absent for nuclear).
    """

    variant: str
    lam: float
    p: float
    converged: bool
    mhat: Optional[float]
    eps_level: Optional[float]
    final_sigma: np.ndarray
    seconds: float
    rows: list[IterationRecord] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.rows)

    def json_lines(self):
        """One JSON document per iteration record."""
        for row in self.rows:
            yield json.dumps(asdict(row))


@dataclass
class IterateState:
    """Mutable loop state: current iterate, its gradient and singular values,
    and the window of recently accepted surrogate values."""

    x: np.ndarray
    grad: np.ndarray
    sigma: np.ndarray
    history: deque
    k: int = 0
    l_bar_prev: Optional[float] = None
    eps_state: object = None


def bb_init(dx: np.ndarray, dg: np.ndarray, l_min: float, l_max: float) -> float:
    """Barzilai-Borwein curvature estimate clamped to [l_min, l_max];
    falls back to l_max for a zero step."""
    denom = float(np.vdot(dx, dx))
    if denom <= 0.0 or not np.isfinite(denom):
        return float(l_max)
    ratio = float(np.vdot(dx, dg)) / denom
    if not np.isfinite(ratio):
        return float(l_max)
    return float(min(l_max, max(l_min, ratio)))


def inner_step(
    obj: SmoothObjective,
    state: IterateState,
    l_k: float,
    weights: np.ndarray,
    lam: float,
    p: float,
) -> tuple[np.ndarray, SvdFactors, np.ndarray]:
    """One prox step from the current iterate: the raw weights are scaled by
    ``lam * p`` to form the prox weight vector."""
    prox_w = lam * p * np.asarray(weights, dtype=float)
    return weighted_sv_prox(state.x, state.grad, l_k, prox_w)


def accept_test(surrogate_next: float, history, c: float, dx_normsq: float) -> bool:
    """Nonmonotone descent: the trial surrogate must not exceed the window
    max minus ``(c/2) ||dX||_F^2``.  Non-finite trials are rejected."""
    if len(history) == 0:
        raise ValueError("surrogate history must be nonempty")
    return bool(surrogate_next <= max(history) - 0.5 * c * dx_normsq)


def stationarity_residual(
    grad: np.ndarray, z_factors: SvdFactors, sigma_x: np.ndarray, lam: float, p: float
) -> float:
    """Max-norm spectral stationarity residual at the current iterate.

    Uses the singular vectors of the accepted shifted point Z and the current
    iterate's singular values (zero entries contribute nothing: rows and
    columns are scaled by ``sigma^(1/2)`` and the diagonal by ``sigma^p``).
    """
    sigma_x = np.asarray(sigma_x, dtype=float)
    l = z_factors.sigma.size
    if sigma_x.shape != (l,):
        raise ValueError(f"sigma vector must have length {l}, got shape {sigma_x.shape}")
    pos = sigma_x > 0
    if not pos.any():
        return 0.0
    root = np.sqrt(sigma_x[pos])
    core = z_factors.U[:, pos].T @ grad @ z_factors.V[:, pos]
    core *= np.outer(root, root)
    core[np.diag_indices_from(core)] += lam * p * sigma_x[pos] ** p
    return float(np.abs(core).max())


def _pick_smoothing_level(
    f_total0: float, lam: float, p: float, l_f: float, f_lower: float, l: int, tol: float
) -> float:
    # Late continuation stages push the admissible set far below any fixed
    # bracket floor, so shrink the floor until the bisection succeeds.
    while True:
        try:
            return epsilon_supremum(f_total0, lam, p, l_f, f_lower, l, tol)
        except EmptyEpsilonSetError:
            if tol <= _MIN_EPS_BRACKET:
                raise
            tol = max(tol * 1e-6, _MIN_EPS_BRACKET)


def solve(obj: SmoothObjective, x0, config: SolverConfig) -> tuple[np.ndarray, SolveTrace]:
    """Run the configured variant from ``x0`` until the stationarity residual
    (relative iterate change for ``nuclear``) drops below ``eps_bar`` or
    ``max_outer`` iterations pass.

    Returns the last accepted iterate and the full trace; hitting the
    iteration cap sets ``trace.converged = False`` instead of raising.
    """
    x = np.array(x0, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"X0 must be a 2-d array, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("X0 must be finite")
    lam, p, variant = config.lam, config.p, config.variant
    l = min(x.shape)
    t0 = time.perf_counter()

    grad = np.asarray(obj.gradient(x), dtype=float)
    sigma = singular_values(x)
    f0 = obj.value(x)

    schedule = None
    params = None
    eps_level = None
    if variant == "irsvm1":
        schedule = GeometricEpsilonSchedule(l)
        surrogate0 = f0 + lam * shifted_penalty(sigma, schedule.at(0), p)
        mhat = surrogate0
        eps_state: object = schedule
    elif variant == "irsvm2":
        f_total0 = f0 + schatten_term_from_sigma(sigma, p, lam)
        eps_level = _pick_smoothing_level(
            f_total0, lam, p, obj.lipschitz_bound(), obj.lower_bound(), l, config.eps_tol
        )
        params = SmoothingParams.from_eps(eps_level, lam, p, l)
        surrogate0 = f0 + lam * capped_penalty(sigma, params)
        mhat = f_total0 + eps_level
        eps_state = params
    else:
        surrogate0 = f0 + lam * float(sigma.sum())
        mhat = None
        eps_state = None
    if not np.isfinite(surrogate0):
        raise RuntimeError("non-finite objective at the starting point")

    state = IterateState(
        x=x,
        grad=grad,
        sigma=sigma,
        history=deque([surrogate0], maxlen=config.window + 1),
        eps_state=eps_state,
    )
    l_trial0 = min(max(config.l0_init, config.l_min), config.l_max)
    rows: list[IterationRecord] = []
    converged = False

    for k in range(config.max_outer):
        if variant == "irsvm1":
            weights = shifted_weights(state.sigma, schedule.at(k), p)
            eps_next = schedule.at(k + 1)
        elif variant == "irsvm2":
            weights = capped_weights(state.sigma, params)
        else:
            weights = np.ones(l)

        l_k = l_trial0
        backtracks = 0
        while True:
            if variant == "nuclear":
                x_next, zf, sv_aligned = weighted_sv_prox(state.x, state.grad, l_k, lam * weights)
            else:
                x_next, zf, sv_aligned = inner_step(obj, state, l_k, weights, lam, p)
            f_next = obj.value(x_next)
            if variant == "irsvm2":
                # nondecreasing weights keep the shrunk values sorted, so they
                # are exactly the singular values of the new iterate
                assert np.all(np.diff(sv_aligned) <= 0.0)
                sigma_next = sv_aligned
            else:
                sigma_next = np.sort(sv_aligned)[::-1]
            if variant == "irsvm1":
                surrogate_next = f_next + lam * shifted_penalty(sigma_next, eps_next, p)
            elif variant == "irsvm2":
                surrogate_next = f_next + lam * capped_penalty(sigma_next, params)
            else:
                surrogate_next = f_next + lam * float(sigma_next.sum())
            dx = x_next - state.x
            dx_normsq = float(np.vdot(dx, dx))
            if accept_test(surrogate_next, state.history, config.c, dx_normsq):
                break
            backtracks += 1
            if backtracks > _MAX_BACKTRACKS:
                raise RuntimeError(
                    "descent test kept failing while L grew; objective is likely non-finite"
                )
            l_k *= config.tau

        if variant == "nuclear":
            residual = np.sqrt(dx_normsq) / max(1.0, float(np.linalg.norm(state.x)))
        else:
            residual = stationarity_residual(state.grad, zf, state.sigma, lam, p)
        objective_next = f_next + schatten_term_from_sigma(sigma_next, p, lam)
        rows.append(
            IterationRecord(
                k=k,
                f_value=f_next,
                objective=objective_next,
                surrogate=surrogate_next,
                l_bar=l_k,
                backtracks=backtracks,
                residual=float(residual),
                rank=rank_estimate(sigma_next),
                elapsed=time.perf_counter() - t0,
            )
        )
        state.history.append(surrogate_next)
        state.l_bar_prev = l_k
        converged = residual <= config.eps_bar
        if converged or k + 1 == config.max_outer:
            state.x, state.sigma, state.k = x_next, sigma_next, k + 1
            break
        grad_next = np.asarray(obj.gradient(x_next), dtype=float)
        l_trial0 = bb_init(dx, grad_next - state.grad, config.l_min, config.l_max)
        state.x, state.grad, state.sigma, state.k = x_next, grad_next, sigma_next, k + 1

    trace = SolveTrace(
        variant=variant,
        lam=lam,
        p=p,
        converged=converged,
        mhat=mhat,
        eps_level=eps_level,
        final_sigma=state.sigma.copy(),
        seconds=time.perf_counter() - t0,
        rows=rows,
    )
    return state.x, trace


def continuation_lambdas(lambda0: float, lambda_target: float, decay: float, floor: float):
    """Stage sequence: start at lambda0, multiply by decay (never below the
    floor) until the target is reached."""
    if not 0.0 < decay < 1.0:
        raise ValueError(f"decay must lie in (0, 1), got {decay}")
    if not floor > 0:
        raise ValueError("floor must be positive")
    if not lambda0 >= lambda_target >= floor:
        raise ValueError("need lambda0 >= lambda_target >= floor")
    lams = [float(lambda0)]
    lam = float(lambda0)
    # absorb float drift so 10 * 0.1^k lands exactly on the target
    while lam > lambda_target * (1.0 + 1e-12):
        lam = max(decay * lam, floor)
        if lam <= lambda_target * (1.0 + 1e-12):
            lam = float(lambda_target)
        lams.append(lam)
    return lams


def continuation_solve(
    obj: SmoothObjective,
    x0,
    config: SolverConfig,
    lambda0: float = 10.0,
    lambda_target: Optional[float] = None,
    decay: float = 0.1,
    floor: float = 1e-6,
) -> tuple[np.ndarray, list[SolveTrace]]:
    """Solve a descending-lambda sequence, warm-starting every stage with the
    previous solution.  Returns the final iterate and the per-stage traces."""
    if lambda_target is None:
        lambda_target = config.lam
    x = np.array(x0, dtype=float)
    traces: list[SolveTrace] = []
    for lam in continuation_lambdas(lambda0, lambda_target, decay, floor):
        x, trace = solve(obj, x, replace(config, lam=lam))
        traces.append(trace)
    return x, traces


def nuclear_pg_solve(obj: SmoothObjective, x0, config: SolverConfig):
    """Proximal gradient on the nuclear-norm objective: the same loop with
    constant unit weights and prox weight lambda."""
    return solve(obj, x0, replace(config, variant="nuclear"))
