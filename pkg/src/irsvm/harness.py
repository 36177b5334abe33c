"""Experiment harness: random instances, recovery metrics, file formats, sweeps.

File formats are plain text so runs can be reproduced and diffed anywhere:

* problem files: optional ``#`` comment lines, then a ``rows cols`` header
  line, then one ``i j value`` triplet per line (0-based indices);
* matrices: CSV, one row per matrix row, 17 significant digits so that a
  save/load round trip is exact.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .objectives import CompletionProblem
from .solver import SolveTrace, SolverConfig, continuation_solve
from .spectral import rank_estimate

__all__ = [
    "SUCCESS_REL_ERR",
    "SWEEP_FIELDS",
    "FileFormatError",
    "InstanceSpec",
    "RunReport",
    "gen_instance",
    "rel_err",
    "derive_seed",
    "run_recovery",
    "recovery_sweep",
    "write_sweep_csv",
    "write_trace_jsonl",
    "load_problem",
    "save_problem",
    "load_matrix",
    "save_matrix",
]

# a ground truth counts as recovered when rel_err drops below this
SUCCESS_REL_ERR = 1e-3

SWEEP_FIELDS = (
    "method",
    "m",
    "n",
    "sr",
    "r",
    "trials",
    "successes",
    "mean_rel_err",
    "mean_seconds",
)


class FileFormatError(ValueError):
    """Malformed problem or matrix file; the message carries the line number."""


@dataclass(frozen=True)
class InstanceSpec:
    """Random low-rank completion instance: size, target rank, sampling ratio."""

    m: int
    n: int
    r: int
    sr: float
    seed: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("matrix dimensions must be positive")
        if not 1 <= self.r <= min(self.m, self.n):
            raise ValueError(f"rank must lie in [1, {min(self.m, self.n)}], got {self.r}")
        if not 0.0 < self.sr <= 1.0:
            raise ValueError(f"sampling ratio must lie in (0, 1], got {self.sr}")


def gen_instance(spec: InstanceSpec) -> tuple[CompletionProblem, np.ndarray]:
    """Draw a rank-r product of standard Gaussian factors and observe a
    uniformly random subset of exactly ``round(sr * m * n)`` entries.

    Deterministic given the seed (PCG64 stream).
    """
    rng = np.random.default_rng(spec.seed)
    left = rng.standard_normal((spec.m, spec.r))
    right = rng.standard_normal((spec.n, spec.r))
    truth = left @ right.T
    n_obs = int(round(spec.sr * spec.m * spec.n))
    flat = rng.permutation(spec.m * spec.n)[:n_obs]
    ri, ci = np.divmod(flat, spec.n)
    problem = CompletionProblem(
        rows=spec.m, cols=spec.n, row_idx=ri, col_idx=ci, observed=truth[ri, ci]
    )
    return problem, truth


def rel_err(x_star, truth) -> float:
    """Frobenius relative error ``||X - M||_F / ||M||_F``."""
    x_star = np.asarray(x_star, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if x_star.shape != truth.shape:
        raise ValueError(f"shape mismatch: {x_star.shape} vs {truth.shape}")
    denom = float(np.linalg.norm(truth))
    if denom == 0.0:
        raise ValueError("ground truth is the zero matrix")
    return float(np.linalg.norm(x_star - truth)) / denom


def derive_seed(base_seed: int, r: int, trial: int) -> int:
    """Stable per-run seed from (base seed, rank, trial index)."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(r, trial))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class RunReport:
    """Outcome of one recovery run (continuation over all lambda stages)."""

    method: str
    rel_err: float
    success: bool
    seconds: float
    rank: int
    iterations: int
    converged: bool
    traces: list[SolveTrace] = field(default_factory=list)
    x_star: Optional[np.ndarray] = None


def run_recovery(
    problem: CompletionProblem,
    truth: np.ndarray,
    method: str,
    config: SolverConfig,
    lambda0: float = 10.0,
    decay: float = 0.1,
    floor: float = 1e-6,
    x0: Optional[np.ndarray] = None,
) -> RunReport:
    """Solve one instance with the given method and score it against the
    ground truth.  The default start is the masked observation matrix."""
    cfg = replace(config, variant=method)
    if x0 is None:
        x0 = problem.masked_matrix()
    t0 = time.perf_counter()
    x, traces = continuation_solve(problem, x0, cfg, lambda0=lambda0, decay=decay, floor=floor)
    seconds = time.perf_counter() - t0
    err = rel_err(x, truth)
    return RunReport(
        method=method,
        rel_err=err,
        success=err < SUCCESS_REL_ERR,
        seconds=seconds,
        rank=rank_estimate(traces[-1].final_sigma),
        iterations=sum(t.iterations for t in traces),
        converged=traces[-1].converged,
        traces=traces,
        x_star=x,
    )


def recovery_sweep(
    m: int,
    n: int,
    sr: float,
    rank_list: Sequence[int],
    trials: int,
    methods: Sequence[str],
    config: SolverConfig,
    base_seed: int = 0,
    lambda0: float = 10.0,
    decay: float = 0.1,
    floor: float = 1e-6,
) -> list[dict]:
    """Success-count sweep over (method, rank); one output row per pair.

    Seeds derive deterministically from (base_seed, rank, trial).  A run that
    raises is scored as a failure with infinite rel_err rather than aborting
    the sweep.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rows = []
    for method in methods:
        for r in rank_list:
            errs, secs, succ = [], [], 0
            for trial in range(trials):
                spec = InstanceSpec(m=m, n=n, r=r, sr=sr, seed=derive_seed(base_seed, r, trial))
                problem, truth = gen_instance(spec)
                t0 = time.perf_counter()
                try:
                    report = run_recovery(
                        problem, truth, method, config, lambda0=lambda0, decay=decay, floor=floor
                    )
                    errs.append(report.rel_err)
                    secs.append(report.seconds)
                    succ += int(report.success)
                except Exception:
                    errs.append(float("inf"))
                    secs.append(time.perf_counter() - t0)
            rows.append(
                {
                    "method": method,
                    "m": m,
                    "n": n,
                    "sr": sr,
                    "r": r,
                    "trials": trials,
                    "successes": succ,
                    "mean_rel_err": float(np.mean(errs)),
                    "mean_seconds": float(np.mean(secs)),
                }
            )
    return rows


def _open_for_write(path_or_file):
    if hasattr(path_or_file, "write"):
        return path_or_file, False
    return open(path_or_file, "w", newline=""), True


def write_sweep_csv(rows: Sequence[dict], path_or_file) -> None:
    """Fixed-schema CSV; the header and the field order never change."""
    fh, owns = _open_for_write(path_or_file)
    try:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_FIELDS)
        for row in rows:
            writer.writerow(
                [
                    row["method"],
                    row["m"],
                    row["n"],
                    repr(float(row["sr"])),
                    row["r"],
                    row["trials"],
                    row["successes"],
                    repr(float(row["mean_rel_err"])),
                    f"{float(row['mean_seconds']):.6f}",
                ]
            )
    finally:
        if owns:
            fh.close()


def write_trace_jsonl(traces: Sequence[SolveTrace], path_or_file) -> None:
    """All stage traces as JSON lines with a globally monotone iteration key."""
    import json
    from dataclasses import asdict

    fh, owns = _open_for_write(path_or_file)
    try:
        gk = 0
        for stage, trace in enumerate(traces):
            for row in trace.rows:
                record = {"k": gk, "stage": stage, "lam": trace.lam, "stage_k": row.k}
                record.update({key: val for key, val in asdict(row).items() if key != "k"})
                fh.write(json.dumps(record) + "\n")
                gk += 1
    finally:
        if owns:
            fh.close()


def _data_lines(path):
    """Yield (line_number, payload) with comments and blanks stripped."""
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            payload = raw.split("#", 1)[0].strip()
            if payload:
                yield lineno, payload


def load_problem(path) -> CompletionProblem:
    """Read a triplet problem file (header ``rows cols``, then ``i j value``
    lines)."""
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise FileFormatError(f"{path}: empty problem file") from None
    parts = header.split()
    if len(parts) != 2:
        raise FileFormatError(f"{path}:{lineno}: header must be 'rows cols', got {header!r}")
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise FileFormatError(f"{path}:{lineno}: header must hold two integers") from None
    if rows < 1 or cols < 1:
        raise FileFormatError(f"{path}:{lineno}: dimensions must be positive")
    ri, ci, vals, seen = [], [], [], set()
    for lineno, payload in lines:
        parts = payload.split()
        if len(parts) != 3:
            raise FileFormatError(f"{path}:{lineno}: expected 'i j value', got {payload!r}")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FileFormatError(f"{path}:{lineno}: could not parse 'i j value'") from None
        if not (0 <= i < rows and 0 <= j < cols):
            raise FileFormatError(
                f"{path}:{lineno}: index ({i}, {j}) outside a {rows}x{cols} matrix"
            )
        if (i, j) in seen:
            raise FileFormatError(f"{path}:{lineno}: duplicate index ({i}, {j})")
        seen.add((i, j))
        ri.append(i)
        ci.append(j)
        vals.append(v)
    return CompletionProblem(
        rows=rows,
        cols=cols,
        row_idx=np.array(ri, dtype=np.intp),
        col_idx=np.array(ci, dtype=np.intp),
        observed=np.array(vals, dtype=float),
    )


def save_problem(problem: CompletionProblem, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{problem.rows} {problem.cols}\n")
        for i, j, v in zip(problem.row_idx, problem.col_idx, problem.observed):
            fh.write(f"{i} {j} {v:.17g}\n")


def save_matrix(x, path) -> None:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {x.shape}")
    with open(path, "w") as fh:
        for row in x:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_matrix(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError:
                raise FileFormatError(f"{path}:{lineno}: could not parse row") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise FileFormatError(
                    f"{path}:{lineno}: expected {width} columns, got {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise FileFormatError(f"{path}: empty matrix file")
    return np.array(rows, dtype=float)
