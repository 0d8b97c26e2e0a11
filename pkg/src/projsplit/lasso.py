"""LASSO ``min 0.5 ||Qx - b||^2 + lam ||x||_1`` as a projective splitting problem.

Rows of ``Q`` are partitioned into ``r`` cells; each cell becomes an affine
block ``T_i(x) = Q_i^T (Q_i x - b_i)`` and the l1 term the last block, all
with identity linear maps.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import linmap
from .operators import AffineBlockOperator, L1Operator, soft_threshold
from .product import ProductPoint
from .solver import MonotoneBlock, SolveResult, SolverConfig, SplittingProblem, Status, solve


class PartitionError(ValueError):
    def __init__(self, msg, indices=()):
        super().__init__(msg)
        self.indices = list(indices)


@dataclass
class LassoProblem:
    Q: np.ndarray
    b: np.ndarray
    lam: float
    partition: list[np.ndarray]

    @property
    def shape(self) -> tuple[int, int]:
        return self.Q.shape

    @property
    def r(self) -> int:
        return len(self.partition)


def contiguous_partition(m: int, r: int) -> list[np.ndarray]:
    """``r`` consecutive cells of ``m // r`` rows; the remainder joins the last."""
    if not 1 <= r <= m:
        raise PartitionError(f"need 1 <= r <= m, got r={r}, m={m}")
    size = m // r
    cells = [np.arange(i * size, (i + 1) * size) for i in range(r - 1)]
    cells.append(np.arange((r - 1) * size, m))
    return cells


def check_partition(partition: Sequence, m: int) -> list[np.ndarray]:
    cells = [np.asarray(c, dtype=np.int64).reshape(-1) for c in partition]
    empty = [i for i, c in enumerate(cells) if c.size == 0]
    if empty:
        raise PartitionError(f"empty partition cells: {empty}", empty)
    allidx = np.concatenate(cells)
    out_of_range = sorted(set(allidx[(allidx < 0) | (allidx >= m)].tolist()))
    if out_of_range:
        raise PartitionError(f"row indices out of range: {out_of_range}", out_of_range)
    counts = np.bincount(allidx, minlength=m)
    dup = np.flatnonzero(counts > 1).tolist()
    if dup:
        raise PartitionError(f"rows in more than one cell: {dup}", dup)
    missing = np.flatnonzero(counts == 0).tolist()
    if missing:
        raise PartitionError(f"rows not covered: {missing}", missing)
    return cells


def default_lambda(Q: np.ndarray, b: np.ndarray) -> float:
    return 0.1 * float(np.max(np.abs(Q.T @ b)))


def build_problem(
    Q, b, partition: Sequence | int = 1, lam: float | str = "default", rho: float | Sequence[float] = 1.0
) -> tuple[LassoProblem, SplittingProblem]:
    """Build the LASSO data and its ``r + 1`` block splitting.

    ``partition`` is either a list of row-index cells or a cell count for
    :func:`contiguous_partition`. ``lam="default"`` selects ``0.1 ||Q^T b||_inf``.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    m, d = Q.shape
    if b.size != m:
        raise ValueError(f"Q has {m} rows but b has {b.size} entries")
    if isinstance(partition, (int, np.integer)):
        cells = contiguous_partition(m, int(partition))
    else:
        cells = check_partition(partition, m)
    lam = default_lambda(Q, b) if isinstance(lam, str) else float(lam)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    r = len(cells)
    rhos = [float(rho)] * (r + 1) if np.isscalar(rho) else [float(v) for v in rho]
    if len(rhos) != r + 1:
        raise ValueError(f"need {r + 1} stepsizes, got {len(rhos)}")
    eye = linmap.identity(d)
    blocks = [MonotoneBlock(AffineBlockOperator(Q[c], b[c]), eye, rhos[i]) for i, c in enumerate(cells)]
    blocks.append(MonotoneBlock(L1Operator(lam), eye, rhos[-1]))
    return LassoProblem(Q, b, lam, cells), SplittingProblem(blocks)


def objective(problem: LassoProblem, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.Q.shape[1],):
        raise ValueError(f"expected vector of length {problem.Q.shape[1]}, got shape {x.shape}")
    r = problem.Q @ x - problem.b
    return 0.5 * float(r @ r) + problem.lam * float(np.sum(np.abs(x)))


def stop_criterion(f_curr: float, f_star: float, tol: float = 1e-4) -> bool:
    """``|F - F*| / F* <= tol``; absolute gap when ``F* <= 0``."""
    gap = abs(f_curr - f_star)
    if f_star > 0:
        return gap / f_star <= tol
    return gap <= tol


def lipschitz_constant(Q: np.ndarray, iters: int = 100, seed: int = 0) -> float:
    """Largest eigenvalue of ``Q^T Q`` by power iteration (slightly inflated)."""
    d = Q.shape[1]
    v = np.random.default_rng(seed).standard_normal(d)
    v /= np.linalg.norm(v) or 1.0
    lam = 0.0
    for _ in range(iters):
        u = Q.T @ (Q @ v)
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            return 0.0
        lam_new = float(v @ u)
        v = u / nu
        if abs(lam_new - lam) <= 1e-12 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return lam * (1.0 + 1e-6)


class OracleError(RuntimeError):
    pass


def ista_oracle(problem: LassoProblem, tol: float = 1e-10, cap: int = 200_000) -> tuple[np.ndarray, float]:
    """Proximal gradient with step ``1/L`` until ``||x_{k+1} - x_k|| <= tol * max(1, ||x||)``."""
    Q, b, lam = problem.Q, problem.b, problem.lam
    L = lipschitz_constant(Q)
    x = np.zeros(Q.shape[1])
    if L == 0.0:
        return x, objective(problem, x)
    for _ in range(cap):
        g = Q.T @ (Q @ x - b)
        x_new = soft_threshold(x - g / L, lam / L)
        if not np.all(np.isfinite(x_new)):
            raise OracleError("proximal gradient diverged")
        if np.linalg.norm(x_new - x) <= tol * max(1.0, float(np.linalg.norm(x_new))):
            return x_new, objective(problem, x_new)
        x = x_new
    raise OracleError(f"proximal gradient did not reach tol={tol:g} in {cap} iterations")


def polish(problem: LassoProblem, x: np.ndarray, zero_tol: float = 1e-9) -> np.ndarray:
    """Re-solve the optimality system on the support of ``x`` exactly.

    Returns the polished point when it keeps the sign pattern and satisfies the
    off-support condition, otherwise ``x`` unchanged.
    """
    Q, b, lam = problem.Q, problem.b, problem.lam
    supp = np.flatnonzero(np.abs(x) > zero_tol * max(1.0, float(np.max(np.abs(x), initial=0.0))))
    if supp.size == 0:
        return np.zeros_like(x)
    s = np.sign(x[supp])
    Qs = Q[:, supp]
    try:
        xs = np.linalg.solve(Qs.T @ Qs, Qs.T @ b - lam * s)
    except np.linalg.LinAlgError:
        return x
    cand = np.zeros_like(x)
    cand[supp] = xs
    if np.any(np.sign(xs) != s):
        return x
    g = Q.T @ (Q @ cand - b)
    off = np.setdiff1d(np.arange(x.size), supp)
    if off.size and np.max(np.abs(g[off])) > lam * (1 + 1e-10):
        return x
    return cand


def reference_point(problem: LassoProblem, x_star: np.ndarray) -> ProductPoint:
    """Extended solution ``(x*, T_1(x*), ..., T_r(x*))`` for a LASSO minimizer."""
    Q, b = problem.Q, problem.b
    w = [Q[c].T @ (Q[c] @ x_star - b[c]) for c in problem.partition]
    return ProductPoint(x_star, w)


def optimality_residual(problem: LassoProblem, x: np.ndarray) -> float:
    """Worst violation of ``0 in Q^T(Qx - b) + lam * d||x||_1``.

    On the support: ``|g_j + lam sign(x_j)|``; off it: ``max(|g_j| - lam, 0)``.
    """
    g = problem.Q.T @ (problem.Q @ x - problem.b)
    on = x != 0
    v_on = np.abs(g[on] + problem.lam * np.sign(x[on]))
    v_off = np.maximum(np.abs(g[~on]) - problem.lam, 0.0)
    return float(max(np.max(v_on, initial=0.0), np.max(v_off, initial=0.0)))


@dataclass
class FStarEstimate:
    f_star: float
    f_splitting: float
    f_ista: float
    x_ista: np.ndarray


def estimate_f_star(
    problem: LassoProblem,
    splitting: SplittingProblem,
    config: SolverConfig | None = None,
    min_iters: int = 10_000,
    ista_tol: float = 1e-10,
) -> FStarEstimate:
    """Smaller of (a) the best objective over ``max(10^4, config.max_outer)``
    splitting iterations and (b) the proximal-gradient value."""
    config = SolverConfig() if config is None else config
    cfg = replace(
        config,
        max_outer=max(min_iters, config.max_outer),
        residual_tol=None,
        objective=lambda z: objective(problem, z),
        objective_stop=None,
    )
    res = solve(splitting, cfg)
    if res.status is Status.FAILED:
        raise OracleError(f"splitting run failed: {res.message}")
    vals = [r.objective for r in res.trace if r.objective is not None]
    if res.x_last is not None:
        vals.append(objective(problem, res.x_last))
    f_split = min(vals)
    if not math.isfinite(f_split):
        raise OracleError("splitting objective diverged")
    x_i, f_i = ista_oracle(problem, ista_tol)
    return FStarEstimate(min(f_split, f_i), f_split, f_i, x_i)


# ---------------------------------------------------------------------------
# random instances and the two-variant comparison


def random_instance(m: int, d: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Standard normal ``Q`` and ``b`` with i.i.d. entries uniform on {0, 1}."""
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((m, d))
    b = rng.integers(0, 2, size=m).astype(np.float64)
    return Q, b


def classical_config(**kw) -> SolverConfig:
    """Noninertial exact variant: ``alpha = 0``, ``beta = 1``, ``sigma = 0``."""
    return SolverConfig(alpha=0.0, beta=1.0, sigma=0.0, **kw)


def inertial_config(**kw) -> SolverConfig:
    return SolverConfig(**kw)


@dataclass
class Instance:
    name: str
    Q: np.ndarray
    b: np.ndarray
    r: int
    seed: int | None = None


@dataclass
class ComparisonRow:
    name: str
    f_star: float
    iters_a: int | None
    iters_b: int | None
    time_a: float | None
    time_b: float | None
    status_a: str
    status_b: str

    @property
    def ok(self) -> bool:
        return self.status_a == Status.CONVERGED.value and self.status_b == Status.CONVERGED.value

    @property
    def iter_ratio(self) -> float | None:
        if not self.ok:
            return None
        return self.iters_b / self.iters_a if self.iters_a else (1.0 if self.iters_b == self.iters_a else math.inf)

    @property
    def time_ratio(self) -> float | None:
        if not self.ok or not self.time_a:
            return None
        return self.time_b / self.time_a


def geometric_mean(vals: Sequence[float]) -> float:
    vals = [v for v in vals if v is not None]
    if not vals:
        return float("nan")
    if any(v <= 0 for v in vals):
        # zero-iteration runs: shift by one so the mean stays defined
        vals = [v + 1 for v in vals]
    return float(np.exp(np.mean(np.log(vals))))


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    tol: float
    label_a: str = "PS"
    label_b: str = "PS_in_rel"
    notes: list[str] = field(default_factory=list)

    @property
    def ok_rows(self) -> list[ComparisonRow]:
        return [r for r in self.rows if r.ok]

    def geomean_iters(self) -> tuple[float, float, float]:
        ok = self.ok_rows
        return (
            geometric_mean([r.iters_a for r in ok]),
            geometric_mean([r.iters_b for r in ok]),
            geometric_mean([r.iter_ratio for r in ok]),
        )

    def geomean_times(self) -> tuple[float, float, float]:
        ok = self.ok_rows
        return (
            geometric_mean([r.time_a for r in ok]),
            geometric_mean([r.time_b for r in ok]),
            geometric_mean([r.time_ratio for r in ok]),
        )

    def to_dict(self) -> dict:
        ga, gb, gr = self.geomean_iters()
        ta, tb, tr = self.geomean_times()
        return {
            "tol": self.tol,
            "variants": [self.label_a, self.label_b],
            "rows": [dict(asdict(r), iter_ratio=r.iter_ratio, time_ratio=r.time_ratio) for r in self.rows],
            "geomean_iters": {"a": ga, "b": gb, "ratio": gr},
            "geomean_time": {"a": ta, "b": tb, "ratio": tr},
            "notes": self.notes,
        }

    def table(self, which: str = "iters") -> str:
        """Plain-text table: Problem | variant A | variant B | ratio."""
        a, b = self.label_a, self.label_b
        lines = [f"{'Problem':<16}{a:>12}{b:>12}{'ratio':>10}"]
        for r in self.rows:
            if not r.ok:
                lines.append(f"{r.name:<16}{'failed':>12}{'':>12}{'':>10}")
                continue
            if which == "iters":
                lines.append(f"{r.name:<16}{r.iters_a:>12d}{r.iters_b:>12d}{r.iter_ratio:>10.4f}")
            else:
                lines.append(f"{r.name:<16}{r.time_a:>12.4f}{r.time_b:>12.4f}{r.time_ratio:>10.4f}")
        g = self.geomean_iters() if which == "iters" else self.geomean_times()
        lines.append(f"{'Geometric mean':<16}{g[0]:>12.2f}{g[1]:>12.2f}{g[2]:>10.4f}")
        return "\n".join(lines)


def _run_variant(problem, splitting, config, f_star, tol, callback=None) -> SolveResult:
    cfg = replace(
        config,
        objective=lambda z: objective(problem, z),
        objective_stop=lambda f: stop_criterion(f, f_star, tol),
        residual_tol=None,
    )
    return solve(splitting, cfg, callback=callback)


def run_comparison(
    instances: Sequence[Instance],
    config_a: SolverConfig | None = None,
    config_b: SolverConfig | None = None,
    tol: float = 1e-4,
    f_star_tol: float = 1e-10,
    rho: float = 1.0,
    observer: Callable | None = None,
) -> ComparisonReport:
    """Solve each instance with both variants to the same relative objective gap.

    ``F*`` comes from the proximal-gradient oracle and is shared by both runs.
    Runtimes cover the outer loop only. ``observer(instance, problem, x_star,
    config)``, if given, returns a per-iteration callback for that run.
    """
    config_a = classical_config() if config_a is None else config_a
    config_b = inertial_config() if config_b is None else config_b
    rows, notes = [], []
    for inst in instances:
        lp, sp = build_problem(inst.Q, inst.b, inst.r, rho=rho)
        x_star, f_star = ista_oracle(lp, f_star_tol)
        x_star = polish(lp, x_star)
        f_star = objective(lp, x_star)
        out = []
        for cfg in (config_a, config_b):
            cb = observer(inst, lp, x_star, cfg) if observer is not None else None
            out.append(_run_variant(lp, sp, cfg, f_star, tol, cb))
        ra, rb = out
        row = ComparisonRow(
            inst.name, f_star, ra.iterations, rb.iterations, ra.elapsed, rb.elapsed,
            ra.status.value, rb.status.value,
        )
        if not row.ok:
            notes.append(f"{inst.name}: excluded ({ra.status.value} / {rb.status.value})")
        rows.append(row)
    return ComparisonReport(rows, tol, notes=notes)


