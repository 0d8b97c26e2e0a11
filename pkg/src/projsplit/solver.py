"""Relative-error inertial-relaxed inexact projective splitting.

Solves ``0 in sum_i G_i^* T_i G_i (z)`` with ``G_n = I``. One outer
iteration extrapolates ``(z, w)``, evaluates every block's resolvent
inexactly, builds the affine separator and takes a relaxed projection step.
"""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .linmap import LinearMap
from .operators import ResolventError, ResolventRequest
from .params import InertiaRelaxationBudget, ParameterDomainError, validate_schedule
from .product import GammaGeometry, ProductPoint
from .projector import ProjectorHistory, project_relaxed
from .separator import GraphPair, SeparatorSample, build_sample, theta


class Status(str, enum.Enum):
    CONTINUING = "continuing"
    STOPPED_STEP3 = "stopped_step3"
    CONVERGED = "converged"
    FAILED = "failed"
    MAX_OUTER = "max_outer"


@dataclass(frozen=True)
class MonotoneBlock:
    operator: Any
    gmap: LinearMap
    rho: float = 1.0


@dataclass
class SplittingProblem:
    blocks: list[MonotoneBlock]

    def __post_init__(self):
        if len(self.blocks) < 2:
            raise ValueError("need at least two operator blocks")
        last = self.blocks[-1].gmap
        if not last.is_identity:
            raise ValueError("the last block's linear map must be the identity")
        d0 = last.in_dim
        for i, blk in enumerate(self.blocks):
            if blk.gmap.in_dim != d0:
                raise ValueError(f"block {i}: map domain {blk.gmap.in_dim} != {d0}")
            if not blk.rho > 0:
                raise ValueError(f"block {i}: rho must be positive")

    @property
    def n(self) -> int:
        return len(self.blocks)

    @property
    def maps(self) -> list[LinearMap]:
        return [b.gmap for b in self.blocks]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.blocks[-1].gmap.in_dim,) + tuple(b.gmap.out_dim for b in self.blocks[:-1])

    def geometry(self, gamma: float) -> GammaGeometry:
        return GammaGeometry(gamma, self.dims)


@dataclass
class SolverConfig:
    """Run parameters. Defaults are the LASSO experiment settings:
    ``alpha_k = 0.1``, ``alpha_bar = 0.17`` (so ``beta_k = beta_bar = 1.5519``),
    ``sigma = 0.99``, ``gamma = 1``, ``rho = 1``.

    ``alphas`` / ``betas`` override the constant ``alpha`` / ``beta`` with
    explicit sequences (the last entry is repeated once exhausted).
    """

    alpha: float = 0.1
    alpha_bar: float = 0.17
    beta: float | None = None
    beta_lo: float | None = None
    alphas: Sequence[float] | None = None
    betas: Sequence[float] | None = None
    sigma: float = 0.99
    gamma: float = 1.0
    max_outer: int = 10_000
    residual_tol: float | None = 1e-6
    objective: Callable[[np.ndarray], float] | None = None
    objective_stop: Callable[[float], bool] | None = None
    eps_grad: float = 1e-20
    cg_start: str = "previous"
    workers: int = 1

    def budget(self) -> InertiaRelaxationBudget:
        cap = max(self.alphas) if self.alphas else self.alpha
        beta_lo = self.beta_lo
        if beta_lo is None:
            candidates = [b for b in (self.betas or ([self.beta] if self.beta is not None else []))]
            beta_lo = min(candidates) if candidates else None
        return InertiaRelaxationBudget(self.alpha_bar, cap, beta_lo)

    def validate(self) -> InertiaRelaxationBudget:
        budget = self.budget()
        alphas = self.alphas if self.alphas else [self.alpha]
        bad = validate_schedule(alphas, budget)
        if bad is not None:
            raise ParameterDomainError(f"alpha schedule violation at index {bad.index}: {bad.reason}")
        for b in self.betas or [self.beta_at(0, budget)]:
            if not budget.beta_lo <= b <= budget.beta_bar:
                raise ParameterDomainError(
                    f"beta {b} outside [{budget.beta_lo:.6g}, {budget.beta_bar:.6g}]"
                )
        if not 0.0 <= self.sigma < 1.0:
            raise ParameterDomainError(f"sigma must lie in [0, 1), got {self.sigma}")
        if not self.gamma > 0.0:
            raise ParameterDomainError(f"gamma must be positive, got {self.gamma}")
        return budget

    def alpha_at(self, k: int) -> float:
        if self.alphas:
            return float(self.alphas[min(k, len(self.alphas) - 1)])
        return float(self.alpha)

    def beta_at(self, k: int, budget: InertiaRelaxationBudget) -> float:
        if self.betas:
            return float(self.betas[min(k, len(self.betas) - 1)])
        return float(budget.beta_bar if self.beta is None else self.beta)


@dataclass
class IterateTrace:
    k: int
    alpha_k: float
    beta_k: float
    theta_k: float
    phi_at_hat: float
    grad_norm_sq_gamma: float
    residual_primal: float
    residual_dual: float
    inner_iters: list[int]
    objective: float | None
    step_norm: float

    def to_dict(self) -> dict:
        return asdict(self)


TRACE_FIELDS = tuple(IterateTrace.__dataclass_fields__)


@dataclass
class SolverState:
    p_curr: ProductPoint
    p_prev: ProductPoint
    k: int = 0
    x_warm: list[np.ndarray | None] = field(default_factory=list)

    @classmethod
    def start(cls, p0: ProductPoint, n: int) -> "SolverState":
        return cls(p0, p0, 0, [None] * n)


@dataclass
class IterationDetail:
    """Everything computed in one outer iteration (for diagnostics)."""

    k: int
    p_curr: ProductPoint
    p_prev: ProductPoint
    p_hat: ProductPoint
    w_hat_n: np.ndarray
    pairs: tuple[GraphPair, ...]
    sample: SeparatorSample | None
    alpha_k: float
    beta_k: float
    theta_k: float
    p_next: ProductPoint | None


def extrapolate_all(
    z: np.ndarray,
    z_prev: np.ndarray,
    w: Sequence[np.ndarray],
    w_prev: Sequence[np.ndarray],
    alpha_k: float,
    maps: Sequence[LinearMap],
) -> tuple[np.ndarray, list[np.ndarray], np.ndarray]:
    """Inertial step on ``z`` and each ``w_i``; ``w_hat_n = -sum G_i^* w_hat_i``."""
    z_hat = z + alpha_k * (z - z_prev)
    w_hat = [wi + alpha_k * (wi - wp) for wi, wp in zip(w, w_prev)]
    w_hat_n = -sum((G.adjoint(wi) for G, wi in zip(maps[:-1], w_hat)), np.zeros_like(z))
    return z_hat, w_hat, w_hat_n


def last_dual(p: ProductPoint, maps: Sequence[LinearMap]) -> np.ndarray:
    return -sum((G.adjoint(wi) for G, wi in zip(maps[:-1], p.w)), np.zeros_like(p.z))


def _resolve_all(problem, z_hat, w_hat_all, sigma, x_warm, pool):
    def one(i):
        blk = problem.blocks[i]
        req = ResolventRequest(blk.gmap(z_hat), w_hat_all[i], blk.rho, sigma)
        try:
            return blk.operator.resolvent(req, x0=x_warm[i])
        except ResolventError as exc:
            exc.block = i
            raise

    idx = range(problem.n)
    if pool is None:
        return tuple(one(i) for i in idx)
    return tuple(pool.map(one, idx))


def outer_iteration(
    state: SolverState,
    problem: SplittingProblem,
    config: SolverConfig,
    budget: InertiaRelaxationBudget,
    pool: ThreadPoolExecutor | None = None,
) -> tuple[SolverState, IterateTrace | None, Status, IterationDetail | None, str]:
    """One pass of extrapolation, resolvents, Step-3 test and relaxed projection.

    Returns ``(new_state, record, status, detail, message)``. On a Step-3
    stop the returned state holds ``(x_n, y_1, ..., y_{n-1})``, which lies in
    the extended solution set. Termination rules are applied to ``p^k``
    (the state is not advanced when they fire).
    """
    k = state.k
    maps = problem.maps
    geom = problem.geometry(config.gamma)
    a_k = config.alpha_at(k)
    b_k = config.beta_at(k, budget)
    p, pp = state.p_curr, state.p_prev

    z_hat, w_hat, w_hat_n = extrapolate_all(p.z, pp.z, p.w, pp.w, a_k, maps)
    p_hat = ProductPoint(z_hat, w_hat)
    if config.cg_start == "previous":
        x_warm = state.x_warm
    elif config.cg_start == "zero":
        x_warm = [None] * problem.n
    elif config.cg_start == "center":
        x_warm = [blk.gmap(z_hat) for blk in problem.blocks]
    else:
        raise ValueError(f"unknown cg_start {config.cg_start!r}")
    try:
        pairs = _resolve_all(problem, z_hat, w_hat + [w_hat_n], config.sigma, x_warm, pool)
    except ResolventError as exc:
        return state, None, Status.FAILED, None, f"block {exc.block}: {exc}"

    w_n = last_dual(p, maps)
    res_p = max(float(np.linalg.norm(G(p.z) - pr.x)) for G, pr in zip(maps, pairs))
    res_d = max(float(np.linalg.norm(wi - pr.y)) for wi, pr in zip(list(p.w) + [w_n], pairs))
    step = float(np.sqrt(config.gamma * np.sum((p.z - pp.z) ** 2)
                         + sum(float(np.sum((a - b) ** 2)) for a, b in zip(p.w, pp.w))))
    obj = config.objective(p.z) if config.objective is not None else None
    inner = [pr.inner_iters for pr in pairs]
    new_warm = [pr.x for pr in pairs]

    sample = build_sample(pairs, p_hat, geom, maps)
    nsq = sample.grad_norm_sq_gamma
    hat_sq = config.gamma * float(z_hat @ z_hat) + sum(float(v @ v) for v in w_hat)
    if nsq <= config.eps_grad * (1.0 + hat_sq):
        rec = IterateTrace(k, a_k, b_k, 0.0, sample.phi_at_hat, nsq, res_p, res_d, inner, obj, step)
        sol = ProductPoint(pairs[-1].x, [pr.y for pr in pairs[:-1]])
        detail = IterationDetail(k, p, pp, p_hat, w_hat_n, pairs, sample, a_k, b_k, 0.0, None)
        return SolverState(sol, sol, k, new_warm), rec, Status.STOPPED_STEP3, detail, "separator gradient vanished"

    th = theta(sample)
    rec = IterateTrace(k, a_k, b_k, th, sample.phi_at_hat, nsq, res_p, res_d, inner, obj, step)

    done = False
    msg = ""
    if config.residual_tol is not None and max(res_p, res_d) <= config.residual_tol:
        done, msg = True, f"residuals below {config.residual_tol:g}"
    if obj is not None and config.objective_stop is not None and config.objective_stop(obj):
        done, msg = True, "objective criterion met"
    if done:
        detail = IterationDetail(k, p, pp, p_hat, w_hat_n, pairs, sample, a_k, b_k, th, None)
        return SolverState(p, pp, k, new_warm), rec, Status.CONVERGED, detail, msg

    bt = b_k * th
    xn = pairs[-1].x
    z_next = z_hat - (bt / config.gamma) * sample.sum_adjoint_y
    w_next = [wh - bt * (pr.x - G(xn)) for wh, pr, G in zip(w_hat, pairs[:-1], maps[:-1])]
    p_next = ProductPoint(z_next, w_next)
    detail = IterationDetail(k, p, pp, p_hat, w_hat_n, pairs, sample, a_k, b_k, th, p_next)
    return SolverState(p_next, p, k + 1, new_warm), rec, Status.CONTINUING, detail, ""


@dataclass
class SolveResult:
    point: ProductPoint
    trace: list[IterateTrace]
    status: Status
    iterations: int
    message: str
    last_pairs: tuple[GraphPair, ...] | None
    elapsed: float

    @property
    def z(self) -> np.ndarray:
        return self.point.z

    @property
    def x_last(self) -> np.ndarray | None:
        """``x_n`` of the last resolvent sweep (a point of ``dom T_n``)."""
        return None if self.last_pairs is None else self.last_pairs[-1].x

    @property
    def best_residual(self) -> float:
        if not self.trace:
            return float("inf")
        return min(max(r.residual_primal, r.residual_dual) for r in self.trace)


def solve(
    problem: SplittingProblem,
    config: SolverConfig | None = None,
    initial: ProductPoint | None = None,
    callback: Callable[[IterationDetail], None] | None = None,
) -> SolveResult:
    """Iterate until a termination rule, the Step-3 stop, the cap, or a failure."""
    config = SolverConfig() if config is None else config
    budget = config.validate()
    geom = problem.geometry(config.gamma)
    p0 = geom.zeros() if initial is None else initial
    geom.check(p0)
    state = SolverState.start(p0, problem.n)
    trace: list[IterateTrace] = []
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    status, msg, pairs = Status.MAX_OUTER, "", None
    t0 = time.perf_counter()
    try:
        for _ in range(config.max_outer):
            state, rec, status, detail, msg = outer_iteration(state, problem, config, budget, pool)
            if rec is not None:
                trace.append(rec)
            if detail is not None:
                pairs = detail.pairs
                if callback is not None:
                    callback(detail)
            if status is not Status.CONTINUING:
                break
        else:
            status = Status.MAX_OUTER
            msg = f"reached max_outer={config.max_outer}"
    finally:
        if pool is not None:
            pool.shutdown()
    elapsed = time.perf_counter() - t0
    return SolveResult(state.p_curr, trace, status, state.k, msg, pairs, elapsed)


def projector_history(details: Sequence[IterationDetail]) -> ProjectorHistory:
    """Rebuild the generic projector's history from consecutive iteration details.

    Only steps that produced a new point are used; ``p_tilde`` is the exact
    projection of ``p_hat`` onto the separator's halfspace.
    """
    steps = [d for d in details if d.p_next is not None and d.sample is not None]
    if not steps:
        return ProjectorHistory()
    hist = ProjectorHistory(points=[steps[0].p_prev, steps[0].p_curr])
    for d in steps:
        s = d.sample
        p_tilde = project_relaxed(d.p_hat, s.phi_at_hat, s.grad, s.grad_norm_sq_gamma, 1.0)
        hist.record(d.p_hat, p_tilde, d.p_next, d.alpha_k, d.beta_k)
    return hist
