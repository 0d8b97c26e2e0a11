"""Inertial-relaxed separator-projection in a gamma-weighted product space.

Each step extrapolates ``p_hat = p + alpha (p - p_prev)``, asks a separator
oracle for an affine ``phi`` that is nonpositive on the target set, and moves
``p_hat`` a fraction ``beta`` of the way to (and past) its projection onto
``{phi <= 0}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .params import InertiaRelaxationBudget, q_value
from .product import GammaGeometry, ProductPoint, axpy, norm_gamma


@dataclass
class ProjectorState:
    p_curr: ProductPoint
    p_prev: ProductPoint
    k: int = 0

    @classmethod
    def start(cls, p0: ProductPoint) -> "ProjectorState":
        return cls(p0, p0, 0)


def extrapolate(state: ProjectorState, alpha_k: float) -> ProductPoint:
    if alpha_k == 0.0:
        return state.p_curr
    return axpy(alpha_k, state.p_curr - state.p_prev, state.p_curr)


def project_relaxed(
    p_hat: ProductPoint,
    phi_at_hat: float,
    grad: ProductPoint,
    grad_norm_sq: float,
    beta_k: float,
    geom: GammaGeometry | None = None,
) -> ProductPoint:
    """``p_hat - beta * max(0, phi(p_hat)) / ||grad||^2 * grad``.

    ``grad`` must be the gradient with respect to the gamma inner product and
    ``grad_norm_sq`` its squared gamma-norm.
    """
    if not grad_norm_sq > 0.0:
        raise ValueError("projection onto a degenerate halfspace (zero gradient)")
    if geom is not None:
        geom.check(grad)
    t = max(0.0, phi_at_hat) / grad_norm_sq
    if t == 0.0:
        return p_hat
    return axpy(-beta_k * t, grad, p_hat)


# oracle(p_hat) -> (phi(p_hat), grad, ||grad||^2), or None when grad vanishes
SeparatorOracle = Callable[[ProductPoint], "tuple[float, ProductPoint, float] | None"]


@dataclass
class ProjectorHistory:
    """Iterates ``p^{-1}, p^0, ..., p^K`` plus per-step ``p_hat``, ``p_tilde``."""

    points: list[ProductPoint] = field(default_factory=list)
    p_hats: list[ProductPoint] = field(default_factory=list)
    p_tildes: list[ProductPoint] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    betas: list[float] = field(default_factory=list)

    def record(self, p_hat, p_tilde, p_next, alpha_k, beta_k):
        self.p_hats.append(p_hat)
        self.p_tildes.append(p_tilde)
        self.points.append(p_next)
        self.alphas.append(alpha_k)
        self.betas.append(beta_k)


def run_projector(
    oracle: SeparatorOracle,
    p0: ProductPoint,
    alphas: Iterable[float],
    betas: Iterable[float],
    geom: GammaGeometry,
    max_iter: int,
) -> ProjectorHistory:
    """Run the generic method for ``max_iter`` steps (or until the oracle
    reports a vanishing gradient) and return the full history."""
    hist = ProjectorHistory(points=[p0, p0])
    state = ProjectorState.start(p0)
    for _, a, b in zip(range(max_iter), alphas, betas):
        p_hat = extrapolate(state, a)
        out = oracle(p_hat)
        if out is None:
            break
        phi, grad, nsq = out
        p_tilde = project_relaxed(p_hat, phi, grad, nsq, 1.0, geom)
        p_next = project_relaxed(p_hat, phi, grad, nsq, b, geom)
        hist.record(p_hat, p_tilde, p_next, a, b)
        state = ProjectorState(p_next, state.p_curr, state.k + 1)
    return hist


class FejerViolation(AssertionError):
    def __init__(self, k: int, which: str, slack: float):
        self.k, self.which, self.slack = k, which, slack
        super().__init__(f"iteration {k}: {which} violated (slack {slack:.3e})")


@dataclass(frozen=True)
class FejerDiagnostics:
    """Per-iteration quantities and inequality slacks (slack >= 0 means holds).

    ``slack_a``: inertial Fejer inequality with ``s_{k+1}``;
    ``slack_b``: the same with ``gamma_k`` and the ``||p^{k+1} - p^k||`` term;
    ``slack_key``: ``||p_hat - p*||^2 - ||p^{k+1} - p*||^2 - s_{k+1}``.
    """

    k: int
    h_k: float
    s_k: float
    mu_k: float
    gamma_k: float
    step_sq: float
    slack_a: float
    slack_b: float
    slack_key: float


def gamma_coefficient(alpha_k: float, beta_bar: float) -> float:
    ib = 1.0 / beta_bar
    return 2.0 * (1.0 - ib) * alpha_k**2 + 2.0 * ib * alpha_k


def fejer_check(
    history: ProjectorHistory,
    p_star: ProductPoint,
    budget: InertiaRelaxationBudget,
    geom: GammaGeometry,
    rtol: float | None = None,
) -> list[FejerDiagnostics]:
    """Evaluate the Fejer-type inequalities along a recorded trajectory.

    Entry ``k`` covers the step ``p^k -> p^{k+1}``; ``s_k`` there is
    ``s_{k+1}`` of that step. With ``rtol`` given, raises
    :class:`FejerViolation` at the first slack below ``-rtol * (1 + h_k)``.
    """
    pts = history.points  # pts[j] = p^{j-1}
    h = [norm_gamma(pj - p_star, geom) ** 2 for pj in pts]
    bb = budget.beta_bar
    out = []
    for k, (p_hat, p_tilde, a, b) in enumerate(
        zip(history.p_hats, history.p_tildes, history.alphas, history.betas)
    ):
        h_prev, h_k, h_next = h[k], h[k + 1], h[k + 2]
        d_prev = norm_gamma(pts[k + 1] - pts[k], geom) ** 2
        d_next = norm_gamma(pts[k + 2] - pts[k + 1], geom) ** 2
        s = b * (2.0 - b) * norm_gamma(p_hat - p_tilde, geom) ** 2
        g = gamma_coefficient(a, bb)
        lhs = h_next - h_k - a * (h_k - h_prev)
        slack_a = a * (1.0 + a) * d_prev - s - lhs
        slack_b = g * d_prev - (2.0 - bb) / bb * (1.0 - a) * d_next - lhs
        slack_key = norm_gamma(p_hat - p_star, geom) ** 2 - h_next - s
        mu = h_k - a * h_prev + g * d_prev
        diag = FejerDiagnostics(k, h_k, s, mu, g, d_next, slack_a, slack_b, slack_key)
        if rtol is not None:
            tol = -rtol * (1.0 + h_k)
            for name in ("slack_a", "slack_b", "slack_key"):
                if getattr(diag, name) < tol:
                    raise FejerViolation(k, name, getattr(diag, name))
        out.append(diag)
    return out


def summability_bound(diags: Sequence[FejerDiagnostics], budget: InertiaRelaxationBudget) -> list[tuple[float, float]]:
    """Pairs ``(sum_{j<=k} ||p^{j+1} - p^j||^2, (mu_0 + alpha h_k) / q(alpha))``.

    The first entry never exceeds the second along an admissible run.
    """
    if not diags:
        return []
    qa = q_value(budget.alpha_cap, budget.beta_bar)
    mu0 = diags[0].mu_k
    res, acc = [], 0.0
    for d in diags:
        acc += d.step_sq
        res.append((acc, (mu0 + budget.alpha_cap * d.h_k) / qa))
    return res


def halfspace_gap(phi_at_hat: float, grad: ProductPoint, p_hat: ProductPoint, p_tilde: ProductPoint, geom: GammaGeometry) -> tuple[float, float]:
    """``max(0, phi) / ||grad||`` and ``||p_tilde - p_hat||``; these coincide."""
    return max(0.0, phi_at_hat) / norm_gamma(grad, geom), norm_gamma(p_tilde - p_hat, geom)

