"""Admissible inertia/relaxation parameters.

The relaxation upper bound is tied to the inertia upper bound through the
curve ``beta_bar(alpha_bar) = 2(a-1)^2 / (2(a-1)^2 + 3a - 1)``; inertial steps
must form a nondecreasing sequence bounded by ``alpha_cap < alpha_bar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence


class ParameterDomainError(ValueError):
    pass


def beta_from_alpha(alpha_bar: float) -> float:
    """Largest admissible relaxation parameter for inertia bound ``alpha_bar``."""
    if not 0.0 < alpha_bar < 1.0:
        raise ParameterDomainError(f"alpha_bar must lie in (0, 1), got {alpha_bar}")
    s = 2.0 * (alpha_bar - 1.0) ** 2
    return s / (s + 3.0 * alpha_bar - 1.0)


def alpha_from_beta(beta_bar: float) -> float:
    """Inverse of :func:`beta_from_alpha`."""
    if not 0.0 < beta_bar < 2.0:
        raise ParameterDomainError(f"beta_bar must lie in (0, 2), got {beta_bar}")
    return 2.0 * (2.0 - beta_bar) / (
        4.0 - beta_bar + math.sqrt(16.0 * beta_bar - 7.0 * beta_bar**2)
    )


def q_value(nu: float, beta_bar: float) -> float:
    """The quadratic ``q`` whose positivity on ``[0, alpha]`` drives the
    summability of ``||p^k - p^{k-1}||^2``."""
    if not 0.0 < beta_bar < 2.0:
        raise ParameterDomainError(f"beta_bar must lie in (0, 2), got {beta_bar}")
    ib = 1.0 / beta_bar
    return 2.0 * (ib - 1.0) * nu**2 - (4.0 * ib - 1.0) * nu + 2.0 * ib - 1.0


def smallest_positive_root(a: float, b: float, c: float) -> float:
    """Root ``2c / (b + sqrt(b^2 - 4ac))`` of ``a nu^2 - b nu + c``.

    Requires ``b > 0``, ``c > 0`` and a positive discriminant; the quadratic
    is then decreasing on ``[0, root]``.
    """
    disc = b * b - 4.0 * a * c
    if not (b > 0 and c > 0 and disc > 0):
        raise ParameterDomainError(
            f"need b > 0, c > 0, b^2 - 4ac > 0; got a={a}, b={b}, c={c}"
        )
    return 2.0 * c / (b + math.sqrt(disc))


@dataclass(frozen=True)
class InertiaRelaxationBudget:
    """Bounds ``0 <= alpha_cap < alpha_bar < 1`` and ``0 < beta_lo <= beta_bar``.

    ``beta_bar`` is derived from ``alpha_bar``; ``beta_lo`` defaults to it.
    """

    alpha_bar: float
    alpha_cap: float
    beta_lo: float | None = None
    beta_bar: float = field(init=False)

    def __post_init__(self):
        bb = beta_from_alpha(self.alpha_bar)
        object.__setattr__(self, "beta_bar", bb)
        if self.beta_lo is None:
            object.__setattr__(self, "beta_lo", bb)
        if not 0.0 <= self.alpha_cap < self.alpha_bar:
            raise ParameterDomainError(
                f"need 0 <= alpha_cap < alpha_bar, got {self.alpha_cap}, {self.alpha_bar}"
            )
        if not 0.0 < self.beta_lo <= bb:
            raise ParameterDomainError(
                f"need 0 < beta_lo <= beta_bar={bb:.6g}, got {self.beta_lo}"
            )

    def q_margin(self) -> float:
        """``q(alpha_cap)``, strictly positive for an admissible budget."""
        return q_value(self.alpha_cap, self.beta_bar)


@dataclass(frozen=True)
class ScheduleViolation:
    index: int
    value: float
    reason: str


def validate_schedule(
    alphas: Sequence[float], budget: InertiaRelaxationBudget
) -> ScheduleViolation | None:
    """Check ``0 <= a_k <= a_{k+1} <= alpha_cap`` on the given prefix.

    Returns ``None`` when the prefix is admissible, otherwise the first
    violation.
    """
    prev = None
    for k, a in enumerate(alphas):
        a = float(a)
        if a < 0.0:
            return ScheduleViolation(k, a, "negative")
        if a > budget.alpha_cap:
            return ScheduleViolation(k, a, f"exceeds cap {budget.alpha_cap}")
        if prev is not None and a < prev:
            return ScheduleViolation(k, a, f"decreases from {prev}")
        prev = a
    return None
