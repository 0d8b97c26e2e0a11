"""Maximal monotone operators with inexact resolvents.

Each operator exposes ``resolvent(req, x0=None) -> GraphPair``: a pair with
``y in T(x)`` exactly and ``x + rho*y = G z_hat + rho*w_hat + e`` where ``e``
passes the relative-error test

    ||e||^2 <= sigma^2 (||G z_hat - x||^2 + ||rho (w_hat - y)||^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .separator import GraphPair, error_bound_sq

# Accept e with ||e|| <= EXACT_RTOL * max(1, ||rhs||) as a resolvent solved to
# working precision; needed for sigma = 0, where the test demands e == 0.
EXACT_RTOL = 1e-12


class ResolventError(RuntimeError):
    """Inner solver hit its cap before the relative-error test passed."""

    def __init__(self, msg, best_residual=np.inf, iterations=0, block=None):
        super().__init__(msg)
        self.best_residual = best_residual
        self.iterations = iterations
        self.block = block


@dataclass(frozen=True)
class ResolventRequest:
    """Data for one resolvent call.

    ``target`` is ``G z_hat + rho * w_hat``; ``z_hat_mapped`` is ``G z_hat``.
    """

    z_hat_mapped: np.ndarray
    w_hat: np.ndarray
    rho: float
    sigma: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not 0.0 <= self.sigma < 1.0:
            raise ValueError(f"sigma must lie in [0, 1), got {self.sigma}")
        if self.z_hat_mapped.shape != self.w_hat.shape:
            raise ValueError("z_hat_mapped and w_hat differ in shape")

    @property
    def target(self) -> np.ndarray:
        return self.z_hat_mapped + self.rho * self.w_hat


class AffineBlockOperator:
    """``T(x) = Q^T (Q x - b)``, the gradient of ``0.5 ||Q x - b||^2``.

    The resolvent is computed by conjugate gradients on
    ``(rho Q^T Q + I) x = G z_hat + rho w_hat + rho Q^T b``, stopping as soon
    as the relative-error test holds.
    """

    def __init__(self, Q, b, cg_cap: int | None = None):
        self.Q = np.asarray(Q, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64).reshape(-1)
        if self.Q.ndim != 2 or self.Q.shape[0] != self.b.size:
            raise ValueError(f"incompatible block shapes {self.Q.shape} and {self.b.shape}")
        if not (np.all(np.isfinite(self.Q)) and np.all(np.isfinite(self.b))):
            raise ValueError("non-finite entries in affine block")
        self.dim = self.Q.shape[1]
        self.cg_cap = 10 * self.dim if cg_cap is None else cg_cap
        self._qtb = self.Q.T @ self.b

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got shape {x.shape}")
        return self.Q.T @ (self.Q @ x - self.b)

    def resolvent(self, req: ResolventRequest, x0=None) -> GraphPair:
        return cg_affine_resolvent(self, req, x0=x0)


def operator_apply(op: AffineBlockOperator, x) -> np.ndarray:
    return op.apply(x)


def cg_affine_resolvent(
    op: AffineBlockOperator,
    req: ResolventRequest,
    x0=None,
    cap: int | None = None,
    exact_rtol: float = EXACT_RTOL,
) -> GraphPair:
    rho = req.rho
    v = req.target
    rhs = v + rho * op._qtb
    floor = exact_rtol * max(1.0, float(np.linalg.norm(rhs)))
    cap = op.cg_cap if cap is None else cap

    def check(x):
        y = op.Q.T @ (op.Q @ x - op.b)
        e = x + rho * y - v
        pair = GraphPair(x.copy(), y, e, rho)
        ee = float(e @ e)
        if ee <= error_bound_sq(pair, req.z_hat_mapped, req.w_hat, req.sigma):
            return pair, True, ee
        if np.sqrt(ee) <= floor:
            return GraphPair(pair.x, y, e, rho, strict=False), True, ee
        return pair, False, ee

    x = np.zeros(op.dim) if x0 is None else np.array(x0, dtype=np.float64)
    pair, ok, ee = check(x)
    best = ee
    if ok:
        return pair
    # residual of the linear system is -e
    r = -pair.e
    p = r.copy()
    rr = float(r @ r)
    for it in range(1, cap + 1):
        Ap = p + rho * (op.Q.T @ (op.Q @ p))
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            break
        a = rr / pAp
        x = x + a * p
        pair, ok, ee = check(x)
        best = min(best, ee)
        if ok:
            return GraphPair(pair.x, pair.y, pair.e, rho, it, pair.strict)
        r = r - a * Ap
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise ResolventError(
        f"CG did not meet the relative-error test within {cap} steps "
        f"(best ||e|| = {np.sqrt(best):.3e})",
        best_residual=float(np.sqrt(best)),
        iterations=cap,
    )


class L1Operator:
    """``T = subdifferential of lam * ||.||_1``; resolvent is soft-thresholding."""

    def __init__(self, lam: float):
        if not lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {lam}")
        self.lam = float(lam)

    def resolvent(self, req: ResolventRequest, x0=None) -> GraphPair:
        return l1_prox_resolvent(self, req)


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def l1_prox_resolvent(op: L1Operator, req: ResolventRequest) -> GraphPair:
    v = req.target
    x = soft_threshold(v, req.rho * op.lam)
    y = (v - x) / req.rho
    return GraphPair(x, y, np.zeros_like(x), req.rho)


def inexact_resolvent(op, req: ResolventRequest, x0=None) -> GraphPair:
    return op.resolvent(req, x0=x0)
