"""Affine separators built from graph samples ``(x_i, y_i)``, ``y_i in T_i(x_i)``.

For ``p = (z, w_1, ..., w_{n-1})`` and ``w_n := -sum_i G_i^* w_i`` the
separator is ``phi(p) = sum_{i=1}^n <G_i z - x_i, y_i - w_i>``. It is
nonpositive on the extended solution set and affine in ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linmap import LinearMap
from .product import GammaGeometry, ProductPoint

# |phi| below this fraction of its natural scale is treated as rounding noise
PHI_CLAMP_RTOL = 1e-14


class SeparatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class GraphPair:
    """One resolvent output: ``y in T(x)`` and ``x + rho*y = G z_hat + rho*w_hat + e``.

    ``strict`` is False when the pair was accepted by the rounding floor
    rather than by the relative-error test itself.
    """

    x: np.ndarray
    y: np.ndarray
    e: np.ndarray
    rho: float
    inner_iters: int = 0
    strict: bool = True


def error_bound_sq(pair: GraphPair, gz_hat: np.ndarray, w_hat: np.ndarray, sigma: float) -> float:
    """Right-hand side ``sigma^2 (||G z_hat - x||^2 + ||rho (w_hat - y)||^2)``."""
    a = gz_hat - pair.x
    b = pair.rho * (w_hat - pair.y)
    return sigma**2 * (float(a @ a) + float(b @ b))


def error_criterion_holds(
    pair: GraphPair, gz_hat: np.ndarray, w_hat: np.ndarray, sigma: float
) -> bool:
    return float(pair.e @ pair.e) <= error_bound_sq(pair, gz_hat, w_hat, sigma)


def _sum_adjoint_y(pairs: Sequence[GraphPair], maps: Sequence[LinearMap]) -> np.ndarray:
    s = pairs[-1].y.copy()
    for pr, G in zip(pairs[:-1], maps[:-1]):
        s += G.adjoint(pr.y)
    return s


def gradient(
    pairs: Sequence[GraphPair], geom: GammaGeometry, maps: Sequence[LinearMap]
) -> tuple[np.ndarray, list[np.ndarray], float]:
    """Gradient of the separator in the gamma geometry and its squared norm.

    Returns ``(grad_z, grad_w, ||grad||_gamma^2)`` where
    ``grad_z = (sum_{i<n} G_i^* y_i + y_n) / gamma`` and
    ``grad_w[i] = x_i - G_i x_n``.
    """
    if len(pairs) < 2 or len(pairs) != len(maps):
        raise ValueError("need n >= 2 pairs, one per linear map")
    sgy = _sum_adjoint_y(pairs, maps)
    xn = pairs[-1].x
    grad_w = [pr.x - G(xn) for pr, G in zip(pairs[:-1], maps[:-1])]
    norm_sq = float(sgy @ sgy) / geom.gamma + sum(float(g @ g) for g in grad_w)
    return sgy / geom.gamma, grad_w, norm_sq


@dataclass(frozen=True)
class SeparatorSample:
    pairs: tuple[GraphPair, ...]
    grad_z: np.ndarray
    grad_w: tuple[np.ndarray, ...]
    grad_norm_sq_gamma: float
    phi_at_hat: float
    gamma: float

    @property
    def grad(self) -> ProductPoint:
        return ProductPoint(self.grad_z, self.grad_w)

    @property
    def sum_adjoint_y(self) -> np.ndarray:
        """``sum_{i<n} G_i^* y_i + y_n`` (the unscaled z-block of the gradient)."""
        return self.gamma * self.grad_z


def phi_eval(
    pairs: Sequence[GraphPair] | SeparatorSample, p: ProductPoint, maps: Sequence[LinearMap]
) -> float:
    if isinstance(pairs, SeparatorSample):
        pairs = pairs.pairs
    if len(p.w) != len(pairs) - 1:
        raise ValueError(f"point has {len(p.w) + 1} blocks, separator has {len(pairs)}")
    z = p.z
    val = 0.0
    acc = pairs[-1].y.copy()
    for pr, G, wi in zip(pairs[:-1], maps[:-1], p.w):
        val += float((G(z) - pr.x) @ (pr.y - wi))
        acc += G.adjoint(wi)
    return val + float((z - pairs[-1].x) @ acc)


def _phi_scale(pairs, p_hat: ProductPoint, maps) -> float:
    # sum_i (||G_i z - x_i||^2 + ||y_i - w_i||^2) / 2 bounds every term of phi
    z = p_hat.z
    wn = -sum((G.adjoint(wi) for G, wi in zip(maps[:-1], p_hat.w)), np.zeros_like(z))
    s = 0.0
    for pr, G, wi in zip(pairs, maps, list(p_hat.w) + [wn]):
        a = G(z) - pr.x
        b = pr.y - wi
        s += float(a @ a) + float(b @ b)
    return 0.5 * s


def build_sample(
    pairs: Sequence[GraphPair],
    p_hat: ProductPoint,
    geom: GammaGeometry,
    maps: Sequence[LinearMap],
) -> SeparatorSample:
    """Assemble the separator at ``p_hat``.

    Tiny negative values of ``phi(p_hat)`` are clamped to zero. A clearly
    negative value while every pair passed the relative-error test means an
    operator broke its contract, and raises :class:`SeparatorError`.
    """
    pairs = tuple(pairs)
    grad_z, grad_w, nsq = gradient(pairs, geom, maps)
    phi = phi_eval(pairs, p_hat, maps)
    if phi < 0.0:
        scale = _phi_scale(pairs, p_hat, maps)
        if phi >= -PHI_CLAMP_RTOL * scale:
            phi = 0.0
        elif all(pr.strict for pr in pairs):
            raise SeparatorError(
                f"separator value {phi:.3e} < 0 at the extrapolated point "
                f"(scale {scale:.3e}) although all resolvent pairs are valid"
            )
    return SeparatorSample(pairs, grad_z, tuple(grad_w), nsq, phi, geom.gamma)


def theta(sample: SeparatorSample) -> float:
    """Step length ``max(0, phi(p_hat)) / ||grad phi||_gamma^2``."""
    if not sample.grad_norm_sq_gamma > 0.0:
        raise SeparatorError("zero separator gradient: the Step-3 stop should have fired")
    return max(0.0, sample.phi_at_hat) / sample.grad_norm_sq_gamma


def lower_bound_certificate(
    sample: SeparatorSample,
    sigma: float,
    rho_lo: float,
    rho_hi: float,
    z_hat: np.ndarray,
    w_hat: Sequence[np.ndarray],
    maps: Sequence[LinearMap],
) -> float:
    """Guaranteed lower bound on ``phi(p_hat)``.

    ``(1 - sigma^2) min(1/rho_hi, rho_lo) / 2 * sum_i (||G_i z_hat - x_i||^2
    + ||w_hat_i - y_i||^2)``, with ``w_hat_n = -sum_i G_i^* w_hat_i``.
    """
    w_hat = list(w_hat)
    if len(w_hat) == len(sample.pairs) - 1:
        wn = -sum((G.adjoint(wi) for G, wi in zip(maps[:-1], w_hat)), np.zeros_like(z_hat))
        w_hat.append(wn)
    s = 0.0
    for pr, G, wi in zip(sample.pairs, maps, w_hat):
        a = G(z_hat) - pr.x
        b = wi - pr.y
        s += float(a @ a) + float(b @ b)
    return 0.5 * (1.0 - sigma**2) * min(1.0 / rho_hi, rho_lo) * s


def descent_constant(
    n: int,
    max_map_norm: float,
    sigma: float,
    rho_lo: float,
    rho_hi: float,
    gamma: float,
) -> float:
    """A constant ``c > 0`` with ``phi(p_hat) >= c ||grad phi||_gamma^2``.

    Obtained by bounding ``||grad phi||_gamma^2 <= K sum_i (||G_i z_hat - x_i||^2
    + ||w_hat_i - y_i||^2)`` and dividing the certificate constant by ``K``.
    ``max_map_norm`` is ``max_i ||G_i||`` over all n maps (at least 1).
    """
    m2 = max(max_map_norm, 1.0) ** 2
    k = max(n * m2 / gamma, 2.0 * max(1.0, (n - 1) * m2))
    return 0.5 * (1.0 - sigma**2) * min(1.0 / rho_hi, rho_lo) / k
