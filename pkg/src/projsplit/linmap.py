"""Bounded linear maps ``G: H_0 -> H_i`` with adjoints."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class LinearMap:
    in_dim: int
    out_dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    norm_bound: float
    is_identity: bool = False

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.apply(v)


def identity(d: int) -> LinearMap:
    return LinearMap(d, d, lambda v: v, lambda u: u, 1.0, is_identity=True)


def from_matrix(M) -> LinearMap:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    nb = float(np.linalg.norm(M, 2)) if M.size else 0.0
    return LinearMap(M.shape[1], M.shape[0], lambda v: M @ v, lambda u: M.T @ u, nb)
