"""Product Hilbert space with the gamma-weighted geometry.

A point ``p = (z, w_1, ..., w_{n-1})`` lives in ``H_0 x H_1 x ... x H_{n-1}``
with inner product ``gamma <z, z'> + sum_i <w_i, w'_i>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DimensionMismatchError(ValueError):
    """Raised when two product points (or a point and a geometry) disagree."""

    def __init__(self, block: int, expected, got):
        self.block = block
        self.expected = expected
        self.got = got
        super().__init__(
            f"dimension mismatch in block {block}: expected {expected}, got {got}"
        )


def _frozen(v) -> np.ndarray:
    a = np.array(v, dtype=np.float64, copy=True).reshape(-1)
    a.flags.writeable = False
    return a


class ProductPoint:
    """Immutable point ``(z, w_1, ..., w_{n-1})``.

    Blocks are stored separately so linear maps act on their natural shapes.
    Arithmetic returns fresh points.
    """

    __slots__ = ("z", "w")

    def __init__(self, z, w: Sequence = ()):
        z = _frozen(z)
        w = tuple(_frozen(wi) for wi in w)
        if not np.all(np.isfinite(z)):
            raise ValueError("non-finite entry in block 0")
        for i, wi in enumerate(w, start=1):
            if not np.all(np.isfinite(wi)):
                raise ValueError(f"non-finite entry in block {i}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", w)

    def __setattr__(self, name, value):
        raise AttributeError("ProductPoint is immutable")

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> "ProductPoint":
        return cls(np.zeros(dims[0]), [np.zeros(d) for d in dims[1:]])

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.z.size,) + tuple(wi.size for wi in self.w)

    @property
    def blocks(self) -> tuple[np.ndarray, ...]:
        return (self.z,) + self.w

    def _check(self, other: "ProductPoint"):
        if len(self.w) != len(other.w):
            raise DimensionMismatchError(len(self.w), len(self.w) + 1, len(other.w) + 1)
        for i, (a, b) in enumerate(zip(self.blocks, other.blocks)):
            if a.size != b.size:
                raise DimensionMismatchError(i, a.size, b.size)

    def __add__(self, other: "ProductPoint") -> "ProductPoint":
        self._check(other)
        return ProductPoint(self.z + other.z, [a + b for a, b in zip(self.w, other.w)])

    def __sub__(self, other: "ProductPoint") -> "ProductPoint":
        self._check(other)
        return ProductPoint(self.z - other.z, [a - b for a, b in zip(self.w, other.w)])

    def __mul__(self, t: float) -> "ProductPoint":
        return ProductPoint(t * self.z, [t * wi for wi in self.w])

    __rmul__ = __mul__

    def __neg__(self) -> "ProductPoint":
        return self * -1.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProductPoint) or self.dims != other.dims:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.blocks, other.blocks))

    def __hash__(self):
        return hash(tuple(a.tobytes() for a in self.blocks))

    def __repr__(self) -> str:
        return f"ProductPoint(dims={self.dims})"


@dataclass(frozen=True)
class GammaGeometry:
    """Weight ``gamma`` on the z-block and the block dimensions ``(d_0, ..., d_{n-1})``."""

    gamma: float
    dims: tuple[int, ...]

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"all block dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    def check(self, p: ProductPoint):
        if len(p.dims) != len(self.dims):
            raise DimensionMismatchError(
                min(len(p.dims), len(self.dims)), len(self.dims), len(p.dims)
            )
        for i, (a, b) in enumerate(zip(self.dims, p.dims)):
            if a != b:
                raise DimensionMismatchError(i, a, b)

    def zeros(self) -> ProductPoint:
        return ProductPoint.zeros(self.dims)


def inner_gamma(p: ProductPoint, q: ProductPoint, geom: GammaGeometry) -> float:
    geom.check(p)
    geom.check(q)
    s = geom.gamma * float(p.z @ q.z)
    for a, b in zip(p.w, q.w):
        s += float(a @ b)
    return s


def norm_gamma(p: ProductPoint, geom: GammaGeometry) -> float:
    geom.check(p)
    # rescale by the largest entry so squares neither underflow nor overflow
    scale = max(float(np.max(np.abs(b), initial=0.0)) for b in p.blocks)
    if scale == 0.0 or not np.isfinite(scale):
        return float(np.sqrt(max(inner_gamma(p, p, geom), 0.0)))
    z = p.z / scale
    ssq = geom.gamma * float(z @ z) + sum(float((b / scale) @ (b / scale)) for b in p.w)
    return scale * float(np.sqrt(ssq))


def axpy(a: float, p: ProductPoint, q: ProductPoint) -> ProductPoint:
    """Return ``a * p + q`` blockwise."""
    p._check(q)
    return ProductPoint(a * p.z + q.z, [a * x + y for x, y in zip(p.w, q.w)])
