"""Guiding functions V: positive on the open cone, vanishing at the origin."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class GuidingFunction:
    """Value and (region-selected) gradient of a guiding function.

    ``degree`` is the positive-homogeneity degree when V(s x) = s**degree V(x);
    samplers then place points on level sets in closed form.  For piecewise V
    the gradient callable is the region selector.
    """

    label: str
    value: Callable
    gradient: Callable
    smooth: bool = True
    degree: Optional[float] = None

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    def grad(self, x):
        return self.gradient(np.asarray(x, dtype=float))

    def ray_scale(self, d, level):
        """Scale s >= 0 with V(s d) = level, for directions ``d`` of shape (k, N)."""
        d = np.asarray(d, dtype=float)
        level = np.asarray(level, dtype=float)
        vd = self.value(d)
        if self.degree is not None:
            with np.errstate(divide="ignore"):
                return np.where(vd > 0, (level / vd) ** (1.0 / self.degree), np.inf)
        # bisection for non-homogeneous V; assumes V increasing along rays
        lo = np.zeros(np.broadcast_shapes(vd.shape, level.shape))
        hi = np.ones_like(lo)
        for _ in range(200):
            grow = self.value(hi[..., None] * d) < level
            if not np.any(grow):
                break
            hi = np.where(grow, 2 * hi, hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self.value(mid[..., None] * d) < level
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def _linear_value(x):
    return np.sum(x, axis=-1)


def _linear_grad(x):
    return np.ones_like(x)


def _half_square_value(x):
    return 0.5 * np.sum(x * x, axis=-1)


def _half_square_grad(x):
    return x.copy()


def _sq_value(x):
    return np.sum(x * x, axis=-1)


def _sq_grad(x):
    return 2.0 * x


def _min_value(x):
    return np.min(x, axis=-1)


def _min_grad(x):
    # first minimizing index wins, so the diagonal x1 == x2 selects (1, 0)
    idx = np.argmin(x, axis=-1)
    g = np.zeros_like(x)
    np.put_along_axis(g, idx[..., None], 1.0, axis=-1)
    return g


def linear() -> GuidingFunction:
    """V(x) = x_1 + ... + x_N (V(x) = x in the scalar case)."""
    return GuidingFunction("linear", _linear_value, _linear_grad, True, 1.0)


def half_square() -> GuidingFunction:
    """V(x) = |x|^2 / 2."""
    return GuidingFunction("half_square", _half_square_value, _half_square_grad, True, 2.0)


def squared_norm() -> GuidingFunction:
    """V(x) = |x|^2."""
    return GuidingFunction("squared_norm", _sq_value, _sq_grad, True, 2.0)


def min_coordinate() -> GuidingFunction:
    """V(x) = min_j x_j, gradient e_j on the region where x_j is the (first) minimum."""
    return GuidingFunction("min", _min_value, _min_grad, False, 1.0)


BUILTIN_GUIDING = {
    "linear": linear,
    "half_square": half_square,
    "squared_norm": squared_norm,
    "min": min_coordinate,
}


def get_guiding(name: str) -> GuidingFunction:
    try:
        return BUILTIN_GUIDING[name]()
    except KeyError:
        raise DomainError(f"unknown guiding function {name!r}; choose from {sorted(BUILTIN_GUIDING)}") from None


def fd_gradient(V: GuidingFunction, x, eps=1e-6):
    """Central finite-difference gradient, used as an independent check of ``V.grad``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[j] = eps
        g[..., j] = (V(x + e) - V(x - e)) / (2 * eps)
    return g
