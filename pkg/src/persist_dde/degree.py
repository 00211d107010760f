"""Brouwer degree of vector fields in dimensions 1 and 2.

In one dimension the degree over a union of intervals comes from boundary
signs.  In two dimensions it is the total winding number of the field along
the positively oriented boundary loops, with each boundary piece subdivided
until the angle swept per edge is below pi/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BoundaryZeroError, UnresolvedDegreeError, UnsupportedShapeError


@dataclass(frozen=True)
class Intervals:
    """Disjoint open intervals ``(a, b)`` on the line."""

    components: tuple

    def __post_init__(self):
        comps = tuple((float(a), float(b)) for a, b in self.components)
        for a, b in comps:
            if not a < b:
                raise UnsupportedShapeError(f"empty interval ({a}, {b})")
        object.__setattr__(self, "components", comps)

    @property
    def euler_characteristic(self):
        return len(self.components)


@dataclass(frozen=True)
class Loop:
    """A closed curve made of pieces ``[0, 1] -> R^2`` traversed in order."""

    pieces: tuple

    def point(self, k, s):
        return np.asarray(self.pieces[k](s), dtype=float)


@dataclass(frozen=True)
class PlanarRegion:
    """Bounded planar region given by its boundary loops.

    Outer loops run counterclockwise and holes clockwise.
    """

    loops: tuple
    euler_characteristic: int


def segment(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return lambda s: p + s * (q - p)


def arc(center, radius, a0, a1):
    c = np.asarray(center, dtype=float)
    return lambda s: c + radius * np.array([math.cos(a0 + s * (a1 - a0)), math.sin(a0 + s * (a1 - a0))])


def polygon(vertices) -> Loop:
    v = [np.asarray(p, dtype=float) for p in vertices]
    return Loop(tuple(segment(v[i], v[(i + 1) % len(v)]) for i in range(len(v))))


def circle(center, radius, clockwise=False) -> Loop:
    if clockwise:
        return Loop((arc(center, radius, 0.0, -math.pi), arc(center, radius, -math.pi, -2 * math.pi)))
    return Loop((arc(center, radius, 0.0, math.pi), arc(center, radius, math.pi, 2 * math.pi)))


def disk(center, radius) -> PlanarRegion:
    return PlanarRegion((circle(center, radius),), 1)


def annulus(center, r_in, r_out) -> PlanarRegion:
    return PlanarRegion((circle(center, r_out), circle(center, r_in, clockwise=True)), 0)


def _angle(u, v):
    # signed angle from u to v in (-pi, pi]
    return math.atan2(u[0] * v[1] - u[1] * v[0], u[0] * v[0] + u[1] * v[1])


def _winding_piece(g, piece, resolution, tol, max_depth):
    total = 0.0
    s_nodes = np.linspace(0.0, 1.0, resolution + 1)
    cache = {}

    def val(s):
        if s not in cache:
            w = np.asarray(g(np.asarray(piece(s), dtype=float)), dtype=float)
            if not np.all(np.isfinite(w)) or np.hypot(w[0], w[1]) < tol:
                raise BoundaryZeroError(f"field vanishes on the boundary near {piece(s)}")
            cache[s] = w
        return cache[s]

    stack = [(s_nodes[i], s_nodes[i + 1], 0) for i in range(resolution)][::-1]
    while stack:
        a, b, depth = stack.pop()
        d = _angle(val(a), val(b))
        if abs(d) < math.pi / 2:
            total += d
            continue
        if depth >= max_depth:
            raise UnresolvedDegreeError("boundary refinement cap reached")
        mid = 0.5 * (a + b)
        stack.append((mid, b, depth + 1))
        stack.append((a, mid, depth + 1))
    return total


def winding_number(g, loop: Loop, resolution=64, tol=1e-12, max_depth=40):
    total = sum(_winding_piece(g, p, resolution, tol, max_depth) for p in loop.pieces)
    return total / (2 * math.pi)


def brouwer_degree(g: Callable, omega, resolution=64, tol=1e-12, max_depth=40) -> int:
    """deg(g, omega, 0) for ``omega`` an :class:`Intervals`, a :class:`PlanarRegion`
    or a single counterclockwise :class:`Loop` bounding a simply connected region."""
    if isinstance(omega, Intervals):
        deg = 0
        for a, b in omega.components:
            ga = float(np.ravel(g(np.array([a])))[0])
            gb = float(np.ravel(g(np.array([b])))[0])
            if abs(ga) < tol or abs(gb) < tol:
                raise BoundaryZeroError(f"field vanishes at an endpoint of ({a}, {b})")
            deg += (int(np.sign(gb)) - int(np.sign(ga))) // 2
        return deg
    if isinstance(omega, Loop):
        omega = PlanarRegion((omega,), 1)
    if isinstance(omega, PlanarRegion):
        w = sum(winding_number(g, lp, resolution, tol, max_depth) for lp in omega.loops)
        d = int(round(w))
        if abs(w - d) > 1e-6:
            raise UnresolvedDegreeError(f"non-integer winding {w}")
        return d
    raise UnsupportedShapeError(f"unsupported domain {type(omega).__name__}")


def cone_region(V, N, r0, R, cap=None, cone=True):
    """Catalog of annular regions ``{r0 < V < R}`` and their Euler characteristic.

    One dimension: a single interval.  Two dimensions inside the closed cone:
    quarter annulus (squared norms), trapezoid (linear V) or the square
    ``(r0, R)^2`` for V = min, the bounded part of ``{r0 < min < R}``; all
    contractible.  Without the cone restriction only the full annulus of a
    squared norm is catalogued (chi = 0).
    """
    if not 0 < r0 < R:
        raise UnsupportedShapeError("need 0 < r0 < R")
    if N == 1:
        if not cone:
            raise UnsupportedShapeError("one-dimensional regions are catalogued on the half line only")
        d = np.ones((1, 1))
        a = float(V.ray_scale(d, r0)[0])
        b = float(V.ray_scale(d, R)[0])
        return Intervals(((a, b),))
    if N != 2:
        raise UnsupportedShapeError("degree certificates are limited to N <= 2")
    label = V.label
    if label in ("squared_norm", "half_square"):
        scale = 1.0 if label == "squared_norm" else 2.0
        ri, ro = math.sqrt(scale * r0), math.sqrt(scale * R)
        if not cone:
            return annulus((0.0, 0.0), ri, ro)
        loop = Loop((
            arc((0.0, 0.0), ro, 0.0, math.pi / 2),
            segment((0.0, ro), (0.0, ri)),
            arc((0.0, 0.0), ri, math.pi / 2, 0.0),
            segment((ri, 0.0), (ro, 0.0)),
        ))
        return PlanarRegion((loop,), 1)
    if not cone:
        raise UnsupportedShapeError(f"no catalogued full-plane region for V = {label}")
    if label == "linear":
        return PlanarRegion((polygon([(r0, 0.0), (R, 0.0), (0.0, R), (0.0, r0)]),), 1)
    if label == "min":
        return PlanarRegion((polygon([(r0, r0), (R, r0), (R, R), (r0, R)]),), 1)
    raise UnsupportedShapeError(f"no catalogued region for V = {label}")
