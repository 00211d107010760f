"""Deterministic stratified samples of boxes, sublevel sets and level shells.

Sublevel sets are sampled in (level, direction) coordinates: a simplex
lattice of directions in the closed orthant (boundary directions nudged
inside by ``EDGE``) and a uniform grid of V-levels along each ray.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

EDGE = 1e-12
GEOMETRIC_TAIL = 10


def axis_grid(cap, n):
    """Right-closed uniform grid ``cap * k / n``, k = 1..n."""
    return cap * np.arange(1, n + 1) / n


def box_points(N, cap, n):
    g = axis_grid(cap, n)
    return np.stack(np.meshgrid(*([g] * N), indexing="ij"), axis=-1).reshape(-1, N)


def directions(N, n):
    """Unit directions from the simplex lattice with spacing 1/n."""
    if N == 1:
        return np.ones((1, 1))
    pts = [c for c in itertools.product(range(n + 1), repeat=N - 1) if sum(c) <= n]
    lat = np.array([list(c) + [n - sum(c)] for c in pts], dtype=float) / n
    lat = np.maximum(lat, EDGE)
    return lat / np.linalg.norm(lat, axis=1, keepdims=True)


def level_points(V, levels, dirs, cap):
    """Points ``s d`` with V(s d) = level for every (level, direction), inside the box."""
    levels = np.asarray(levels, dtype=float)
    s = V.ray_scale(dirs[None, :, :], levels[:, None])  # (L, D)
    pts = s[..., None] * dirs[None, :, :]
    pts = pts.reshape(-1, dirs.shape[1])
    keep = np.all(np.isfinite(pts), axis=1) & np.all(pts <= cap, axis=1) & np.all(pts > 0, axis=1)
    return pts[keep]


@dataclass(frozen=True)
class SublevelSampler:
    """Sample of ``{x > 0 : V(x) < r}`` (or ``<= r`` when ``closed``) inside the box cap.

    Each ``depth`` refinement doubles the level and direction counts.  A
    geometric tail ``r 2^-j`` (j = 1..GEOMETRIC_TAIL) keeps the neighbourhood
    of 0 represented at every level.
    """

    V: object
    dim: int
    r: float
    cap: float = 10.0
    n_levels: int = 32
    n_dirs: int = 16
    closed: bool = False
    depth: int = 0

    def levels(self):
        n = self.n_levels * 2**self.depth
        lv = self.r * np.arange(1, n + 1) / n
        lv = np.union1d(self.r * 2.0 ** -np.arange(1, GEOMETRIC_TAIL + 1), lv)
        if not self.closed:
            lv[-1] = self.r * (1.0 - 1e-9)
        return lv

    def points(self):
        dirs = directions(self.dim, self.n_dirs * 2**self.depth)
        pts = level_points(self.V, self.levels(), dirs, self.cap)
        v = self.V(pts)
        # the top level of a closed set may round a few ulps above r
        ok = v <= self.r * (1.0 + 1e-12) if self.closed else v < self.r
        return pts[ok & (v > 0)]


def sublevel_points(V, N, r, cap=10.0, n_levels=32, n_dirs=16, closed=False, depth=0):
    return SublevelSampler(V, N, r, cap, n_levels, n_dirs, closed, depth).points()


def shell_points(V, N, lo, hi, cap=10.0, n_levels=9, n_dirs=16):
    """Points on the closed level band ``lo <= V <= hi``."""
    lv = np.linspace(lo, hi, n_levels)
    lv = lv[lv > 0]
    return level_points(V, lv, directions(N, n_dirs), cap)


def sample_times(model, t_tail=0.0, n_t=16, span=10.0):
    """Time grid standing in for ``t -> infinity``.

    One period for periodic models, a single time for autonomous family
    models, ``[t_tail, t_tail + span]`` otherwise.
    """
    if model.period is not None:
        return t_tail + np.linspace(0.0, model.period, n_t, endpoint=False)
    if model.family is not None:
        return np.array([float(t_tail)])
    return t_tail + np.linspace(0.0, span, n_t)
