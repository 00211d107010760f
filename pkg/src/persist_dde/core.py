"""Model and trajectory types; fixed-step RK4 method-of-steps integration with Hermite dense output."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from . import _backend
from .errors import BlowUpError, DomainError, PositivityError, RangeError, StepSizeError

NEG_TOL = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """A delay system ``x'(t) = f(t, x(t), x(t - tau))``.

    ``rhs`` must broadcast: ``x`` and ``y`` of shape ``(..., N)`` and ``t``
    broadcastable to ``(...)``, returning ``(..., N)``.  ``cone`` marks models
    whose domain is the nonnegative cone (all population models); ``family``
    is set for built-in models with tabulable coefficients.
    """

    dim: int
    tau: float
    rhs: Callable
    period: Optional[float] = None
    label: str = ""
    cone: bool = True
    family: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (isinstance(self.dim, (int, np.integer)) and self.dim > 0):
            raise DomainError(f"dimension must be a positive integer, got {self.dim!r}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise DomainError(f"delay must be positive and finite, got {self.tau!r}")
        if self.period is not None and not (self.period > 0 and math.isfinite(self.period)):
            raise DomainError(f"period must be positive and finite, got {self.period!r}")


def _as_state(v, dim, name):
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape[-1] != dim:
        raise DomainError(f"{name} has trailing dimension {v.shape[-1]}, expected {dim}")
    return v


def evaluate_rhs(model: ModelSpec, t, x, y):
    """``f(t, x, y)`` with domain checks; accepts batched states."""
    x = _as_state(x, model.dim, "x")
    y = _as_state(y, model.dim, "y")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(t))):
        raise DomainError("non-finite argument")
    if model.cone and (np.any(x < 0) or np.any(y < 0)):
        raise DomainError("state outside the nonnegative cone")
    if np.any(np.asarray(t) < 0):
        raise DomainError("negative time")
    return np.asarray(model.rhs(t, x, y), dtype=float)


def periodicity_defect(model: ModelSpec, n_t=16, n_x=5, cap=3.0) -> float:
    """max |f(t + T, x, y) - f(t, x, y)| over a small sample grid (0 when T is absent)."""
    if model.period is None:
        return 0.0
    T = model.period
    g = np.linspace(0.0, cap, n_x)
    pts = np.stack(np.meshgrid(*([g] * (2 * model.dim)), indexing="ij"), axis=-1).reshape(-1, 2 * model.dim)
    x, y = pts[:, : model.dim], pts[:, model.dim :]
    worst = 0.0
    for t in np.linspace(0.0, T, n_t, endpoint=False):
        diff = model.rhs(t + T, x, y) - model.rhs(t, x, y)
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


class HistorySegment:
    """A continuous function on ``[-tau, 0]`` given by M+1 uniform nodes.

    With ``slopes`` the interpolant is the cubic Hermite spline through the
    nodal values and slopes; otherwise a not-a-knot cubic spline.  For
    ``nonneg`` segments evaluations are clipped at zero so the interpolant
    never leaves the cone.
    """

    def __init__(self, tau, values, slopes=None, nonneg=True):
        tau = float(tau)
        if not (tau > 0 and math.isfinite(tau)):
            raise DomainError(f"delay must be positive, got {tau}")
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 3:
            raise DomainError("a history segment needs at least 3 nodes (M >= 2)")
        if not np.all(np.isfinite(values)):
            raise DomainError("non-finite history value")
        if nonneg and np.any(values < 0):
            raise DomainError("history values must be componentwise nonnegative")
        self.tau = tau
        self.nonneg = nonneg
        self.M = values.shape[0] - 1
        self.grid = np.linspace(-tau, 0.0, self.M + 1)
        self.values = values
        self.values.flags.writeable = False
        if slopes is not None:
            slopes = np.array(slopes, dtype=float).reshape(values.shape)
            slopes.flags.writeable = False
            self._interp = CubicHermiteSpline(self.grid, values, slopes, axis=0)
        elif np.all(values == values[0]):
            self._interp = None
        else:
            self._interp = CubicSpline(self.grid, values, axis=0)
        self.slopes = slopes

    @property
    def dim(self):
        return self.values.shape[1]

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s_arr)
        slack = 1e-12 * self.tau
        if np.any(flat < -self.tau - slack) or np.any(flat > slack) or not np.all(np.isfinite(flat)):
            raise RangeError(f"history evaluated outside [-{self.tau}, 0]")
        flat = np.clip(flat, -self.tau, 0.0)
        if self._interp is None:
            out = np.broadcast_to(self.values[0], flat.shape + (self.dim,)).copy()
        else:
            out = self._interp(flat)
            # nodes reproduce stored values exactly
            k = np.rint((flat + self.tau) / self.tau * self.M).astype(int)
            k = np.clip(k, 0, self.M)
            hit = self.grid[k] == flat
            out[hit] = self.values[k[hit]]
            if self.nonneg:
                np.maximum(out, 0.0, out=out)
        return out[0] if s_arr.ndim == 0 else out

    def __repr__(self):
        return f"HistorySegment(tau={self.tau}, M={self.M}, dim={self.dim})"


def make_history_constant(c, tau, M=64) -> HistorySegment:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise DomainError("constant history must be finite and nonnegative")
    if M < 2:
        raise DomainError("M must be at least 2")
    return HistorySegment(tau, np.tile(c, (M + 1, 1)))


def make_history(fn, tau, M=64, nonneg=True) -> HistorySegment:
    """Sample a callable ``s -> state`` on the uniform node grid of ``[-tau, 0]``."""
    grid = np.linspace(-tau, 0.0, M + 1)
    vals = np.array([np.atleast_1d(fn(s)) for s in grid], dtype=float)
    return HistorySegment(tau, vals, nonneg=nonneg)


@dataclass(frozen=True)
class StepControl:
    """Fixed-step controls; the step is shrunk so that ``tau / h`` is an integer."""

    h: Optional[float] = None
    cap: float = 1e8
    min_step: float = 1e-12
    backend: str = "auto"  # auto | compiled | python | callable

    def resolve(self, tau):
        h = tau / 64 if self.h is None else float(self.h)
        if not (h > 0 and math.isfinite(h)):
            raise StepSizeError(f"invalid step {h}")
        m = max(1, int(math.ceil(tau / h - 1e-9)))
        h = tau / m
        if h < self.min_step:
            raise StepSizeError(f"step {h} below minimum {self.min_step}")
        return h, m


@dataclass(frozen=True)
class Trajectory:
    model: ModelSpec
    history: HistorySegment
    t_end: float
    mesh: np.ndarray
    states: np.ndarray
    slopes: np.ndarray
    h: float
    steps_per_delay: int
    backend: str

    @property
    def ladder(self):
        """Discontinuity ladder ``{0, tau, 2 tau, ...}`` as mesh points."""
        return self.mesh[:: self.steps_per_delay]

    def __call__(self, t):
        return eval_at(self, t)

    def derivative(self, t):
        """Derivative of the dense output (right derivative at mesh points)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < 0) or np.any(t_arr > self.t_end):
            raise RangeError("derivative only available on [0, t_end]")
        k, theta, hk = self._locate(t_arr)
        x0, x1 = self.states[k], self.states[k + 1]
        s0, s1 = self.slopes[k], self.slopes[k + 1]
        th = theta[:, None]
        hk = hk[:, None]
        d00 = 6 * th**2 - 6 * th
        d10 = 3 * th**2 - 4 * th + 1
        d01 = -6 * th**2 + 6 * th
        d11 = 3 * th**2 - 2 * th
        out = (d00 * x0 + d01 * x1) / hk + d10 * s0 + d11 * s1
        return out[0] if np.ndim(t) == 0 else out

    def _locate(self, t_arr):
        k = np.searchsorted(self.mesh, t_arr, side="right") - 1
        k = np.clip(k, 0, len(self.mesh) - 2)
        hk = self.mesh[k + 1] - self.mesh[k]
        theta = (t_arr - self.mesh[k]) / hk
        return k, theta, hk


def _hermite(theta, hk, x0, s0, x1, s1):
    om = 1.0 - theta
    h00 = (1.0 + 2.0 * theta) * om * om
    h10 = theta * om * om
    h01 = theta * theta * (3.0 - 2.0 * theta)
    h11 = theta * theta * (theta - 1.0)
    return h00 * x0 + h10 * hk * s0 + h01 * x1 + h11 * hk * s1


def eval_at(traj: Trajectory, t):
    """State at time(s) ``t`` in ``[-tau, t_end]``; history for ``t <= 0``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    tau = traj.model.tau
    slack = 1e-12 * max(1.0, traj.t_end)
    if np.any(t_arr < -tau - slack) or np.any(t_arr > traj.t_end + slack) or not np.all(np.isfinite(t_arr)):
        raise RangeError(f"t outside [-{tau}, {traj.t_end}]")
    t_arr = np.clip(t_arr, -tau, traj.t_end)
    out = np.empty((t_arr.size, traj.model.dim))
    past = t_arr <= 0
    if np.any(past):
        out[past] = traj.history(np.minimum(t_arr[past], 0.0))
    fut = ~past
    if np.any(fut):
        k, theta, hk = traj._locate(t_arr[fut])
        th = theta[:, None]
        out[fut] = _hermite(
            th, hk[:, None], traj.states[k], traj.slopes[k], traj.states[k + 1], traj.slopes[k + 1]
        )
    return out[0] if np.ndim(t) == 0 else out


def _build_mesh(t_end, h):
    n_full = int(math.floor(t_end / h + 1e-9))
    rem = t_end - n_full * h
    mesh = np.arange(n_full + 1) * h
    if rem > 1e-9 * h:
        mesh = np.append(mesh, t_end)
        h_last = rem
    else:
        mesh[-1] = t_end if n_full > 0 else mesh[-1]
        h_last = h
    return mesh, h_last


def _stage_times(mesh):
    t0 = mesh[:-1]
    hn = np.diff(mesh)
    return np.stack([t0, t0 + 0.5 * hn, mesh[1:]], axis=1)


def _raise_status(status, step, mesh, model):
    t = float(mesh[min(step + 1, len(mesh) - 1)])
    if status == 1:
        raise BlowUpError(f"state magnitude exceeded cap near t={t:.6g} ({model.label})", t=t)
    if status == 2:
        raise PositivityError(f"negative state component near t={t:.6g} ({model.label})", t=t)


def integrate(model: ModelSpec, history: HistorySegment, t_end, step: StepControl | None = None) -> Trajectory:
    """Integrate on ``[0, t_end]`` with classical RK4 by the method of steps.

    The step divides ``tau`` exactly, so every step boundary set contains the
    discontinuity ladder.  Delayed values come from the history on
    ``[0, tau]`` and from the Hermite dense output of earlier steps after.
    """
    step = step or StepControl()
    t_end = float(t_end)
    if not (t_end > 0 and math.isfinite(t_end)):
        raise DomainError(f"t_end must be positive and finite, got {t_end}")
    if abs(history.tau - model.tau) > 1e-12 * model.tau:
        raise DomainError(f"history delay {history.tau} does not match model delay {model.tau}")
    if history.dim != model.dim:
        raise DomainError("history dimension does not match model")
    h, m = step.resolve(model.tau)
    mesh, h_last = _build_mesh(t_end, h)
    if h_last < step.min_step:
        raise StepSizeError(f"final step {h_last} below minimum")
    n_steps = len(mesh) - 1
    stages = _stage_times(mesh)
    n_hist = max(1, min(m, n_steps))
    hist = history(stages[:n_hist] - model.tau)  # (n_hist, 3, N)
    x0 = np.array(history(0.0), dtype=float)
    N = model.dim
    X = np.zeros((n_steps + 1, N))
    S = np.zeros((n_steps + 1, N))

    backend = step.backend
    if backend == "auto":
        backend = _backend.BACKEND if model.family is not None and N <= 8 else "callable"
    if backend in ("compiled", "python"):
        if model.family is None:
            raise DomainError(f"backend {backend!r} requires a family model")
        kernel = _backend.KERNELS.get(backend)
        if kernel is None:
            raise DomainError("compiled kernel is not available")
        A, B, P = model.family.tabulate(stages)
        status, done = kernel(
            h, h_last, m, x0, np.ascontiguousarray(hist),
            np.ascontiguousarray(A), np.ascontiguousarray(B), np.ascontiguousarray(P),
            bool(model.cone), float(step.cap), X, S,
        )
        _raise_status(status, done, mesh, model)
    elif backend == "callable":
        _integrate_callable(model, h, h_last, m, x0, hist, stages, step.cap, X, S, mesh)
    else:
        raise DomainError(f"unknown backend {backend!r}")

    for arr in (mesh, X, S):
        arr.flags.writeable = False
    return Trajectory(model, history, t_end, mesh, X, S, h, m, backend)


def _guard(x, model, cap, t):
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > cap):
        raise BlowUpError(f"state magnitude exceeded cap near t={t:.6g} ({model.label})", t=t)
    if model.cone and np.any(x < 0):
        if np.all(x > -NEG_TOL):
            x = np.maximum(x, 0.0)
        else:
            raise PositivityError(f"negative state component near t={t:.6g} ({model.label})", t=t)
    return x


def _integrate_callable(model, h, h_last, m, x0, hist, stages, cap, X, S, mesh):
    f = model.rhs
    n_steps = len(stages)
    X[0] = x0
    S[0] = f(0.0, x0, _guard(hist[0, 0], model, cap, 0.0))
    for n in range(n_steps):
        hn = h_last if n == n_steps - 1 else h
        t0, tm, t1 = stages[n]
        if n < m:
            ys = hist[n]
        else:
            k = n - m
            ys = [
                _hermite(c * hn / h, h, X[k], S[k], X[k + 1], S[k + 1]) for c in (0.0, 0.5, 1.0)
            ]
        y1 = _guard(ys[1], model, cap, tm)
        y2 = _guard(ys[2], model, cap, t1)
        xn = X[n]
        k1 = S[n]
        k2 = f(tm, _guard(xn + 0.5 * hn * k1, model, cap, tm), y1)
        k3 = f(tm, _guard(xn + 0.5 * hn * k2, model, cap, tm), y1)
        k4 = f(t1, _guard(xn + hn * k3, model, cap, t1), y2)
        X[n + 1] = _guard(xn + hn / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), model, cap, t1)
        S[n + 1] = f(t1, X[n + 1], y2)


def segment_at(traj: Trajectory, t, M=None) -> HistorySegment:
    """The state ``x_t`` as a history segment carrying dense-output slopes.

    With ``M`` defaulting to the steps per delay, nodes coincide with mesh
    points whenever ``t`` is a mesh point, so restarting reproduces the run.
    """
    M = traj.steps_per_delay if M is None else M
    tau = traj.model.tau
    if t < tau - 1e-12 * tau:
        raise RangeError("segment_at requires t >= tau")
    nodes = t - tau + np.linspace(0.0, tau, M + 1)
    nodes[-1] = t
    vals = eval_at(traj, nodes)
    slopes = traj.derivative(np.clip(nodes, 0.0, traj.t_end))
    # slope at a mesh point: the stored f value, which is the right derivative
    return HistorySegment(tau, vals, slopes=slopes, nonneg=traj.model.cone)
