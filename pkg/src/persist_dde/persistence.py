"""Trajectory-based persistence classification, uniform-persistence bounds and attractor certificates."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import HistorySegment, StepControl, Trajectory, eval_at, integrate, make_history_constant
from .errors import DomainError
from .guiding.checks import MARGIN, phi_star
from .guiding.report import FAILS, HOLDS, UNDETERMINED, HypothesisReport

PERSIST_MARGIN = 1e-4
SETTLE_TOL = 0.05


def max_workers():
    env = os.environ.get("PERSIST_DDE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def parallel_map(fn, items):
    """Order-preserving map over a thread pool capped by ``PERSIST_DDE_THREADS``."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def default_ensemble(model, n=20, lo=0.01, hi=5.0, M=64):
    """``n`` constant histories log-spaced in value on [lo, hi], all components equal."""
    vals = np.logspace(math.log10(lo), math.log10(hi), n)
    return [make_history_constant(np.full(model.dim, v), model.tau, M) for v in vals]


@dataclass(frozen=True)
class PersistenceConfig:
    """``rho`` is ``x_t -> V(x_t(0))``; the tail window is ``[w t_end, t_end]``."""

    V: object
    ensemble: Sequence[HistorySegment]
    t_end: float = 100.0
    tail_fraction: float = 0.8
    margin: float = PERSIST_MARGIN
    epsilon: Optional[float] = None
    step: StepControl = field(default_factory=StepControl)

    def __post_init__(self):
        if not 0 < self.tail_fraction < 1:
            raise DomainError("tail fraction must lie in (0, 1)")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise DomainError("horizon must be positive and finite")
        for h in self.ensemble:
            if np.any(h.values < 0) or not np.any(h.values > 0):
                raise DomainError("ensemble histories must be nonnegative and nonzero")


def _tail_values(traj: Trajectory, V, w, horizon=None):
    horizon = traj.t_end if horizon is None else horizon
    start = w * horizon
    mesh = traj.mesh
    sel = mesh[(mesh >= start) & (mesh <= horizon)]
    pts = [start, horizon] + list(sel)
    if len(sel) > 1:
        frac = np.arange(1, 4) / 4.0
        inner = (sel[:-1, None] + frac[None, :] * np.diff(sel)[:, None]).ravel()
        pts.extend(inner)
    ts = np.unique(np.asarray(pts))
    return V(eval_at(traj, ts))


def tail_liminf(traj: Trajectory, V, w=0.8, horizon=None):
    """min of V(x(t)) over the tail window on the dense mesh refined 4x."""
    return float(np.min(_tail_values(traj, V, w, horizon)))


def tail_limsup(traj: Trajectory, V, w=0.8, horizon=None):
    return float(np.max(_tail_values(traj, V, w, horizon)))


@dataclass(frozen=True)
class TrajectoryClass:
    liminf: float
    limsup: float
    weak: bool
    strong: bool
    settled: bool
    liminf_by_horizon: tuple
    verdict: str  # strong | weak | none | undetermined


@dataclass(frozen=True)
class PersistenceVerdict:
    trajectories: tuple
    weak: bool
    strong: bool
    uniform: bool
    epsilon_star: float
    verdict: str  # uniform | strong | weak | none | undetermined

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "weak": self.weak,
            "strong": self.strong,
            "uniform": self.uniform,
            "epsilon_star": self.epsilon_star,
            "trajectories": [t.__dict__ for t in self.trajectories],
        }


def _classify_one(traj, V, cfg: PersistenceConfig):
    H = traj.t_end
    horizons = (H / 4, H / 2, H)
    lows = tuple(tail_liminf(traj, V, cfg.tail_fraction, h) for h in horizons)
    lo, hi = lows[-1], tail_limsup(traj, V, cfg.tail_fraction)
    weak = hi > cfg.margin
    strong = lo > cfg.margin
    drops = [(a - b) / max(abs(a), 1e-300) for a, b in zip(lows[:-1], lows[1:])]
    settled = not all(d > SETTLE_TOL for d in drops)
    if strong and not settled:
        verdict = UNDETERMINED
    elif strong:
        verdict = "strong"
    elif weak:
        verdict = "weak"
    else:
        verdict = "none"
    return TrajectoryClass(lo, hi, weak, strong, settled, lows, verdict)


def run_ensemble(model, ensemble, t_end, step=None):
    step = step or StepControl()
    return parallel_map(lambda h: integrate(model, h, t_end, step), ensemble)


def classify(model, V, config: PersistenceConfig, trajectories=None):
    """Weak / strong per trajectory and the ensemble verdict with empirical epsilon*."""
    trajs = trajectories if trajectories is not None else run_ensemble(model, config.ensemble, config.t_end, config.step)
    classes = tuple(_classify_one(tr, V, config) for tr in trajs)
    eps = config.margin if config.epsilon is None else config.epsilon
    weak = all(c.weak for c in classes)
    strong = all(c.strong for c in classes)
    eps_star = min(c.liminf for c in classes)
    uniform = strong and eps_star > eps
    if any(c.verdict == UNDETERMINED for c in classes):
        verdict = UNDETERMINED
    elif uniform:
        verdict = "uniform"
    elif strong:
        verdict = "strong"
    elif weak:
        verdict = "weak"
    else:
        verdict = "none"
    assert not uniform or strong, "uniform persistence without strong persistence"
    assert not strong or weak, "strong persistence without weak persistence"
    return PersistenceVerdict(classes, weak, strong, uniform, eps_star, verdict)


def _constants(report):
    if isinstance(report, HypothesisReport):
        return report.constants, report.verdicts
    return dict(report), {}


def uniform_bound(model, V, report):
    """Predicted lower bound on liminf V(x(t)).

    r0 under the H4 + H7 route; min{r0, exp(-k tau) eta} under H5 + H6 + H7.
    Accepts a :class:`HypothesisReport` or a plain mapping with ``r0`` and
    optionally ``k``, ``eta`` and ``route`` (``"H4"`` or ``"H5H6"``).
    """
    c, verdicts = _constants(report)
    r0 = c.get("r0", c.get("H3_r0"))
    if r0 is None:
        raise DomainError("report lacks r0")
    route = c.get("route")
    if route is None:
        route = "H4" if verdicts.get("H4") == HOLDS else "H5H6"
    if route == "H4":
        return float(r0)
    k = c.get("k", c.get("H6_k"))
    eta = c.get("eta", c.get("H5_eta"))
    if k is None or eta is None:
        raise DomainError("H5/H6 route needs k and eta")
    return float(min(r0, math.exp(-k * model.tau) * eta))


@dataclass(frozen=True)
class RatioCheck:
    holds: bool
    worst_ratio: float
    bound: float
    witness_time: Optional[float]


def h6_ratio_check(traj: Trajectory, V, k, tau=None):
    """Check v(t - tau) <= exp(k tau) v(t) (1 + 1e-6) on mesh points t >= tau."""
    tau = traj.model.tau if tau is None else tau
    ts = traj.mesh[traj.mesh >= tau - 1e-12 * tau]
    v_now = V(eval_at(traj, ts))
    v_past = V(eval_at(traj, np.maximum(ts - tau, -tau)))
    bound = math.exp(k * tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(v_now > 0, v_past / v_now, np.where(v_past > 0, np.inf, 1.0))
    viol = v_past > bound * v_now * (1 + 1e-6)
    worst = float(np.max(ratio)) if len(ratio) else 1.0
    wt = float(ts[np.argmax(viol)]) if np.any(viol) else None
    return RatioCheck(not bool(np.any(viol)), worst, bound, wt)


@dataclass(frozen=True)
class AttractionCertificate:
    R0: float
    sequence: tuple
    verdict: str  # certified | not-certified
    iterations: int
    limit_estimate: float
    grid_ok: bool
    witness: Optional[dict] = None

    def to_dict(self):
        return dict(self.__dict__, sequence=list(self.sequence))


def iterate_attractor(model, V, a, R0, max_iter=40, tol=1e-6, n_grid=64, n_geometric=20, t_grid=None, **kw):
    """Check phi*(r) < r on a grid of (0, R0], then iterate R_{k+1} = phi*(R_k)."""
    if not R0 > 0:
        raise DomainError("R0 must be positive")
    grid = np.unique(np.concatenate([R0 * np.arange(1, n_grid + 1) / n_grid, R0 * 2.0 ** -np.arange(1, n_geometric + 1)]))
    witness = None
    for r in grid:
        ps = float(phi_star(model, V, a, float(r), t_grid=t_grid, **kw))
        if not ps < r * (1 - MARGIN):
            witness = {"r": float(r), "phi_star": ps}
            break
    seq = [float(R0)]
    if witness is not None:
        return AttractionCertificate(float(R0), tuple(seq), "not-certified", 0, float(R0), False, witness)
    verdict = "not-certified"
    for _ in range(max_iter):
        nxt = float(phi_star(model, V, a, seq[-1], t_grid=t_grid, **kw)) if seq[-1] > 0 else 0.0
        if not nxt < seq[-1]:
            witness = {"r": seq[-1], "phi_star": nxt}
            break
        seq.append(nxt)
        if nxt < tol:
            verdict = "certified"
            break
    return AttractionCertificate(float(R0), tuple(seq), verdict, len(seq) - 1, seq[-1], True, witness)


@dataclass(frozen=True)
class AttractionCheck:
    confirmed: bool
    limsups: tuple
    tol: float
    t_end: float


def confirm_attraction(model, ensemble=None, certificate=None, t_end=400.0, tol=1e-2, w=0.8, step=None):
    """Integrate histories below R0 and require the tail limsup of |x| to fall below ``tol``."""
    R0 = certificate.R0 if certificate is not None else None
    if ensemble is None:
        hi = 0.95 * R0 if R0 is not None else 5.0
        ensemble = default_ensemble(model, 20, lo=min(0.01, hi / 10), hi=hi)
    if R0 is not None:
        ensemble = [h for h in ensemble if np.all(h.values < R0)]
    norm = lambda x: np.linalg.norm(x, axis=-1)  # noqa: E731
    trajs = run_ensemble(model, ensemble, t_end, step)
    sups = tuple(tail_limsup(tr, norm, w) for tr in trajs)
    return AttractionCheck(all(s < tol for s in sups), sups, tol, t_end)
