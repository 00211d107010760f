"""Sampled verification of the positivity, repulsion, monotonicity and growth hypotheses.

Every check works on deterministic grids (see :mod:`.sampling`), so repeated
runs give bit-identical reports.  Strict inequalities use ``MARGIN``.
"""
from __future__ import annotations

import math

import numpy as np

from ..core import _as_state, evaluate_rhs
from ..errors import DomainError
from .report import FAILS, HOLDS, UNDETERMINED, HypothesisReport, Witness
from .sampling import axis_grid, box_points, sample_times, shell_points, sublevel_points

MARGIN = 1e-9
GAP_TOL = 1e-9
SHELL_FRACTIONS = (0.1, 0.05, 0.025)
LOG2_GRID = 2.0 ** np.arange(-10, 11)
_PAIR_BLOCK = 1 << 18


def rate(model, V, t, x, y):
    """The guiding rate <grad V(x), f(t, x, y)>; x must lie in the open cone."""
    x = _as_state(x, model.dim, "x")
    if np.any(~(x > 0)):
        raise DomainError("rate needs x in the open positive cone")
    f = evaluate_rhs(model, t, x, y)
    return np.sum(V.grad(x) * f, axis=-1)


def _rate(model, V, t, x, y):
    # unchecked twin of ``rate`` for sweeps over samples that are valid by construction
    return np.sum(V.grad(x) * model.rhs(t, x, y), axis=-1)


def _pair_extreme(fn, X, Y, ts, mode="min", mask=None):
    """Extreme of ``fn(t, x, y)`` over all (t, x, y) in ts x X x Y.

    Returns ``(value, (t, x, y))``; admissible pairs are limited by ``mask``.
    Ties keep the first occurrence, so results are deterministic.
    """
    sign = 1.0 if mode == "min" else -1.0
    best = math.inf
    arg = None
    if len(X) == 0 or len(Y) == 0:
        return (math.inf if mode == "min" else -math.inf), None
    step = max(1, _PAIR_BLOCK // len(Y))
    Yb = Y[None, :, :]
    for t in ts:
        for s in range(0, len(X), step):
            xs = X[s : s + step, None, :]
            vals = sign * fn(t, xs, Yb)
            if mask is not None:
                vals = np.where(mask(xs, Yb), vals, math.inf)
            flat = int(np.argmin(vals))
            v = float(vals.flat[flat])
            if v < best:
                i, j = np.unravel_index(flat, vals.shape)
                best = v
                arg = (float(t), X[s + i].copy(), Y[j].copy())
    return sign * best, arg


def _witness(hyp, kind, arg, value, **params):
    t, x, y = arg
    return Witness(hyp, kind, float(t), tuple(map(float, x)), tuple(map(float, y)), float(value), params)


def witness_value(model, V, w: Witness, a=None):
    """Re-evaluate a witness through the public operations."""
    x = np.array(w.x)
    y = np.array(w.y)
    if w.kind == "rhs":
        return float(evaluate_rhs(model, w.t, x, y)[w.params["component"]])
    if w.kind == "rate":
        return float(rate(model, V, w.t, x, y))
    if w.kind == "rate_gap":
        return float(rate(model, V, w.t, x, y) - rate(model, V, w.t, x, x))
    if w.kind == "growth":
        return float(rate(model, V, w.t, x, y) + w.params["k"] * V(x))
    if w.kind == "normalized":
        at = _a_of(a, w.t)
        return float((rate(model, V, w.t, x, y) + at * V(x)) / at - w.params["R"])
    raise ValueError(f"unknown witness kind {w.kind}")


def witness_violates(model, V, w: Witness, a=None):
    """True when the re-evaluated witness still violates its hypothesis."""
    v = witness_value(model, V, w, a)
    if w.kind in ("rhs", "rate"):
        return v <= MARGIN
    if w.kind in ("rate_gap", "growth"):
        return v < -GAP_TOL
    if w.kind == "normalized":
        return v >= -MARGIN
    return False


def _times(model, t_grid, t_tail=0.0, n_t=16):
    if t_grid is not None:
        return np.atleast_1d(np.asarray(t_grid, dtype=float))
    return sample_times(model, t_tail, n_t)


def check_H1(model, box=5.0, samples=16, t_grid=None):
    """Boundary positivity: f_j(t, x, y) > 0 whenever x_j = 0 and y != 0.

    Faces are sampled in their relative interior (other coordinates and y
    strictly positive).
    """
    cap_x, cap_y = (box, box) if np.isscalar(box) else box
    N = model.dim
    ts = _times(model, t_grid, t_tail=1.0)
    Y = box_points(N, cap_y, samples)
    worst = math.inf
    arg = None
    comp = None
    for j in range(N):
        if N == 1:
            Xf = np.zeros((1, 1))
        else:
            rest = box_points(N - 1, cap_x, samples)
            Xf = np.insert(rest, j, 0.0, axis=1)
        v, a = _pair_extreme(lambda t, x, y, j=j: model.rhs(t, x, y)[..., j], Xf, Y, ts)
        if v < worst:
            worst, arg, comp = v, a, j
    rep = HypothesisReport({"H1": HOLDS if worst > MARGIN else FAILS})
    rep.constants["H1_min_boundary_rhs"] = worst
    if worst <= MARGIN:
        rep.witnesses["H1"] = [_witness("H1", "rhs", arg, worst, component=comp)]
    rep.sampling["H1"] = {"box": [cap_x, cap_y], "samples": samples, "n_t": len(ts)}
    return rep


def _level_search(passes, r_grid, refine_iters):
    """Ascend ``r_grid`` until ``passes(r)`` fails, then bisect the bracket.

    ``passes(r) -> (ok, witness)``.  Returns (r_grid_pass, r_refined, first_fail_witness).
    """
    r_pass = None
    fail = None
    for r in r_grid:
        ok, w = passes(r)
        if not ok:
            fail = (r, w)
            break
        r_pass = r
    if r_pass is None or fail is None:
        return r_pass, r_pass, (fail[1] if fail else None)
    lo, hi = r_pass, fail[0]
    for _ in range(refine_iters):
        mid = 0.5 * (lo + hi)
        ok, _w = passes(mid)
        lo, hi = (mid, hi) if ok else (lo, mid)
    return r_pass, lo, fail[1]


def _default_r_grid(cap):
    return np.round(np.arange(1, 401) * cap / 400, 12)


def check_H2(model, V, r_grid=None, t_grid=None, t0=0.0, cap=5.0, n_levels=24, n_dirs=12, refine_iters=20):
    """Repulsion near 0: rate(t, x, y) > 0 for t > t0 and V(x), V(y) < r0."""
    N = model.dim
    r_grid = _default_r_grid(cap) if r_grid is None else np.asarray(r_grid, dtype=float)
    ts = _times(model, t_grid, t_tail=t0)

    def passes(r):
        P = sublevel_points(V, N, r, cap, n_levels, n_dirs)
        v, arg = _pair_extreme(lambda t, x, y: _rate(model, V, t, x, y), P, P, ts)
        if v > MARGIN:
            return True, None
        return False, _witness("H2", "rate", arg, v, level=float(r))

    r_pass, r0, w = _level_search(passes, r_grid, refine_iters)
    rep = HypothesisReport({"H2": HOLDS if r_pass is not None else FAILS})
    rep.constants.update({"H2_r0": r0, "H2_r0_grid": r_pass, "H2_t0": t0})
    if r_pass is None and w is not None:
        rep.witnesses["H2"] = [w]
    rep.sampling["H2"] = {"cap": cap, "n_levels": n_levels, "n_dirs": n_dirs, "n_t": len(ts),
                          "r_grid": [float(r_grid[0]), float(r_grid[-1]), len(r_grid)]}
    return rep


def check_H3(model, V, r_grid=None, t_grid=None, t0=0.0, cap=5.0, n_levels=64, n_dirs=32, refine_iters=20):
    """Diagonal repulsion: rate(t, x, x) > 0 for t > t0 and V(x) < r0; estimates sup r0."""
    N = model.dim
    r_grid = _default_r_grid(cap) if r_grid is None else np.asarray(r_grid, dtype=float)
    ts = _times(model, t_grid, t_tail=t0)

    def passes(r):
        P = sublevel_points(V, N, r, cap, n_levels, n_dirs)
        if len(P) == 0:
            return True, None
        best = math.inf
        arg = None
        for t in ts:
            vals = _rate(model, V, t, P, P)
            i = int(np.argmin(vals))
            if vals[i] < best:
                best, arg = float(vals[i]), (float(t), P[i], P[i])
        if best > MARGIN:
            return True, None
        return False, _witness("H3", "rate", arg, best, level=float(r))

    r_pass, r0, w = _level_search(passes, r_grid, refine_iters)
    rep = HypothesisReport({"H3": HOLDS if r_pass is not None else FAILS})
    rep.constants.update({"H3_r0": r0, "H3_r0_grid": r_pass, "H3_t0": t0,
                          "H3_r0_at_grid_top": bool(r_pass is not None and w is None)})
    if r_pass is None and w is not None:
        rep.witnesses["H3"] = [w]
    rep.sampling["H3"] = {"cap": cap, "n_levels": n_levels, "n_dirs": n_dirs, "n_t": len(ts),
                          "r_grid": [float(r_grid[0]), float(r_grid[-1]), len(r_grid)]}
    return rep


def _gap_fn(model, V):
    def gap(t, x, y):
        return _rate(model, V, t, x, y) - _rate(model, V, t, x, x)
    return gap


def _level_order_mask(V):
    def mask(x, y):
        return V(y) >= V(x)
    return mask


def check_H4(model, V, samples=24, cap=5.0, t_grid=None):
    """Global V-monotonicity: rate(t, x, y) >= rate(t, x, x) whenever V(y) >= V(x)."""
    ts = _times(model, t_grid, t_tail=1.0)
    P = box_points(model.dim, cap, samples)
    v, arg = _pair_extreme(_gap_fn(model, V), P, P, ts, mask=_level_order_mask(V))
    rep = HypothesisReport({"H4": HOLDS if v >= -GAP_TOL else FAILS})
    rep.constants["H4_min_gap"] = v
    if v < -GAP_TOL:
        rep.witnesses["H4"] = [_witness("H4", "rate_gap", arg, v)]
    rep.sampling["H4"] = {"cap": cap, "samples": samples, "n_t": len(ts)}
    return rep


def _h6_constant(model, V, cap, n, ts):
    X = box_points(model.dim, cap, n)
    v, arg = _pair_extreme(lambda t, x, y: -_rate(model, V, t, x, y) / V(x), X, X, ts, mode="max")
    return v, arg


def check_H5_H6(model, V, eta_grid=None, cap=10.0, samples=24, n_levels=24, n_dirs=12, t_grid=None, r0=None):
    """Local monotonicity below eta and the logarithmic growth bound rate >= -k V(x).

    ``H5_eta`` is the largest grid value that passes.  ``H6_k`` is the sampled
    sup of -rate / V(x) (clipped at 0) and ``H6_k_grid`` the smallest log2-grid
    value above it; H6 is undetermined when the constant exceeds the grid or
    keeps growing (> 5 %) when the box sampling is refined.
    """
    N = model.dim
    eta_grid = LOG2_GRID if eta_grid is None else np.asarray(eta_grid, dtype=float)
    ts = _times(model, t_grid, t_tail=1.0)
    gap = _gap_fn(model, V)
    order = _level_order_mask(V)

    eta = None
    w5 = None
    for e in eta_grid:
        P = sublevel_points(V, N, e, cap, n_levels, n_dirs, closed=True)
        v, arg = _pair_extreme(gap, P, P, ts, mask=order)
        if v < -GAP_TOL:
            w5 = _witness("H5", "rate_gap", arg, v, eta=float(e))
            break
        eta = float(e)

    rep = HypothesisReport({"H5": HOLDS if eta is not None else FAILS})
    rep.constants["H5_eta"] = eta
    if r0 is not None and eta is not None:
        rep.constants["H5_eta_exceeds_r0"] = bool(eta > r0)
    if eta is None and w5 is not None:
        rep.witnesses["H5"] = [w5]

    k1, _ = _h6_constant(model, V, cap, samples, ts)
    k2, arg2 = _h6_constant(model, V, cap, 2 * samples, ts)
    k_emp = max(0.0, k2)
    settled = k2 <= max(k1, 0.0) * 1.05 + 1e-12
    if not math.isfinite(k_emp) or k_emp > eta_grid[-1] or not settled:
        rep.verdicts["H6"] = UNDETERMINED
        k_grid = None
    else:
        rep.verdicts["H6"] = HOLDS
        k_grid = 0.0 if k_emp == 0.0 else float(LOG2_GRID[np.searchsorted(LOG2_GRID, k_emp)])
    rep.constants.update({"H6_k": k_emp, "H6_k_grid": k_grid})
    rep.sampling["H5"] = {"cap": cap, "n_levels": n_levels, "n_dirs": n_dirs, "n_t": len(ts)}
    rep.sampling["H6"] = {"cap": cap, "samples": [samples, 2 * samples], "n_t": len(ts)}
    return rep


def theta_estimates(model, V, i, t_tail=0.0, t_grid=None, fractions=SHELL_FRACTIONS, cap=10.0,
                    n_levels=9, n_dirs=16):
    """max |f(t, x, y)| over the two-sided shells |V - i| <= delta for each delta = fraction * i."""
    N = model.dim
    ts = _times(model, t_grid, t_tail=t_tail)
    out = []
    for fr in fractions:
        d = fr * i
        P = shell_points(V, N, i - d, i + d, cap, n_levels, n_dirs)
        v, _ = _pair_extreme(lambda t, x, y: np.linalg.norm(model.rhs(t, x, y), axis=-1), P, P, ts, mode="max")
        out.append(v)
    return np.array(out)


def theta(model, V, i, t_tail=0.0, t_grid=None, **kw):
    """Limsup of |f| near the level set {V = i}, by Richardson extrapolation over shell widths."""
    m = theta_estimates(model, V, i, t_tail, t_grid, **kw)
    if len(m) == 1:
        return float(m[0])
    return float(max(0.0, 2.0 * m[-1] - m[-2]))


def _shell_liminf(model, V, i, ts, fractions, cap, n_levels, n_dirs, mask=None):
    mins = []
    args = []
    for fr in fractions:
        d = fr * i
        P = shell_points(V, model.dim, i - d, i, cap, n_levels, n_dirs)
        v, arg = _pair_extreme(lambda t, x, y: _rate(model, V, t, x, y), P, P, ts, mask=mask)
        mins.append(v)
        args.append(arg)
    return np.array(mins), args


def _shell_verdict(mins):
    if np.all(mins > MARGIN):
        return HOLDS
    extrap = 2.0 * mins[-1] - mins[-2] if len(mins) > 1 else mins[-1]
    if mins[-1] <= MARGIN and extrap <= MARGIN:
        return FAILS
    return UNDETERMINED


def _combine(verdicts):
    if FAILS in verdicts:
        return FAILS
    if UNDETERMINED in verdicts or not verdicts:
        return UNDETERMINED
    return HOLDS


def _i_grid(i_grid, r0):
    if i_grid is not None:
        return np.asarray(i_grid, dtype=float)
    if r0 is None:
        raise DomainError("pass either i_grid or r0")
    return r0 * np.arange(1, 10) / 10.0


def _shell_check(name, model, V, i_grid, r0, t_tail, t_grid, fractions, cap, n_levels, n_dirs, mask_for):
    ts = _times(model, t_grid, t_tail=t_tail)
    grid = _i_grid(i_grid, r0)
    per_level = []
    verdicts = []
    witnesses = []
    for i in grid:
        mins, args = _shell_liminf(model, V, i, ts, fractions, cap, n_levels, n_dirs, mask_for(i))
        v = _shell_verdict(mins)
        verdicts.append(v)
        per_level.append({"i": float(i), "shell_minima": [float(m) for m in mins], "verdict": v})
        if v == FAILS and args[-1] is not None:
            witnesses.append(_witness(name, "rate", args[-1], mins[-1], level=float(i)))
    rep = HypothesisReport({name: _combine(verdicts)})
    rep.constants[f"{name}_levels"] = per_level
    if witnesses:
        rep.witnesses[name] = witnesses
    rep.sampling[name] = {"fractions": list(fractions), "cap": cap, "n_levels": n_levels,
                          "n_dirs": n_dirs, "n_t": len(ts), "t_tail": t_tail}
    return rep


def check_H7(model, V, i_grid=None, r0=None, t_tail=0.0, t_grid=None, fractions=SHELL_FRACTIONS,
             cap=10.0, n_levels=9, n_dirs=16):
    """liminf of the rate as V(x), V(y) -> i from below stays positive for every level i < r0.

    x and y range independently over the one-sided shell i - delta <= V <= i.
    """
    return _shell_check("H7", model, V, i_grid, r0, t_tail, t_grid, fractions, cap, n_levels, n_dirs,
                        lambda i: None)


def check_H8(model, V, i_grid=None, r0=None, t_tail=0.0, t_grid=None, fractions=SHELL_FRACTIONS,
             cap=10.0, n_levels=9, n_dirs=16, margin=0.1):
    """As :func:`check_H7` restricted to pairs with |x - y| <= (1 + margin) tau theta(i)."""
    C = {}

    def mask_for(i):
        c = (1.0 + margin) * model.tau * theta(model, V, i, t_tail, t_grid, cap=cap, n_dirs=n_dirs)
        C[float(i)] = c
        return lambda x, y: np.linalg.norm(x - y, axis=-1) <= c

    rep = _shell_check("H8", model, V, i_grid, r0, t_tail, t_grid, fractions, cap, n_levels, n_dirs, mask_for)
    rep.constants["H8_C"] = C
    return rep


def _a_of(a, t):
    val = a(t) if callable(a) else a
    return float(val)


class SupEstimate(float):
    """A sampled supremum carrying its maximizer and a box-boundary flag."""

    def __new__(cls, value, argmax=None, at_box_boundary=False):
        obj = super().__new__(cls, value)
        obj.argmax = argmax
        obj.at_box_boundary = at_box_boundary
        return obj

    @property
    def undetermined(self):
        return self.at_box_boundary


def _normalized_F(model, V, a, t):
    at = _a_of(a, t)
    if not at > 0:
        raise DomainError("a(t) must be positive")

    def fn(tt, x, y):
        return (_rate(model, V, tt, x, y) + at * V(x)) / at

    return fn


def _closed_sublevel(model, V, r, cap, n_levels, n_dirs):
    return sublevel_points(V, model.dim, r, cap, n_levels, n_dirs, closed=True)


def F_star(model, V, a, t, r, cap=10.0, n_levels=64, n_dirs=16):
    """sup over V(x), V(y) <= r of F(t, x, y) / a(t), with F = rate + a(t) V(x)."""
    if not r > 0:
        raise DomainError("level must be positive")
    P = _closed_sublevel(model, V, r, cap, n_levels, n_dirs)
    v, arg = _pair_extreme(_normalized_F(model, V, a, t), P, P, [t], mode="max")
    edge = arg is not None and (np.any(arg[1] >= cap * (1 - 1e-12)) or np.any(arg[2] >= cap * (1 - 1e-12)))
    return SupEstimate(v, arg, bool(edge))


def phi_star(model, V, a, r, t_grid=None, t_tail=0.0, n_t=16, **kw):
    """sup over a time grid (one period, or a tail grid) of F*(t, r)."""
    ts = _times(model, t_grid, t_tail=t_tail, n_t=n_t)
    best = None
    for t in ts:
        est = F_star(model, V, a, float(t), r, **kw)
        if best is None or float(est) > float(best):
            best = est
    return best


def _running_max(vals):
    return np.maximum.accumulate(np.asarray(vals, dtype=float))


def F_star_curve(model, V, a, t, r_grid, **kw):
    """F*(t, .) on an increasing grid; sublevel sets are nested so the running max is a valid sup."""
    raw = [float(F_star(model, V, a, t, r, **kw)) for r in r_grid]
    return _running_max(raw)


def phi_star_curve(model, V, a, r_grid, t_grid=None, **kw):
    raw = [float(phi_star(model, V, a, r, t_grid=t_grid, **kw)) for r in r_grid]
    return _running_max(raw)


def check_H9(model, V, a, r0, R_grid=None, T=None, n_t=16, cap=10.0, n_levels=64, n_dirs=16):
    """Smallest sampled R > r0 with max over t in [0, T] of F*(t, R) < R."""
    T = model.period if T is None else T
    ts = np.linspace(0.0, T, n_t, endpoint=False) if T is not None else _times(model, None)
    R_grid = np.round(r0 + np.arange(1, 201) * 0.05, 12) if R_grid is None else np.asarray(R_grid, dtype=float)
    chosen = None
    last = None
    for R in R_grid:
        if R <= r0:
            continue
        best = None
        for t in ts:
            est = F_star(model, V, a, float(t), R, cap=cap, n_levels=n_levels, n_dirs=n_dirs)
            if best is None or float(est) > float(best):
                best = est
        last = (R, best)
        if float(best) < R - MARGIN and not best.at_box_boundary:
            chosen = (R, best)
            break
    rep = HypothesisReport({"H9": HOLDS if chosen else UNDETERMINED})
    if chosen:
        rep.constants.update({"H9_R": float(chosen[0]), "H9_Fstar_max": float(chosen[1])})
    else:
        rep.constants["H9_R"] = None
        if last is not None and last[1].argmax is not None:
            R, best = last
            rep.witnesses["H9"] = [_witness("H9", "normalized", best.argmax, float(best) - R, R=float(R))]
    rep.sampling["H9"] = {"n_t": len(ts), "cap": cap, "n_levels": n_levels, "n_dirs": n_dirs}
    return rep
