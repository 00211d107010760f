"""Property-based checks over randomized model parameters and histories."""
import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from persist_dde import HistorySegment, StepControl, eval_at, integrate, make_history_constant, segment_at
from persist_dde._backend import KERNELS
from persist_dde.degree import brouwer_degree, disk
from persist_dde.guiding import (
    F_star,
    F_star_curve,
    check_H5_H6,
    check_H7,
    check_H8,
    half_square,
    linear,
    phi_star_curve,
)
from persist_dde.models import nicholson
from persist_dde.persistence import PersistenceConfig, classify, default_ensemble, h6_ratio_check

FAST = settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])

positive = st.floats(0.05, 4.0, allow_nan=False)


@FAST
@given(d=st.floats(0.5, 2.0), p=st.floats(0.2, 5.0), tau=st.floats(0.2, 2.0), c=positive)
def test_kernels_agree(d, p, tau, c):
    m = nicholson(d, p, tau)
    hist = make_history_constant([c], tau)
    ref = integrate(m, hist, 5.0, StepControl(backend="callable"))
    for name in KERNELS:
        tr = integrate(m, hist, 5.0, StepControl(backend=name))
        assert np.max(np.abs(tr.states - ref.states)) < 1e-12


@FAST
@given(vals=st.lists(st.floats(0.0, 10.0), min_size=3, max_size=20))
def test_history_nodes_and_positivity(vals):
    v = np.array(vals)[:, None]
    seg = HistorySegment(1.0, v)
    s = np.linspace(-1.0, 0.0, len(vals))
    assert np.array_equal(seg(s), v)
    assert np.all(seg(np.linspace(-1.0, 0.0, 97)) >= 0)


@FAST
@given(p=st.floats(0.5, 4.0), c=positive, t0=st.floats(0.5, 5.0))
def test_semiflow_restart(p, c, t0):
    m = nicholson(1.0, p, 0.5)
    full = integrate(m, make_history_constant([c], 0.5), t0 + 3.0)
    rest = integrate(m, segment_at(full, t0), 3.0)
    ts = np.linspace(0.0, 3.0, 61)
    assert np.max(np.abs(eval_at(rest, ts) - eval_at(full, t0 + ts))) < 1e-6


@FAST
@given(k=st.integers(1, 4), cx=st.floats(-0.5, 0.5), cy=st.floats(-0.5, 0.5), rad=st.floats(0.8, 3.0),
       res=st.sampled_from([8, 32, 128]))
def test_degree_of_powers(k, cx, cy, rad, res):
    def zk(c):
        z = complex(c[0], c[1]) ** k
        return np.array([z.real, z.imag])

    assert brouwer_degree(zk, disk((cx, cy), rad), resolution=res) == k
    assert brouwer_degree(zk, disk((cx, cy), rad), resolution=2 * res) == k


@FAST
@given(p=st.floats(0.3, 5.0))
def test_H7_implies_H8(p):
    m = nicholson(1.0, p, 0.5)
    grid = [0.1, 0.25, 0.4]
    if check_H7(m, linear(), i_grid=grid).holds("H7"):
        assert check_H8(m, linear(), i_grid=grid).holds("H8")


@FAST
@given(p=st.floats(0.3, 5.0), r=st.lists(st.floats(0.05, 4.0), min_size=2, max_size=6, unique=True))
def test_F_star_monotone(p, r):
    m = nicholson(1.0, p, 0.5)
    grid = sorted(r)
    curve = F_star_curve(m, linear(), 1.0, 0.0, grid, n_levels=32)
    assert np.all(np.diff(curve) >= 0)
    # single sampled sups differ from the curve only by sampling resolution
    raw = np.array([float(F_star(m, linear(), 1.0, 0.0, x, n_levels=32)) for x in grid])
    assert np.all(curve - raw <= 1e-2 * np.maximum(1.0, curve))


@FAST
@given(r=st.lists(st.floats(0.01, 3.0), min_size=2, max_size=5, unique=True))
def test_phi_star_curve_monotone(r):
    m = nicholson(1.0, 1.0, 0.5)
    assert np.all(np.diff(phi_star_curve(m, half_square(), 2.0, sorted(r))) >= 0)


@FAST
@given(p=st.floats(0.3, 5.0), d=st.floats(0.5, 2.0), tau=st.floats(0.2, 1.5))
def test_persistence_ordering(p, d, tau):
    m = nicholson(d, p, tau)
    v = classify(m, linear(), PersistenceConfig(linear(), default_ensemble(m, 6), t_end=40.0))
    assert (not v.uniform or v.strong) and (not v.strong or v.weak)


@FAST
@given(p=st.floats(1.2, 5.0), c=positive)
def test_h6_ratio_on_persistent_trajectories(p, c):
    m = nicholson(1.0, p, 0.5)
    k = check_H5_H6(m, linear()).constants["H6_k"]
    tr = integrate(m, make_history_constant([c], 0.5), 30.0)
    assert h6_ratio_check(tr, linear(), k).holds
