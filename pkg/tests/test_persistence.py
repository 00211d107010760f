import math

import numpy as np
import pytest

from persist_dde import StepControl, integrate, make_history_constant
from persist_dde.core import ModelSpec
from persist_dde.errors import DomainError
from persist_dde.guiding import HypothesisReport, check_H3, check_H4, check_H5_H6, half_square, linear, phi_star
from persist_dde.models import nicholson, zero_model
from persist_dde.persistence import (
    PersistenceConfig,
    classify,
    confirm_attraction,
    default_ensemble,
    h6_ratio_check,
    iterate_attractor,
    max_workers,
    parallel_map,
    run_ensemble,
    tail_liminf,
    tail_limsup,
    uniform_bound,
)

LN2 = math.log(2.0)


def test_tail_stats_constant_solution():
    tr = integrate(zero_model(1, 0.5), make_history_constant([0.7], 0.5), 10.0)
    assert tail_liminf(tr, linear()) == pytest.approx(0.7, abs=0)
    assert tail_limsup(tr, linear()) == pytest.approx(0.7, abs=0)


def test_tail_liminf_equilibrium(nich2):
    tr = integrate(nich2, make_history_constant([0.5], 0.5), 100.0)
    assert abs(tail_liminf(tr, linear()) - LN2) < 1e-3


def test_tail_liminf_extinction():
    tr = integrate(nicholson(d=2.0, p=1.0), make_history_constant([0.5], 0.5), 100.0)
    assert tail_liminf(tr, linear()) < 1e-4


def test_default_ensemble():
    ens = default_ensemble(nicholson(), 20)
    vals = [float(h.values[0, 0]) for h in ens]
    assert len(ens) == 20 and vals[0] == pytest.approx(0.01) and vals[-1] == pytest.approx(5.0)
    assert np.all(np.diff(np.log(vals)) > 0)


def test_config_validation(nich2):
    with pytest.raises(DomainError):
        PersistenceConfig(linear(), [make_history_constant([0.0], 0.5)])
    with pytest.raises(DomainError):
        PersistenceConfig(linear(), default_ensemble(nich2, 2), tail_fraction=1.0)


def test_classify_uniform(nich2):
    v = classify(nich2, linear(), PersistenceConfig(linear(), default_ensemble(nich2), t_end=100.0))
    assert v.verdict == "uniform" and v.uniform and v.strong and v.weak
    assert v.epsilon_star >= min(LN2, math.exp(-0.5)) - 0.01


def test_classify_extinction(nich_half):
    v = classify(nich_half, linear(), PersistenceConfig(linear(), default_ensemble(nich_half), t_end=200.0))
    assert v.verdict == "none" and not v.weak
    assert max(c.limsup for c in v.trajectories) < 1e-3


def test_classify_zero_model():
    m = zero_model(1, 0.5)
    v = classify(m, linear(), PersistenceConfig(linear(), default_ensemble(m, 5), t_end=10.0))
    assert v.strong and v.epsilon_star == pytest.approx(0.01)


def test_uniform_bound(nich2):
    rep = {"r0": LN2, "k": 1.0, "eta": 1.0, "route": "H5H6"}
    assert uniform_bound(nich2, linear(), rep) == pytest.approx(math.exp(-0.5))
    assert uniform_bound(nich2, linear(), dict(rep, k=0.0)) == pytest.approx(min(LN2, 1.0))
    assert uniform_bound(nich2, linear(), dict(rep, route="H4")) == LN2
    with pytest.raises(DomainError):
        uniform_bound(nich2, linear(), {"k": 1.0})


def test_bound_soundness(nich2):
    V = linear()
    rep = HypothesisReport.merge(check_H3(nich2, V), check_H4(nich2, V), check_H5_H6(nich2, V))
    rep.constants["r0"] = rep.constants["H3_r0"]
    bound = uniform_bound(nich2, V, rep)
    assert bound == pytest.approx(math.exp(-0.5) * 1.0, rel=1e-3)
    trajs = run_ensemble(nich2, default_ensemble(nich2), 100 * nich2.tau)
    assert all(tail_liminf(tr, V) >= bound - 0.02 for tr in trajs)


def test_h6_ratio(nich2):
    tr = integrate(nich2, make_history_constant([0.3], 0.5), 30.0)
    assert h6_ratio_check(tr, linear(), 1.0).holds
    const = integrate(zero_model(1, 0.5), make_history_constant([0.3], 0.5), 3.0)
    chk = h6_ratio_check(const, linear(), 1.0)
    assert chk.holds and chk.worst_ratio == 1.0 and chk.bound >= 1.0
    decay = ModelSpec(1, 0.5, lambda t, x, y: -10.0 * x + 0 * y)
    chk = h6_ratio_check(integrate(decay, make_history_constant([1.0], 0.5), 3.0), linear(), 1.0)
    assert not chk.holds and chk.witness_time is not None


def test_attractor_first_step_and_monotone():
    m = nicholson(1.0, 1.0, 0.5)
    cert = iterate_attractor(m, half_square(), 2.0, 1.0)
    assert cert.grid_ok
    # for r > 1/2 the maximizing y sits at the peak of y e^{-y}: phi*(1) = sqrt(2) / (2e)
    assert abs(cert.sequence[1] - math.sqrt(2.0) / (2.0 * math.e)) < 1e-3
    assert np.all(np.diff(cert.sequence) < 0)


def test_attractor_converges_with_more_iterations():
    m = nicholson(1.0, 1.0, 0.5)
    cert = iterate_attractor(m, half_square(), 2.0, 1.0, max_iter=3000)
    assert cert.verdict == "certified"
    L = cert.limit_estimate
    assert abs(float(phi_star(m, half_square(), 2.0, L)) - L) < 1e-6


def test_attractor_rejects_persistent_model(nich2):
    cert = iterate_attractor(nich2, linear(), 1.0, 1.0)
    assert cert.verdict == "not-certified" and cert.witness is not None
    assert cert.witness["phi_star"] >= cert.witness["r"] * (1 - 1e-9)


def test_attractor_trivial_toy():
    m = ModelSpec(1, 0.5, lambda t, x, y: -x + 0 * y)
    cert = iterate_attractor(m, half_square(), 2.0, 1.0)
    assert cert.verdict == "certified" and cert.iterations == 1


def test_confirm_attraction():
    assert confirm_attraction(nicholson(1.0, 1.0, 0.5)).confirmed
    per = nicholson(d=2.0, p={"mean": 1.0, "amp": 0.5, "period": 1.0})
    assert confirm_attraction(per, t_end=100.0).confirmed
    zero_hist = [make_history_constant([0.0], 0.5)]
    assert confirm_attraction(nicholson(1.0, 1.0, 0.5), ensemble=zero_hist, t_end=5.0).confirmed


def test_threads_env(monkeypatch, nich2):
    monkeypatch.setenv("PERSIST_DDE_THREADS", "1")
    assert max_workers() == 1
    a = [tr.states for tr in run_ensemble(nich2, default_ensemble(nich2, 6), 20.0)]
    monkeypatch.setenv("PERSIST_DDE_THREADS", "4")
    b = [tr.states for tr in run_ensemble(nich2, default_ensemble(nich2, 6), 20.0)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert parallel_map(lambda v: v * v, range(5)) == [0, 1, 4, 9, 16]


@pytest.mark.parametrize("p", [0.5, 1.0, 1.5, 2.0, 4.0])
@pytest.mark.parametrize("V", [linear(), half_square()], ids=["linear", "half_square"])
def test_ordering_matrix(p, V):
    m = nicholson(p=p)
    v = classify(m, V, PersistenceConfig(V, default_ensemble(m, 8), t_end=60.0))
    assert (not v.uniform or v.strong) and (not v.strong or v.weak)
