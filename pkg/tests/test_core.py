import math

import numpy as np
import pytest

from _oracles import linear_delay_exact
from persist_dde import (
    HistorySegment,
    StepControl,
    eval_at,
    integrate,
    make_history,
    make_history_constant,
    segment_at,
)
from persist_dde._backend import BACKEND, KERNELS
from persist_dde.core import ModelSpec, evaluate_rhs, periodicity_defect
from persist_dde.errors import BlowUpError, DomainError, PositivityError, RangeError, StepSizeError
from persist_dde.models import linear_delay, nicholson, zero_model


def _max_err(traj, t_hi, n=4001):
    ts = np.linspace(0.0, t_hi, n)
    return float(np.max(np.abs(eval_at(traj, ts)[:, 0] - linear_delay_exact(ts))))


def test_history_reproduces_nodes():
    vals = np.linspace(1.0, 2.0, 9)[:, None]
    seg = HistorySegment(1.0, vals)
    s = np.linspace(-1.0, 0.0, 9)
    assert np.array_equal(seg(s), vals)
    assert seg.M == 8


def test_history_constant_and_range():
    seg = make_history_constant([0.3, 0.7], 0.5)
    assert np.allclose(seg(np.array([-0.5, -0.1, 0.0])), [[0.3, 0.7]] * 3)
    with pytest.raises(RangeError):
        seg(0.1)
    with pytest.raises(DomainError):
        make_history_constant([-1.0], 1.0)


def test_history_from_function():
    seg = make_history(lambda s: np.exp(s), 1.0, M=64)
    assert abs(float(seg(-0.37)[0]) - math.exp(-0.37)) < 1e-7


def test_step_control_aligns_with_delay():
    h, m = StepControl(h=0.3).resolve(1.0)
    assert m == 4 and h == 0.25
    with pytest.raises(StepSizeError):
        StepControl(h=1e-13).resolve(1.0)


def test_oracle_values_exact_on_first_two_intervals():
    traj = integrate(linear_delay(), make_history_constant([1.0], 1.0), 2.0)
    assert abs(float(traj(1.0)[0])) < 1e-14
    assert abs(float(traj(2.0)[0]) + 0.5) < 1e-14
    assert _max_err(traj, 2.0) < 1e-12


@pytest.mark.parametrize("backend", ["callable", "python"] + (["compiled"] if "compiled" in KERNELS else []))
def test_backends_agree(backend):
    m = nicholson(1.0, 2.0, 0.5)
    hist = make_history_constant([0.5], 0.5)
    ref = integrate(m, hist, 20.0, StepControl(backend="callable"))
    tr = integrate(m, hist, 20.0, StepControl(backend=backend))
    assert tr.backend == backend
    assert np.max(np.abs(tr.states - ref.states)) < 1e-12


def test_fourth_order_convergence():
    errs = []
    for m in (8, 16, 32, 64):
        tr = integrate(linear_delay(), make_history_constant([1.0], 1.0), 5.0, StepControl(h=1.0 / m))
        errs.append(_max_err(tr, 5.0))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(ratios > 12), ratios


def test_zero_model_is_constant():
    hist = make_history_constant([0.4, 1.3], 1.0)
    tr = integrate(zero_model(2, 1.0), hist, 3.0)
    assert np.array_equal(tr.states, np.tile([0.4, 1.3], (len(tr.mesh), 1)))


def test_trajectory_is_readonly():
    tr = integrate(nicholson(), make_history_constant([1.0], 0.5), 1.0)
    with pytest.raises(ValueError):
        tr.states[0, 0] = 2.0


def test_partial_last_step_hits_t_end():
    tr = integrate(nicholson(), make_history_constant([1.0], 0.5), 1.003)
    assert tr.mesh[-1] == 1.003


def test_blow_up_detected():
    m = ModelSpec(1, 1.0, lambda t, x, y: x * x + 1.0, cone=False)
    with pytest.raises(BlowUpError):
        integrate(m, make_history_constant([1.0], 1.0), 10.0, StepControl(cap=1e6))


def test_positivity_violation_reported():
    m = ModelSpec(1, 1.0, lambda t, x, y: -np.ones_like(x))
    with pytest.raises(PositivityError):
        integrate(m, make_history_constant([0.1], 1.0), 1.0)


def test_invalid_horizon_and_mismatch():
    hist = make_history_constant([1.0], 0.5)
    with pytest.raises(DomainError):
        integrate(nicholson(), hist, 0.0)
    with pytest.raises(DomainError):
        integrate(nicholson(tau=1.0), hist, 1.0)


def test_segment_restart_matches_continuation():
    m = nicholson(1.0, 2.0, 0.5)
    full = integrate(m, make_history_constant([0.2], 0.5), 6.0)
    seg = segment_at(full, 3.0)
    rest = integrate(m, seg, 3.0)
    ts = np.linspace(0.0, 3.0, 301)
    assert np.max(np.abs(eval_at(rest, ts) - eval_at(full, ts + 3.0))) < 1e-6


def test_evaluate_rhs_domain_checks():
    m = nicholson()
    assert np.allclose(evaluate_rhs(m, 0.0, [1.0], [1.0]), -1.0 + 2.0 * math.exp(-1.0))
    with pytest.raises(DomainError):
        evaluate_rhs(m, 0.0, [-1.0], [1.0])
    with pytest.raises(DomainError):
        evaluate_rhs(m, -1.0, [1.0], [1.0])


def test_periodicity_defect():
    m = nicholson(p={"mean": 2.0, "amp": 0.5, "period": 1.0})
    assert periodicity_defect(m) < 1e-12
    assert m.period == 1.0


def test_backend_reported():
    assert BACKEND in ("compiled", "python")


def test_pure_python_fallback_selected_by_env():
    import os
    import subprocess
    import sys

    env = dict(os.environ, PERSIST_DDE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from persist_dde._backend import BACKEND; print(BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
