import math

import numpy as np
import pytest

from persist_dde import StepControl, make_history_constant
from persist_dde.degree import (
    Intervals,
    PlanarRegion,
    annulus,
    brouwer_degree,
    cone_region,
    disk,
    polygon,
    winding_number,
)
from persist_dde.errors import BoundaryZeroError, DomainError, UnsupportedShapeError
from persist_dde.guiding import HOLDS, half_square, linear, min_coordinate, squared_norm
from persist_dde.models import nicholson, zero_model
from persist_dde.periodic import (
    PeriodMapProblem,
    averaged_field,
    existence_certificate,
    find_periodic,
    orbit_drift,
    orbit_mean,
    period_map,
)

LN2 = math.log(2.0)


def const(v, tau=0.5, M=64):
    return make_history_constant(np.atleast_1d(v), tau, M)


# -- period map ------------------------------------------------------------------

def test_period_map_equilibrium(nich2):
    s = const(LN2)
    out = period_map(nich2, s, T=1.0)
    assert np.max(np.abs(out.values - s.values)) < 1e-8


def test_period_map_zero_model():
    m = zero_model(1, 0.5)
    out = period_map(m, make_history_constant([0.3], 0.5), T=1.0)
    assert np.allclose(out.values, 0.3, atol=0, rtol=0)


def test_period_map_moves_nonperiodic_segment():
    m = nicholson(p={"mean": 2.0, "amp": 1.0, "period": 1.0})
    fine = period_map(m, const(0.7), step=StepControl(h=0.5 / 512))
    coarse = period_map(m, const(0.7))
    assert np.max(np.abs(coarse.values - 0.7)) > 1e-2
    assert np.max(np.abs(coarse.values - fine.values)) < 1e-8


def test_period_map_requires_period(nich2):
    with pytest.raises(DomainError):
        period_map(nich2, const(0.5))


def test_semiflow_composition(nich_periodic):
    s = const(0.7)
    twice = period_map(nich_periodic, period_map(nich_periodic, s))
    direct = period_map(nich_periodic, s, periods=2)
    assert np.max(np.abs(twice.values - direct.values)) < 1e-6


# -- solver ------------------------------------------------------------------------

def test_find_periodic_sinusoidal(nich_periodic):
    res = find_periodic(PeriodMapProblem(nich_periodic), const(0.7))
    assert res.success and res.residual < 1e-8
    assert abs(float(orbit_mean(res.trajectory)[0]) - LN2) < 0.05
    assert orbit_drift(nich_periodic, res.segment) < 1e-7
    assert np.all(res.trajectory.states > 0)


def test_find_periodic_picard_agrees(nich_periodic):
    newton = find_periodic(PeriodMapProblem(nich_periodic), const(0.7))
    picard = find_periodic(PeriodMapProblem(nich_periodic, solver="picard", max_iter=300), const(0.7))
    assert picard.success
    assert np.max(np.abs(newton.segment.values - picard.segment.values)) < 1e-8


def test_find_periodic_autonomous_equilibrium(nich2):
    res = find_periodic(PeriodMapProblem(nich2, period=1.0), const(1.5))
    assert res.success
    assert np.max(np.abs(res.segment.values - LN2)) < 1e-8


def test_find_periodic_rejects_extinction(nich_half):
    res = find_periodic(PeriodMapProblem(nich_half, period=1.0), const(0.7))
    assert not res.success
    assert "non-positive" in res.reason or "failed" in res.reason


def test_problem_validation(nich_periodic):
    with pytest.raises(DomainError):
        PeriodMapProblem(nich_periodic, solver="secant")
    with pytest.raises(DomainError):
        PeriodMapProblem(nich_periodic, r0=2.0, R=1.0)
    with pytest.raises(DomainError):
        find_periodic(PeriodMapProblem(nich_periodic), const(0.7, M=32))


# -- averaged field --------------------------------------------------------------------

def test_averaged_field_sinusoid():
    m = nicholson(p={"mean": 2.0, "amp": 1.0, "period": 1.0})
    c = np.array([0.3])
    assert abs(averaged_field(m, c)[0] - (-0.3 + 0.6 * math.exp(-0.3))) < 1e-12
    assert abs(averaged_field(m, [LN2])[0]) < 1e-12


def test_averaged_field_trivial(nich2):
    assert np.all(averaged_field(zero_model(2, 0.5), [0.4, 0.9]) == 0.0)
    c = np.array([0.8])
    assert averaged_field(nich2, c)[0] == pytest.approx(-0.8 + 1.6 * math.exp(-0.8), abs=1e-15)


# -- degree ----------------------------------------------------------------------------

def test_degree_one_dimensional():
    g = lambda c: -c + 2 * c * np.exp(-c)  # noqa: E731
    assert brouwer_degree(g, Intervals(((0.1, 3.0),))) == -1
    assert brouwer_degree(lambda c: c - 1.0, Intervals(((0.0, 2.0),))) == 1
    with pytest.raises(BoundaryZeroError):
        brouwer_degree(lambda c: c - 1.0, Intervals(((1.0, 2.0),)))


def test_degree_planar():
    assert brouwer_degree(lambda c: c, annulus((0.0, 0.0), 1.0, 2.0)) == 0
    assert brouwer_degree(lambda c: -c, disk((0.2, 0.1), 1.0)) == 1
    z2 = lambda c: np.array([c[0] ** 2 - c[1] ** 2, 2 * c[0] * c[1]])  # noqa: E731
    assert brouwer_degree(z2, disk((0.0, 0.0), 1.0)) == 2
    conj = lambda c: np.array([c[0], -c[1]])  # noqa: E731
    assert brouwer_degree(conj, polygon([(-1, -1), (1, -1), (1, 1), (-1, 1)])) == -1
    assert brouwer_degree(lambda c: c - 5.0, disk((0.0, 0.0), 1.0)) == 0


@pytest.mark.parametrize("res", [4, 16, 64, 256])
def test_degree_refinement_invariant(res):
    z3 = lambda c: np.array([c[0] ** 3 - 3 * c[0] * c[1] ** 2, 3 * c[0] ** 2 * c[1] - c[1] ** 3])  # noqa: E731
    assert brouwer_degree(z3, disk((0.1, -0.2), 1.5), resolution=res) == 3


def test_boundary_zero_planar():
    with pytest.raises(BoundaryZeroError):
        brouwer_degree(lambda c: c - np.array([1.0, 0.0]), disk((0.0, 0.0), 1.0))


def test_region_catalog():
    assert cone_region(linear(), 1, 0.1, 3.0).components == ((0.1, 3.0),)
    for V in (linear(), half_square(), squared_norm(), min_coordinate()):
        assert cone_region(V, 2, 0.2, 2.0).euler_characteristic == 1
    assert cone_region(squared_norm(), 2, 0.2, 2.0, cone=False).euler_characteristic == 0
    with pytest.raises(UnsupportedShapeError):
        cone_region(linear(), 3, 0.1, 1.0)
    with pytest.raises(UnsupportedShapeError):
        cone_region(linear(), 2, 0.1, 1.0, cone=False)


def test_quarter_annulus_orientation():
    reg = cone_region(squared_norm(), 2, 0.25, 4.0)
    centre = np.array([1.0, 1.0])
    assert winding_number(lambda c: c - centre, reg.loops[0]) == pytest.approx(1.0)


# -- certificates -------------------------------------------------------------------------------

def test_certificate_scalar():
    m = nicholson(p={"mean": 2.0, "amp": 1.0, "period": 1.0})
    cert = existence_certificate(m, linear(), 0.1, 3.0, reports={"H1": HOLDS, "H3": HOLDS})
    assert cert.degree == -1 and cert.expected == -1 and cert.verdict == "consistent"
    assert cert.inner_boundary_hypothesis == "H3"
    g = [b["g"][0] for b in cert.boundary_values]
    assert g[0] > 0 > g[-1]


def test_certificate_refuses_annulus(nich_system):
    cert = existence_certificate(nich_system, squared_norm(), 0.1, 4.0, cone=False)
    assert cert.verdict == "refused" and cert.euler_characteristic == 0


@pytest.mark.parametrize("V,r0,R", [(min_coordinate(), 0.3, 3.0), (squared_norm(), 0.1, 20.0), (linear(), 0.3, 6.0)])
def test_certificate_system(nich_system, V, r0, R):
    cert = existence_certificate(nich_system, V, r0, R)
    assert cert.expected == 1 and cert.degree == 1 and cert.verdict == "consistent"


def test_certificate_inconsistent_when_no_zero(nich_half):
    cert = existence_certificate(nich_half, linear(), 0.1, 3.0)
    assert cert.degree == 0 and cert.verdict == "inconsistent"
