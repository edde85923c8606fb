import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from msdyn import FULL3D, PLANAR_CRITICAL, ModelParams, equilibria, jacobian, planar_slow
from msdyn.local_bifurcations import (
    BifurcationCurve,
    Criticality,
    DomainError,
    bautin_locate,
    bt_points,
    diagonal_curve,
    e1e2_parabola,
    e1e2_parabola_r,
    hopf_criticality,
    hopf_e0_curve,
    hopf_e0_full,
    hopf_e1_e2_full,
    hopf_eigen_check,
    hopf_frequencies_planar,
    hopf_planar_root,
    hopf_series_slowfast,
    shifted_diagonal_curve,
)
from msdyn.model import ContractError, routh_hurwitz

PAR = ModelParams(1.0, 1.2, 0.8, 0.8)


@pytest.fixture(scope="module")
def traced():
    return hopf_e1_e2_full(PAR)


# organizing centers -----------------------------------------------------------

def test_bt_points_full_model():
    q0, q1 = bt_points(FULL3D, PAR)
    assert q0.location == pytest.approx((0.545455, 0.545455), abs=1e-6)
    assert q1.location == pytest.approx((0.865455, 0.705455), abs=1e-6)
    assert q0.equilibrium == "P0" and q1.equilibrium == "P1"
    assert q0.transverse_eigenvalue == pytest.approx(-1.654545, abs=1e-6)


def test_bt_points_symmetric_planar_is_single_point():
    pts = bt_points(PLANAR_CRITICAL, ModelParams(1.0, 10.0, 1.0, 0.0))
    assert len(pts) == 1
    assert pts[0].location == (1.0, 1.0)


@given(st.floats(0.05, 2.0))
def test_planar_q1_offset_is_exact(s):
    q0, q1 = bt_points(PLANAR_CRITICAL, ModelParams(1.0, 10.0, 1.0, s))
    assert q1.location[0] - q0.location[0] == pytest.approx(0.5 * s * s, abs=1e-15)
    assert q1.location[1] - q0.location[1] == pytest.approx(0.25 * s * s, abs=1e-15)


@pytest.mark.parametrize("variant,params", [
    (PLANAR_CRITICAL, ModelParams(1.0, 10.0, 1.0, 0.8)),
    (FULL3D, PAR),
    (FULL3D, ModelParams(1.0, 3.0, 1.0, 0.5)),
    (planar_slow(3), ModelParams(1.0, 10.0, 1.0, 0.6)),
])
def test_double_zero_at_organizing_centers(variant, params):
    for oc in bt_points(variant, params):
        pm = params.replace(p=oc.location[0], r=oc.location[1])
        eq = {e.label: e for e in equilibria(variant, pm)}[oc.equilibrium]
        J = jacobian(variant, pm, eq.location)
        coef = np.poly(J)
        # a double zero root: the two lowest characteristic coefficients vanish
        assert abs(coef[-1]) <= 1e-10 and abs(coef[-2]) <= 1e-10
        w = np.sort(np.abs(np.linalg.eigvals(J)))
        assert w[1] <= 1e-6


def test_slow_planar_q0_sits_near_one_over_one_plus_eps():
    eps = 0.1
    (q0,) = bt_points(planar_slow(3), ModelParams.from_eps(1.0, eps, 1.0, 0.0))
    g0 = 1.0 / (1.0 + eps)
    assert q0.location == pytest.approx((g0, g0), abs=5 * eps**4)


# e0 -----------------------------------------------------------------------------

def test_e0_value_and_frequency():
    r = hopf_e0_full(PAR, 1.0)
    # 1.1 - sqrt(0.01 + 1.2/2.2), evaluated by hand
    assert r == pytest.approx(0.3547117702160155, abs=1e-13)
    assert r == pytest.approx(0.354707, abs=1e-5)
    re, dim = hopf_eigen_check(PAR.replace(p=1.0, r=r), "P0")
    assert re <= 1e-8 and dim <= 1e-8


@pytest.mark.parametrize("q", [1.05, 1.2, 3.0, 10.0])
def test_e0_meets_q0(q):
    k = q / (1 + q)
    assert hopf_e0_full(ModelParams(1.0, q, 1.0), k * (1 + 1e-15)) == pytest.approx(k, abs=1e-9)


def test_e0_domain():
    with pytest.raises(DomainError):
        hopf_e0_full(PAR, 0.5)
    with pytest.raises(DomainError):
        hopf_e0_full(PAR, 2.3)


def test_e0_curve_samples_are_hopf_points():
    c = hopf_e0_curve(PAR, np.linspace(0.6, 2.0, 30))
    assert c.name == "e0" and c.provenance == "closed_form"
    for p, r in c.samples:
        re, dim = hopf_eigen_check(PAR.replace(p=p, r=r), "P0")
        assert re <= 1e-8 and dim <= 1e-6


# e1 / e2 --------------------------------------------------------------------------

def test_e1_e2_samples_are_hopf_points(traced):
    e1, e2 = traced
    assert len(e1) > 20 and len(e2) > 100
    for curve, label in ((e1, "P1"), (e2, "P2")):
        for p, r in curve.samples:
            re, dim = hopf_eigen_check(PAR.replace(p=p, r=r), label)
            assert re <= 1e-8 and dim <= 1e-6
            assert abs(routh_hurwitz(PAR.replace(p=p, r=r), label)[3]) <= 1e-10


def test_e1_starts_at_q0_and_e2_at_q1(traced):
    e1, e2 = traced
    q0, q1 = (oc.location for oc in bt_points(FULL3D, PAR))
    assert math.dist(e1.samples[0], q0) < 0.02
    assert math.dist(e2.samples[0], q1) < 0.02
    # the gap between Q0 and Q1: no e1 samples to the right of Q0
    assert np.all(e1.samples[:, 0] <= q0[0] + 1e-12)


def test_e2_tangent_to_shifted_diagonal_at_q1():
    q1 = bt_points(FULL3D, PAR)[1].location
    _, e2 = hopf_e1_e2_full(PAR, n_lines=2, r_range=(q1[1], q1[1] + 7e-4))
    p, r = e2.samples[-1]
    assert math.dist((p, r), q1) == pytest.approx(1e-3, rel=0.05)
    assert abs((r - q1[1]) / (p - q1[0]) - 1.0) <= 0.05


def test_e1_e2_collapse_to_parabola_as_s_vanishes():
    worst = []
    for s in (0.05, 0.01, 0.002, 0.0):
        e1, e2 = hopf_e1_e2_full(ModelParams(1.0, 1.2, 0.8, s), n_lines=20)
        dev = [abs(r - e1e2_parabola_r(1.2, p)) for c in (e1, e2) for p, r in c.samples]
        worst.append(max(dev))
    assert worst[-1] <= 1e-10
    assert all(a > b for a, b in zip(worst, worst[1:]))
    # the 0.02 bound at s = 0.05 holds near the organizing center
    e1, e2 = hopf_e1_e2_full(ModelParams(1.0, 1.2, 0.8, 0.05), n_lines=200)
    q0 = 1.2 / 2.2
    near = [abs(r - e1e2_parabola_r(1.2, p)) for c in (e1, e2) for p, r in c.samples
            if math.hypot(p - q0, r - q0) < 0.09]
    assert near and max(near) < 0.02


@given(st.floats(0.6, 3.0))
def test_parabola_inverse_round_trip(r):
    p = e1e2_parabola(1.2, r)
    assert e1e2_parabola_r(1.2, p) == pytest.approx(r, abs=1e-12)


# series and planar frequencies ----------------------------------------------------

def test_series_values():
    assert hopf_series_slowfast(0.1, "e0", 1.2) == pytest.approx(0.88024, abs=1e-12)
    assert hopf_series_slowfast(0.1, "e1e2", 1.3) == pytest.approx(0.82336, abs=1e-12)
    assert hopf_series_slowfast(0.0, "e0", 1.7) == 1.0
    with pytest.raises(DomainError):
        hopf_series_slowfast(0.3, "e0", 1.0)
    with pytest.raises(ContractError):
        hopf_series_slowfast(0.1, "e3", 1.0)


def test_series_matches_reduced_planar_eigen_scan():
    errs = []
    eps_values = (0.1, 0.05)
    for eps in eps_values:
        par = ModelParams.from_eps(1.2, eps, 0.9, 0.0)
        r = hopf_planar_root(planar_slow(3), par, "P0", "r", 0.5, 1.2)
        errs.append(abs(r - hopf_series_slowfast(eps, "e0", 1.2)))
    assert errs[0] <= 5 * eps_values[0] ** 4
    assert math.log(errs[0] / errs[1], 2) >= 3.5


def test_planar_frequencies():
    assert hopf_frequencies_planar(ModelParams(1.25, 10.0, 1.0, 0.8), "P0") == pytest.approx(0.5)
    for lab in ("P1", "P2"):
        assert hopf_frequencies_planar(ModelParams(1.0, 10.0, 1.0, 0.8), lab) == 0.0
        assert hopf_frequencies_planar(ModelParams(1.0, 10.0, 1.5, 0.0), lab) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        hopf_frequencies_planar(ModelParams(0.5, 10.0, 1.0, 0.0), "P0")


# diagonals -------------------------------------------------------------------------

def test_diagonal_is_transcritical():
    par = ModelParams(0.5, 1.2, 0.5, 0.8)
    verdicts = []
    for r in (0.49, 0.51):
        eqs = {e.label: e.stable for e in equilibria(FULL3D, par.replace(r=r))}
        verdicts.append((eqs["P0"], eqs["P1"]))
    assert verdicts[0] == (True, False) and verdicts[1] == (False, True)


@given(st.floats(0.3, 2.0), st.floats(0.0, 1.5))
def test_shifted_diagonal_discriminant_vanishes(p, s):
    c = shifted_diagonal_curve(s, [p])
    pp, rr = c.samples[0]
    assert abs(s * s + 4 * (rr - pp)) <= 1e-14


def test_curve_container_validation():
    d = diagonal_curve(np.linspace(0.1, 2, 5))
    assert np.all(d.samples[:, 0] == d.samples[:, 1])
    assert d.arc_length[-1] == pytest.approx(1.9 * math.sqrt(2))
    with pytest.raises(ContractError):
        BifurcationCurve("nonsense", [(0, 0)], "closed_form")
    with pytest.raises(ContractError):
        BifurcationCurve("e0", [(0, np.nan)], "closed_form")


# criticality and Bautin --------------------------------------------------------------

def test_e0_is_supercritical():
    for p in (0.8, 1.2, 1.8):
        pm = PAR.replace(p=p, r=hopf_e0_full(PAR, p))
        assert hopf_criticality(FULL3D, pm, "P0") is Criticality.SUPERCRITICAL


def test_symmetric_planar_e1e2_is_subcritical():
    par = ModelParams(1.0, 10.0, 1.5, 0.0)
    p = hopf_planar_root(PLANAR_CRITICAL, par, "P1", "p", 1.0, 1.5)
    assert hopf_criticality(PLANAR_CRITICAL, par.replace(p=p), "P1") is Criticality.SUBCRITICAL


def test_criticality_requires_point_on_curve():
    with pytest.raises(ContractError):
        hopf_criticality(FULL3D, PAR, "P0")


@pytest.mark.slow
def test_bautin_point_exists_and_moves_up_with_q(traced):
    _, e2 = traced
    b12 = bautin_locate(PAR, e2)
    assert b12 is not None
    # subcritical below, supercritical above
    labels = [c for _, c in b12.classifications if c is not Criticality.INCONCLUSIVE]
    assert labels[0] is Criticality.SUBCRITICAL and labels[-1] is Criticality.SUPERCRITICAL
    (pa, ra), (pb, rb) = b12.bracket
    assert math.hypot(pb - pa, rb - ra) <= 1e-3
    par2 = PAR.replace(q=2.0)
    b2 = bautin_locate(par2, hopf_e1_e2_full(par2)[1])
    assert b2 is not None and b2.arc_position > b12.arc_position
    par105 = PAR.replace(q=1.05)
    b105 = bautin_locate(par105, hopf_e1_e2_full(par105)[1])
    assert b105 is not None and b105.arc_position < b12.arc_position
