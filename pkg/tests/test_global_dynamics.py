import math

import numpy as np
import pytest

from msdyn import FULL3D, PLANAR_CRITICAL, SLOWFAST_SYM, ModelParams, equilibria, planar_slow
from msdyn import global_dynamics as gd
from msdyn.global_dynamics import (
    Attractor,
    HomoclinicSpec,
    basin_classify,
    fiber_contraction_check,
    find_limit_cycle,
    find_unstable_cycle,
    homoclinic_detect,
    homoclinic_gap,
    qc_estimate,
    saddle_manifold_1d,
    snlc_detect,
    xbar,
)
from msdyn.integrate import Section, integrate_adaptive
from msdyn.local_bifurcations import hopf_e0_full
from msdyn.manifolds import slow_h_eval
from msdyn.model import ContractError
from msdyn.sweep import colormap_grid, isoperiod_contours, isoperiod_grid

FIG1 = ModelParams(1.0, 1.2, 0.8, 0.8)
# first verified run: DOPRI5 and DOP853 at two tolerances agree to 1e-9
FIG1_PERIOD = 10.00713425390


def planar(p, r, s=0.8):
    return ModelParams(p, 10.0, r, s)


@pytest.fixture(scope="module")
def fig1_cycle():
    return find_limit_cycle(FULL3D, FIG1, [1.0, 0.0, -1.0])


@pytest.fixture(scope="module")
def p2_unstable():
    return find_unstable_cycle(PLANAR_CRITICAL, planar(1.55, 1.6), "P2")


def _check_cycle_invariants(c):
    assert np.min(np.abs(c.multipliers - 1.0)) <= 1e-4
    assert c.stable == bool(np.all(np.abs(c.nontrivial_multipliers) < 1.0))
    # repelling cycles are closed in backward time, where they are attracting
    sign = -1.0 if c.meta.get("reverse") else 1.0
    back = integrate_adaptive(c.variant, c.params, c.anchor, sign * c.period, 1e-12, 1e-14).final
    assert np.max(np.abs(back - c.anchor)) <= 1e-8


def _self_intersects(pts):
    a, b = pts[:-1], pts[1:]
    n = len(a)

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                       - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

    A, B = a[:, None], b[:, None]
    C, D = a[None, :], b[None, :]
    cross = (orient(A, B, C) * orient(A, B, D) < 0) & (orient(C, D, A) * orient(C, D, B) < 0)
    i, j = np.indices((n, n))
    adjacent = (np.abs(i - j) <= 1) | ((i == 0) & (j == n - 1)) | ((j == 0) & (i == n - 1))
    return bool(np.any(cross & ~adjacent))


# limit cycles -----------------------------------------------------------------

def test_fig1_cycle(fig1_cycle):
    c = fig1_cycle
    assert c is not None and c.stable
    assert c.period == pytest.approx(FIG1_PERIOD, abs=1e-8)
    _check_cycle_invariants(c)
    det, liou = c.liouville
    assert det == pytest.approx(liou, rel=1e-3)


def test_fig1_glaciation_slower_than_deglaciation(fig1_cycle):
    orbit = fig1_cycle.orbit()
    t = orbit.times
    up = orbit.derivs[:, 0] > 0
    dt = np.diff(t)
    t_up = np.sum(dt[up[:-1]])
    assert t_up > fig1_cycle.period - t_up


def test_xbar_matches_cycle_max(fig1_cycle):
    assert xbar(FULL3D, FIG1, [1.0, 0.0, -1.0]) == pytest.approx(fig1_cycle.x_max, abs=1e-4)


def test_planar_stable_cycle_around_p0():
    par = planar(1.55, 1.2)
    c = find_limit_cycle(PLANAR_CRITICAL, par, [1.5, 0.0])
    assert c is not None and c.stable
    _check_cycle_invariants(c)
    xs = c.orbit().states[:, 0]
    assert xs.min() < 0.0 < xs.max()
    assert not _self_intersects(c.orbit().states[::3])


def test_unstable_cycle_around_p2(p2_unstable):
    u = p2_unstable
    assert u is not None and not u.stable
    assert np.max(np.abs(u.nontrivial_multipliers)) > 1.0
    _check_cycle_invariants(u)
    assert not _self_intersects(u.orbit().states[::3])


def test_unstable_cycle_absent_after_homoclinic():
    assert find_unstable_cycle(PLANAR_CRITICAL, planar(1.55, 2.0), "P2") is None


def test_reverse_detection_agrees_with_forward_newton(p2_unstable):
    u = p2_unstable
    # a backward-time crossing in the +x direction is a forward one in -x
    fwd = Section(u.section.normal, u.section.offset, -u.section.direction)
    anchor, period, _ = gd._newton_cycle(PLANAR_CRITICAL, planar(1.55, 1.6), fwd,
                                         u.anchor + np.array([0.0, 1e-4]), 100.0, 1.0)
    assert np.max(np.abs(anchor - u.anchor)) <= 1e-6
    assert period == pytest.approx(u.period, abs=1e-6)


def test_unstable_cycle_needs_stable_focus():
    with pytest.raises(ContractError):
        find_unstable_cycle(PLANAR_CRITICAL, planar(1.55, 1.6), "P0")
    with pytest.raises(ContractError):
        find_unstable_cycle(FULL3D, FIG1, "P0")


def test_no_cycle_below_e0():
    par = FIG1.replace(r=0.3)
    assert find_limit_cycle(FULL3D, par, [0.5, 0.0, -0.5]) is None


# xbar ----------------------------------------------------------------------------

def test_xbar_zero_at_stable_p0():
    par = FIG1.replace(r=0.1)
    assert abs(xbar(FULL3D, par, [0.0, 0.0, 0.0])) <= 1e-6
    assert abs(xbar(FULL3D, par, [0.2, -0.1, 0.1])) <= 1e-6


def test_xbar_at_stable_p2():
    par = planar(1.55, 3.0)
    eq = {e.label: e for e in equilibria(PLANAR_CRITICAL, par)}["P2"]
    assert eq.stable
    assert xbar(PLANAR_CRITICAL, par, eq.location + 0.01) == pytest.approx(eq.location[0],
                                                                           abs=1e-6)


def test_colormap_region_below_e0_and_diagonal_is_p0():
    par = ModelParams.from_eps(1.0, 0.1, 1.0, 0.0)
    g = colormap_grid(SLOWFAST_SYM, par, (1.2, 2.0), (0.1, 0.6), (5, 5), seed=3)
    assert set(g.labels().ravel()) == {"P0"}
    assert np.max(np.abs(g.field("xbar"))) <= 1e-6


def test_colormap_region_below_snlc_has_no_cycles():
    par = ModelParams.from_eps(1.0, 0.1, 1.0, 0.0)
    g = colormap_grid(SLOWFAST_SYM, par, (0.1, 0.4), (0.7, 2.0), (5, 5), seed=3)
    for c in g.cells:
        eq = {e.label: e for e in equilibria(SLOWFAST_SYM, par.replace(p=c.p, r=c.r))}
        assert c.attractor in (Attractor.P1, Attractor.P2)
        assert c.xbar == pytest.approx(eq[c.attractor.value].location[0], abs=1e-6)


# basins and fast fibers --------------------------------------------------------------

BASIN_PAR = ModelParams.from_eps(0.74, 0.1, 1.5, 0.0)


@pytest.fixture(scope="module")
def gamma1():
    """Unstable cycle around P1 of the reduced planar flow at the basin parameters."""
    c = find_unstable_cycle(planar_slow(3), BASIN_PAR, "P1", offset=1e-2, t_transient=400)
    assert c is not None and not c.stable
    p1 = {e.label: e for e in equilibria(planar_slow(3), BASIN_PAR)}["P1"].location
    return p1, c.orbit().states


def _ray_points(gamma1, frac, n):
    p1, loop = gamma1
    idx = np.linspace(0, len(loop) - 1, n, endpoint=False).astype(int)
    return [p1 + frac * (loop[i] - p1) for i in idx]


def _lift(x, y, dz=0.0):
    return [x, y, slow_h_eval(BASIN_PAR, x, y, 3) + dz]


def test_inside_gamma1_on_slow_manifold_is_p1(gamma1):
    for x, y in _ray_points(gamma1, 0.5, 8):
        assert basin_classify(SLOWFAST_SYM, BASIN_PAR, _lift(x, y)) is Attractor.P1


@pytest.mark.parametrize("frac", [0.5, 1.5])
def test_fiber_property_off_manifold(gamma1, frac):
    for x, y in _ray_points(gamma1, frac, 4):
        base = basin_classify(SLOWFAST_SYM, BASIN_PAR, _lift(x, y))
        for dz in (0.3, -0.3):
            assert basin_classify(SLOWFAST_SYM, BASIN_PAR, _lift(x, y, dz)) is base


def test_basin_at_p0_is_p0():
    assert basin_classify(SLOWFAST_SYM, BASIN_PAR, [0.0, 0.0, 0.0]) is Attractor.P0


def test_basin_label_stable_under_tiny_perturbation(gamma1, rng):
    pts = _ray_points(gamma1, 0.5, 50) + _ray_points(gamma1, 1.5, 50)
    for x, y in pts:
        y0 = np.array(_lift(x, y))
        a = basin_classify(SLOWFAST_SYM, BASIN_PAR, y0)
        b = basin_classify(SLOWFAST_SYM, BASIN_PAR, y0 + 1e-8 * rng.standard_normal(3))
        assert a is b and a is not Attractor.INCONCLUSIVE


def test_weak_focus_is_not_reported_as_cycle():
    # slowly damped spiral into P1: section hits agree long before it stops turning
    x, y = 0.87178, -0.70342
    assert basin_classify(SLOWFAST_SYM, BASIN_PAR, _lift(x, y, 0.3)) is Attractor.P1


def test_fiber_contraction_rate():
    rates = []
    for eps in (0.1, 0.05):
        par = ModelParams.from_eps(1.0, eps, 0.9, 0.0)
        rate, _ = fiber_contraction_check(par, (0.5, 0.3), 0.3)
        assert rate * eps == pytest.approx(1.0, rel=0.3)
        rates.append(rate)
    assert rates[1] / rates[0] == pytest.approx(2.0, rel=0.3)


def test_fiber_zero_offset():
    rate, gap = fiber_contraction_check(ModelParams.from_eps(1.0, 0.1, 0.9, 0.0), (0.5, 0.3), 0.0)
    assert math.isnan(rate) and gap <= 1e-12


def test_fiber_contract():
    with pytest.raises(ContractError):
        fiber_contraction_check(ModelParams.from_eps(1.0, 0.3, 0.9, 0.0), (0.5, 0.3), 0.1)
    with pytest.raises(ContractError):
        fiber_contraction_check(ModelParams.from_eps(1.0, 0.1, 0.9, 0.0), (0.5, 0.3), 0.6)


# saddle manifolds and homoclinics -----------------------------------------------------

SYM = planar(0.8, 1.8, 0.0)


@pytest.mark.parametrize("branch", ["stable", "unstable"])
def test_saddle_trace_leaves_along_eigenvector(branch):
    tr = saddle_manifold_1d(PLANAR_CRITICAL, SYM, "P0", branch, 1)
    _, _, vu, _, vs = gd._saddle_eigen(PLANAR_CRITICAL, SYM, "P0")
    v = vu if branch == "unstable" else vs
    d = tr.states - equilibria(PLANAR_CRITICAL, SYM)[0].location
    k = int(np.argmax(np.linalg.norm(d, axis=1) > 1e-4))
    w = d[k] / np.linalg.norm(d[k])
    assert math.acos(min(1.0, abs(float(w @ v)))) <= 1e-3


@pytest.mark.parametrize("branch", ["stable", "unstable"])
def test_saddle_traces_reflect_at_s0(branch):
    a = saddle_manifold_1d(PLANAR_CRITICAL, SYM, "P0", branch, 1)
    b = saddle_manifold_1d(PLANAR_CRITICAL, SYM, "P0", branch, -1)
    n = min(len(a.times), len(b.times))
    assert np.max(np.abs(a.states[:n] + b.states[:n])) <= 1e-9


def test_saddle_manifold_rejects_non_saddle():
    with pytest.raises(ContractError):
        saddle_manifold_1d(PLANAR_CRITICAL, planar(1.2, 0.8, 0.0), "P0", "stable", 1)
    with pytest.raises(ContractError):
        saddle_manifold_1d(PLANAR_CRITICAL, SYM, "P0", "both", 1)


def test_fig6a_point_closes_up():
    gap = homoclinic_gap(PLANAR_CRITICAL, planar(0.35, 1.4063091), HomoclinicSpec("P0", "right"))
    assert abs(gap) <= 1e-3


FIG6 = [
    ("a", 0.35, HomoclinicSpec("P0", "right"), 1.40631),
    ("b", 1.1, HomoclinicSpec("P1", "right"), 1.00308),
    ("c", 1.37, HomoclinicSpec("P1", "large", 1), 1.27743),
    ("d", 1.49, HomoclinicSpec("P0", "large", 1), 1.87285),
    ("e", 1.45, HomoclinicSpec("P1", "left"), 1.36238),
    ("f", 1.6, HomoclinicSpec("P0", "left"), 1.80921),
]


@pytest.mark.slow
@pytest.mark.parametrize("panel,p,spec,r_ref", FIG6, ids=[f[0] for f in FIG6])
def test_fig6_homoclinic_points(panel, p, spec, r_ref):
    r = homoclinic_detect(PLANAR_CRITICAL, planar(p, r_ref), spec, r_ref - 0.02, r_ref + 0.02)
    assert r is not None and abs(r - r_ref) <= 2e-3


def test_homoclinic_branches_symmetric_at_s0():
    rr = homoclinic_detect(PLANAR_CRITICAL, SYM, HomoclinicSpec("P0", "right"), 1.5, 2.5)
    rl = homoclinic_detect(PLANAR_CRITICAL, SYM, HomoclinicSpec("P0", "left"), 1.5, 2.5)
    assert abs(rr - rl) <= 1e-5


def test_homoclinic_without_sign_change_is_absent():
    assert homoclinic_detect(PLANAR_CRITICAL, SYM, HomoclinicSpec("P0", "right"), 1.0, 1.5) is None


def test_homoclinic_spec_validation():
    with pytest.raises(ContractError):
        HomoclinicSpec("P2", "right")
    with pytest.raises(ContractError):
        HomoclinicSpec("P0", "up")


# SNLC ----------------------------------------------------------------------------------

@pytest.mark.slow
def test_large_cycle_snlc_between_2p5_and_3():
    res = snlc_detect(PLANAR_CRITICAL, planar(1.55, 2.5), 2.5, 3.0)
    assert 2.5 < res.r < 3.0
    assert res.bracket[1] - res.bracket[0] <= 1e-4
    assert res.stable.stable and res.unstable is not None and not res.unstable.stable
    # amplitude gap at the fold is much smaller than at the bracket end
    pa = planar(1.55, 2.5)
    far = find_limit_cycle(PLANAR_CRITICAL, pa, res.stable.anchor)
    inner = gd._enclosed_point(PLANAR_CRITICAL, pa, far)
    u = find_limit_cycle(PLANAR_CRITICAL, pa, inner + 0.95 * (far.anchor - inner), reverse=True)
    far_gap = gd._x_range(far) - gd._x_range(u)
    assert 0 <= res.amplitude_gap < 0.1 * far_gap


def test_snlc_bad_bracket_names_end():
    with pytest.raises(ContractError, match="r_gone"):
        snlc_detect(PLANAR_CRITICAL, planar(1.55, 2.5), 2.5, 2.52)
    with pytest.raises(ContractError, match="family"):
        snlc_detect(PLANAR_CRITICAL, planar(1.55, 2.5), 2.5, 3.0, family="medium")


# isoperiods -------------------------------------------------------------------------------

def test_period_grows_toward_homoclinic():
    seed = [1.0, 0.0, -1.0]
    periods = []
    for r in (1.0, 1.1, 1.2, 1.3, 1.31, 1.314):
        c = find_limit_cycle(FULL3D, FIG1.replace(r=r), seed)
        assert c is not None
        periods.append(c.period)
        seed = c.anchor
    assert all(a < b for a, b in zip(periods, periods[1:]))
    assert periods[-1] > 1.5 * periods[0]


def test_isoperiod_contour_through_fig1_point():
    g = isoperiod_grid(FULL3D, FIG1, (0.9, 1.1), (0.7, 0.9), (5, 5))
    per = g.field("period")
    assert per[2, 2] == pytest.approx(FIG1_PERIOD, abs=1e-6)
    lines = isoperiod_contours(g, [FIG1_PERIOD])[FIG1_PERIOD]
    pts = np.concatenate(lines)
    cell = 0.05
    assert np.min(np.hypot(pts[:, 0] - 1.0, pts[:, 1] - 0.8)) <= cell


def test_isoperiod_no_period_below_e0():
    g = isoperiod_grid(FULL3D, FIG1, (0.9, 1.1), (0.2, 0.3), (3, 2))
    assert np.all(g.r_values.max() < hopf_e0_full(FIG1, 0.9))
    assert np.all(np.isnan(g.field("period")))


# q_c ------------------------------------------------------------------------------------------

def test_qc_value_at_1_2_0():
    assert qc_estimate(1.0, 2.0, 0.0) == pytest.approx(1.4, abs=0.1)


def test_qc_nondecreasing_in_r():
    vals = [qc_estimate(1.0, r, 0.0) for r in np.linspace(1.5, 2.0, 6)]
    assert all(b >= a - 1e-3 for a, b in zip(vals, vals[1:]))
    assert vals[-1] > vals[0]


def test_qc_at_most_one_on_lower_grid():
    for p in np.linspace(0.1, 2.0, 8):
        for r in np.linspace(0.1, 1.5, 8):
            assert qc_estimate(p, r, 0.0) <= 1.0 + 1e-9
