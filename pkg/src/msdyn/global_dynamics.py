"""Limit cycles, long-time statistics, invariant manifolds of saddles and
numerical detection of global bifurcations."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _solvers as S
from .integrate import (
    BLOWUP_NORM,
    Section,
    StiffnessError,
    Trajectory,
    integrate_adaptive,
    monodromy_liouville,
    next_crossing,
)
from .model import (
    ContractError,
    Equilibrium,
    ModelParams,
    Variant,
    equilibria,
    jacobian,
    pack_params,
)

__all__ = [
    "LimitCycle",
    "CycleSearchError",
    "find_limit_cycle",
    "find_unstable_cycle",
    "default_section",
    "xbar",
    "Attractor",
    "basin_classify",
    "cycle_recurrence",
    "fiber_contraction_check",
    "saddle_manifold_1d",
    "HomoclinicSpec",
    "homoclinic_gap",
    "homoclinic_detect",
    "snlc_detect",
    "SNLCResult",
    "transverse_eigen_split",
    "qc_margin",
    "qc_estimate",
    "transverse_lambda3",
    "InconclusiveError",
]

T_TRANS = 300.0
T_WIN = 100.0
XBAR_ESCAPE = math.inf


class CycleSearchError(RuntimeError):
    """Newton refinement of a periodic orbit failed to converge."""


@dataclass
class LimitCycle:
    variant: Variant
    params: ModelParams
    anchor: np.ndarray
    period: float
    amplitude: float          # max |x| over the cycle
    x_max: float              # max x over the cycle
    multipliers: np.ndarray
    stable: bool
    section: Section
    liouville: tuple = ()     # (det M, exp(int tr J))
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def orbit(self, n: int = 2000, rel_tol: float = 1e-11) -> Trajectory:
        return integrate_adaptive(self.variant, self.params, self.anchor, self.period,
                                  rel_tol, 1e-13)

    @property
    def nontrivial_multipliers(self) -> np.ndarray:
        i = int(np.argmin(np.abs(self.multipliers - 1.0)))
        return np.delete(self.multipliers, i)


def default_section(variant: Variant, params: ModelParams, points: np.ndarray) -> Section:
    """Section ``x = x_eq`` through the equilibrium enclosed by ``points``.

    Among the equilibria whose x lies strictly inside the x-range of the
    sampled orbit, the one nearest the orbit's centroid is chosen; failing
    that the centroid's x is used.
    """
    lo, hi = points[:, 0].min(), points[:, 0].max()
    centre = points.mean(axis=0)
    best = None
    for eq in equilibria(variant, params):
        if lo < eq.location[0] < hi:
            dist = np.linalg.norm(eq.location - centre)
            if best is None or dist < best[0]:
                best = (dist, eq.location[0])
    x0 = best[1] if best is not None else centre[0]
    normal = np.zeros(variant.dim)
    normal[0] = 1.0
    return Section(tuple(normal), float(x0), 1)


def _section_chart(section: Section):
    n = section.n
    k = int(np.argmax(np.abs(n)))
    free = [i for i in range(len(n)) if i != k]

    def lift(xi):
        y = np.empty(len(n))
        y[free] = xi
        y[k] = (section.offset - n[free] @ np.asarray(xi)) / n[k]
        return y

    def project(y):
        return np.asarray(y)[free]

    return lift, project


def _return_map(variant, params, par, section, lift, project, xi, t_max, sign, rtol):
    hit = next_crossing(variant, params, lift(xi), section, sign * t_max, 1, rtol,
                        rtol * 1e-2, 1e-9, par)
    if hit is None:
        return None
    t, y = hit
    return project(y), abs(t), y


def _newton_cycle(variant, params, section, y_start, t_max, sign=1.0, tol=1e-10,
                  rtol=1e-12, maxit=30, noise_factor=10.0):
    par = pack_params(variant, params)
    lift, project = _section_chart(section)
    xi = project(y_start)
    m = len(xi)
    res_norm = math.inf
    T = None
    for _ in range(maxit):
        r0 = _return_map(variant, params, par, section, lift, project, xi, t_max, sign, rtol)
        if r0 is None:
            raise CycleSearchError("orbit left the section during Newton refinement")
        P, T, _ = r0
        F = P - xi
        res_norm = float(np.max(np.abs(F)))
        if res_norm <= tol:
            return lift(xi), T, res_norm
        J = np.empty((m, m))
        for j in range(m):
            hstep = 1e-7 * max(1.0, abs(xi[j]))
            xp = xi.copy()
            xp[j] += hstep
            rp = _return_map(variant, params, par, section, lift, project, xp, t_max, sign, rtol)
            if rp is None:
                raise CycleSearchError("return map undefined next to the iterate")
            J[:, j] = (rp[0] - xp - F) / hstep
        try:
            dxi = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise CycleSearchError("singular return-map Jacobian") from exc
        # simple backtracking keeps the iterate on the section's domain
        lam = 1.0
        improved = False
        for _ in range(8):
            trial = xi + lam * dxi
            rt = _return_map(variant, params, par, section, lift, project, trial, t_max, sign,
                             rtol)
            if rt is not None and np.max(np.abs(rt[0] - trial)) < res_norm:
                improved = True
                break
            lam *= 0.5
        if not improved:
            # no descent left: accept if we sit on the integration noise floor
            if res_norm <= noise_factor * tol:
                return lift(xi), T, res_norm
            raise CycleSearchError(
                f"Newton on the return map stalled at residual {res_norm:.3g}")
        xi = xi + lam * dxi
    r0 = _return_map(variant, params, par, section, lift, project, xi, t_max, sign, rtol)
    if r0 is not None:
        res_norm = float(np.max(np.abs(r0[0] - xi)))
        if res_norm <= noise_factor * tol:
            return lift(xi), r0[1], res_norm
    raise CycleSearchError(f"Newton on the return map stalled at residual {res_norm:.3g}")


def _finish_cycle(variant, params, section, anchor, period, residual, meta):
    M, liou = monodromy_liouville(variant, params, anchor, period)
    mult = np.linalg.eigvals(M)
    orbit = integrate_adaptive(variant, params, anchor, period, 1e-11, 1e-13)
    xs = orbit.states[:, 0]
    k = int(np.argmin(np.abs(mult - 1.0)))
    others = np.delete(mult, k)
    stable = bool(np.all(np.abs(others) < 1.0))
    return LimitCycle(variant, params, np.asarray(anchor), float(period),
                      float(np.max(np.abs(xs))), float(np.max(xs)), mult, stable, section,
                      (float(np.linalg.det(M).real), liou), residual, meta)


def _settle(variant, params, seed, t_transient, sign):
    tr = integrate_adaptive(variant, params, seed, sign * t_transient, 1e-9, 1e-12)
    if tr.blowup:
        return None
    return tr.final


def find_limit_cycle(variant: Variant, params: ModelParams, seed_state,
                     section: Section | None = None, t_transient: float = 200.0,
                     t_return: float = 200.0, tol: float = 1e-10,
                     reverse: bool = False) -> LimitCycle | None:
    """Locate the limit cycle attracting ``seed_state``.

    After a transient, crossings of ``section`` are collected and the
    return map is solved by Newton's method with a finite-difference
    Jacobian. Returns ``None`` when the orbit settles on an equilibrium,
    escapes, or stops crossing the section; raises
    :class:`CycleSearchError` if Newton fails. With ``reverse=True`` the
    search runs in backward time (repelling cycles of planar systems);
    multipliers are always reported for forward time.
    """
    sign = -1.0 if reverse else 1.0
    y = _settle(variant, params, np.asarray(seed_state, dtype=float), t_transient, sign)
    if y is None:
        return None
    probe = integrate_adaptive(variant, params, y, sign * t_return, 1e-10, 1e-12)
    if probe.blowup:
        return None
    pts = probe.states
    if np.max(np.ptp(pts, axis=0)) < 1e-6:
        return None   # resting at an equilibrium
    if section is None:
        section = default_section(variant, params, pts)
    par = pack_params(variant, params)
    hits = []
    y0 = y
    for _ in range(3):
        h = next_crossing(variant, params, y0, section, sign * t_return, 1, 1e-10, 1e-12,
                          1e-9, par)
        if h is None:
            return None
        hits.append(h[1])
        y0 = h[1]
    # a spiral into an equilibrium on the section also produces crossings
    if np.linalg.norm(hits[-1] - hits[-2]) > 0.5 * np.linalg.norm(hits[-2] - hits[-3]) + 1e-3 \
            and np.max(np.ptp(pts[len(pts) // 2:], axis=0)) < 1e-4:
        return None
    anchor, period, res = _newton_cycle(variant, params, section, hits[-1], 4 * t_return, sign,
                                        tol)
    if np.max(np.ptp(integrate_adaptive(variant, params, anchor, sign * period, 1e-10,
                                         1e-12).states, axis=0)) < 1e-5:
        return None
    return _finish_cycle(variant, params, section, anchor, period, res,
                         {"reverse": reverse})


def find_unstable_cycle(variant: Variant, params: ModelParams,
                        enclosing_equilibrium: str | Equilibrium,
                        offset: float = 1e-3, **kw) -> LimitCycle | None:
    """Repelling cycle around a stable focus of a planar variant.

    Backward time turns the repelling cycle into an attractor; it is found
    from a point ``offset`` away from the equilibrium and refined by the
    same Newton iteration.
    """
    if not variant.planar:
        raise ContractError("reverse-time cycle search needs a planar variant")
    if isinstance(enclosing_equilibrium, Equilibrium):
        eq = enclosing_equilibrium
    else:
        eqs = {e.label: e for e in equilibria(variant, params)}
        if enclosing_equilibrium not in eqs:
            raise ContractError(f"{enclosing_equilibrium} does not exist at these parameters")
        eq = eqs[enclosing_equilibrium]
    if not eq.stable:
        raise ContractError(f"{eq.label} must be a stable equilibrium")
    seed = eq.location + np.array([offset, 0.0])
    sec = Section((1.0, 0.0), float(eq.location[0]), 1)
    return find_limit_cycle(variant, params, seed, sec, reverse=True, **kw)


# ------------------------------------------------------------------ statistics

def xbar(variant: Variant, params: ModelParams, initial_state, t_trans: float = T_TRANS,
         t_win: float = T_WIN, rel_tol: float = 1e-8, abs_tol: float = 1e-10,
         par=None) -> float:
    """``lim sup x(t)`` realized as the max of x over a window after a transient.

    Escape (state norm above the blow-up threshold) returns ``inf``.
    """
    if par is None:
        par = pack_params(variant, params)
    f = variant.kernels()[0]
    best, _, status = S.dopri5_window_max(
        f, par, 0.0, np.asarray(initial_state, dtype=float), float(t_trans), float(t_win),
        rel_tol, abs_tol, np.inf, 50_000_000, BLOWUP_NORM, 0)
    if status == S.BLOWUP:
        return XBAR_ESCAPE
    if status == S.UNDERFLOW:
        raise StiffnessError("step size underflow while computing xbar")
    return float(best)


class Attractor(str, enum.Enum):
    P0 = "P0"
    P1 = "P1"
    P2 = "P2"
    SMALL_CYCLE = "small_cycle"
    LARGE_CYCLE = "large_cycle"
    ESCAPE = "escape"
    INCONCLUSIVE = "inconclusive"


def basin_classify(variant: Variant, params: ModelParams, initial_state,
                   t_budget: float = 2000.0, match: float = 1e-5, chunk: float = 100.0,
                   rel_tol: float = 1e-10, abs_tol: float = 1e-12) -> Attractor:
    """Label the attractor reached from ``initial_state``.

    Equilibria are matched within ``match``; a bounded orbit whose
    successive returns to a section agree to ``match`` and keep a finite
    radius (see :func:`cycle_recurrence`) is a cycle, called large when its
    x-range contains more than one equilibrium. Anything unresolved at
    ``t_budget`` is reported as inconclusive.
    """
    eqs = equilibria(variant, params)
    y = np.asarray(initial_state, dtype=float)
    t = 0.0
    while t < t_budget:
        span = min(chunk, t_budget - t)
        tr = integrate_adaptive(variant, params, y, span, rel_tol, abs_tol)
        t += span
        if tr.blowup:
            return Attractor.ESCAPE
        y = tr.final
        for eq in eqs:
            if np.linalg.norm(y - eq.location) <= match:
                return Attractor(eq.label)
        pts = tr.states[len(tr.states) // 2:]
        if np.max(np.ptp(pts, axis=0)) < match:
            continue   # slow approach to an equilibrium: keep integrating
        sec = default_section(variant, params, pts)
        label, _ = cycle_recurrence(variant, params, y, sec, eqs, match, rel_tol, abs_tol)
        if label is not None:
            return label
    return Attractor.INCONCLUSIVE


def cycle_recurrence(variant: Variant, params: ModelParams, y, section: Section, eqs,
                     hit_tol: float, rel_tol: float = 1e-10, abs_tol: float = 1e-12,
                     par=None, t_max: float = 500.0, n_dense: int = 256):
    """Decide whether the orbit through ``y`` has settled on a cycle.

    Four same-direction returns to ``section`` are followed. The last two
    hits must agree to ``hit_tol``. Hit agreement alone cannot tell a cycle
    from a weakly damped focus, so the largest distance to the equilibrium
    nearest the final revolution is measured on each of three full
    revolutions and Aitken-extrapolated: a spiral extrapolates to radius
    zero, a cycle to a finite one. Limits between a tenth and a half of the
    current radius are left undecided. The maxima are taken over ``n_dense``
    interpolated points per revolution; step-point samples are too coarse
    once the spiral is small.

    Returns ``(label, period)``: a cycle label with the last return time,
    the label of the equilibrium a spiral converges to (period ``None``),
    or ``(None, None)`` when undecided.
    """
    if par is None:
        par = pack_params(variant, params)
    hits, times = [], []
    y0 = np.asarray(y, dtype=float)
    for _ in range(4):
        h = next_crossing(variant, params, y0, section, t_max, 1, rel_tol, abs_tol, 1e-9, par)
        if h is None:
            return None, None
        times.append(float(h[0]))
        y0 = h[1]
        hits.append(y0)
    if np.linalg.norm(hits[3] - hits[2]) > hit_tol:
        return None, None
    edges = np.cumsum([0.0, times[1], times[2], times[3]])
    orbit = integrate_adaptive(variant, params, hits[0], edges[-1], rel_tol, abs_tol)
    revs = [np.array([orbit(t) for t in np.linspace(a, b, n_dense)])
            for a, b in zip(edges[:-1], edges[1:])]
    last = revs[-1]
    centre = last.mean(axis=0)
    eq = min(eqs, key=lambda e: np.linalg.norm(e.location - centre)) if eqs else None
    c = eq.location if eq is not None else centre
    r0, r1, r2 = (float(np.max(np.linalg.norm(seg - c, axis=1))) for seg in revs)
    d1, d2 = r1 - r0, r2 - r1
    if abs(d2) > 1e-6 * r2:
        if d1 * d2 <= 0 or abs(d2) >= abs(d1):
            return None, None
        limit = r2 - d2 * d2 / (d2 - d1)
        if limit <= 0.1 * r2:
            if eq is not None and eq.stable:
                return Attractor(eq.label), None
            return None, None
        if limit < 0.5 * r2:
            return None, None   # pre-asymptotic (e.g. nonlinear decay near a Hopf point)
    lo, hi = last[:, 0].min(), last[:, 0].max()
    inside = sum(lo < e.location[0] < hi for e in eqs)
    label = Attractor.LARGE_CYCLE if inside > 1 else Attractor.SMALL_CYCLE
    return label, times[3]


def fiber_contraction_check(params: ModelParams, base_state, z_offset: float,
                            order: int = 3, n_samples: int = 40):
    """Decay rate of the z-gap between a slow-manifold orbit and its fiber.

    The base solution of the full model starts on the truncated slow
    manifold over ``base_state = (x, y)``; the second one starts
    ``z_offset`` above it. The rate is the slope of ``log |z gap|`` fitted
    over ``t in [0.5 eps, 4 eps]``. Returns ``(rate, max_gap)``; with zero
    offset the rate is ``nan``.
    """
    from .manifolds import slow_h_eval
    from .model import FULL3D

    eps = params.epsilon
    if eps > 0.2:
        raise ContractError("fiber contraction needs eps <= 0.2")
    if abs(z_offset) > 0.5:
        raise ContractError("offset must be at most 0.5")
    x, y = base_state
    z = float(slow_h_eval(params, x, y, order))
    t_end = 4.0 * eps
    a = integrate_adaptive(FULL3D, params, [x, y, z], t_end, 1e-12, 1e-14)
    b = integrate_adaptive(FULL3D, params, [x, y, z + z_offset], t_end, 1e-12, 1e-14)
    ts = np.linspace(0.5 * eps, t_end, n_samples)
    gap = np.array([abs(b(t)[2] - a(t)[2]) for t in ts])
    max_gap = float(np.max(np.abs(b.states[-1] - a.states[-1])))
    if z_offset == 0.0:
        return math.nan, float(np.max(gap))
    rate = -np.polyfit(ts, np.log(gap), 1)[0]
    return float(rate), max_gap


# ------------------------------------------------------------- saddle manifolds

def _saddle_eigen(variant, params, saddle):
    if isinstance(saddle, Equilibrium):
        eq = saddle
    else:
        eqs = {e.label: e for e in equilibria(variant, params)}
        if saddle not in eqs:
            raise ContractError(f"{saddle} does not exist at these parameters")
        eq = eqs[saddle]
    jm = jacobian(variant, params, eq.location)
    w, v = np.linalg.eig(jm)
    if np.any(np.abs(w.imag) > 0) or not (w.real.min() < 0 < w.real.max()):
        raise ContractError(f"{eq.label} is not a saddle (eigenvalues {w})")
    iu = int(np.argmax(w.real))
    js = int(np.argmin(w.real))
    return eq, w.real[iu], v[:, iu].real, w.real[js], v[:, js].real


def saddle_manifold_1d(variant: Variant, params: ModelParams, saddle, branch: str, side: int,
                       t_max: float = 50.0, arc_cap: float = 20.0, seed: float = 1e-6,
                       rel_tol: float = 1e-11) -> Trajectory:
    """Trace one branch of the stable or unstable manifold of a planar saddle.

    The trace starts ``seed`` away from the saddle along ``side`` times the
    eigenvector (forward time for the unstable branch, backward for the
    stable one) and is cut at arc length ``arc_cap``.
    """
    if not variant.planar:
        raise ContractError("one-dimensional saddle manifolds need a planar variant")
    if branch not in ("stable", "unstable") or side not in (1, -1):
        raise ContractError("branch must be 'stable' or 'unstable' and side +1 or -1")
    eq, lu, vu, ls, vs = _saddle_eigen(variant, params, saddle)
    vec = vu if branch == "unstable" else vs
    y0 = eq.location + side * seed * vec
    t_end = t_max if branch == "unstable" else -t_max
    tr = integrate_adaptive(variant, params, y0, t_end, rel_tol, rel_tol * 1e-2)
    seg = np.linalg.norm(np.diff(tr.states, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    keep = int(np.searchsorted(arc, arc_cap)) + 1
    keep = max(2, min(keep, len(arc)))
    tr = Trajectory(tr.times[:keep], tr.states[:keep], variant, params, tr.derivs[:keep],
                    tr.blowup and keep == len(arc), tr.n_rejected,
                    {"saddle": eq.label, "branch": branch, "side": side,
                     "eigenvalue": lu if branch == "unstable" else ls})
    return tr


# ------------------------------------------------------------------ homoclinics

@dataclass(frozen=True)
class HomoclinicSpec:
    """Which homoclinic orbit: saddle ``P0``/``P1`` and loop ``right``/``left``/``large``.

    A right (left) loop encloses the nearest equilibrium to the right
    (left) of the saddle; a large loop encloses both neighbours. For large
    loops ``lead`` (+1/-1) says whether the unstable branch first turns
    around the right or the left neighbour.
    """

    saddle: str
    side: str
    lead: int = 1

    def __post_init__(self):
        if self.saddle not in ("P0", "P1") or self.side not in ("right", "left", "large"):
            raise ContractError(f"invalid homoclinic spec {self.saddle}/{self.side}")

    @property
    def mu_sign(self) -> int:
        return 1 if self.saddle == "P0" else -1


def _neighbours(eqs, xs):
    right = [e for e in eqs if e.location[0] > xs + 1e-12]
    left = [e for e in eqs if e.location[0] < xs - 1e-12]
    r = min(right, key=lambda e: e.location[0]) if right else None
    l = max(left, key=lambda e: e.location[0]) if left else None
    return r, l


def _ray_hit(variant, params, par, y0, t_end, centre, d, max_hits=6):
    """First crossing of the half-line ``centre + s d`` (s > 0)."""
    normal = np.array([-d[1], d[0]])
    sec = Section(tuple(normal), float(normal @ centre), 0)
    y = y0
    t_left = abs(t_end)
    sgn = 1.0 if t_end > 0 else -1.0
    for _ in range(max_hits):
        h = next_crossing(variant, params, y, sec, sgn * t_left, 1, 1e-12, 1e-14, 1e-9, par)
        if h is None:
            return None
        t, y = h
        t_left -= abs(t)
        if (y - centre) @ d > 0:
            return y
        if t_left <= 0:
            return None
    return None


def homoclinic_gap(variant: Variant, params: ModelParams, spec: HomoclinicSpec,
                   t_max: float = 200.0, seed: float = 1e-6):
    """Signed splitting between the saddle's unstable and stable branches.

    Both branches are followed to a half-line from an enclosed equilibrium
    pointing away from the saddle (for large loops, from the neighbour the
    loop closes around last). The signed distance unstable minus stable
    along that half-line is multiplied by the sign of its x-direction, so
    the orientation is by increasing x. Returns ``None`` if either branch
    misses the half-line.
    """
    if not variant.planar:
        raise ContractError("homoclinic detection needs a planar variant")
    eqs = equilibria(variant, params)
    eq, lu, vu, ls, vs = _saddle_eigen(variant, params, spec.saddle)
    S0 = eq.location
    right, left = _neighbours([e for e in eqs if e.label != eq.label], S0[0])
    if spec.side == "right":
        first = last = right
    elif spec.side == "left":
        first = last = left
    else:
        first, last = (right, left) if spec.lead > 0 else (left, right)
    if first is None or last is None:
        return None
    su = 1.0 if vu @ (first.location - S0) > 0 else -1.0
    ss = 1.0 if vs @ (last.location - S0) > 0 else -1.0
    d = last.location - S0
    d = d / np.linalg.norm(d)
    par = pack_params(variant, params)
    yu = _ray_hit(variant, params, par, S0 + su * seed * vu, t_max, last.location, d)
    ys = _ray_hit(variant, params, par, S0 + ss * seed * vs, -t_max, last.location, d)
    if yu is None or ys is None:
        return None
    return float(np.sign(d[0]) * ((yu - ys) @ d))


def homoclinic_detect(variant: Variant, params: ModelParams, spec: HomoclinicSpec,
                      r_lo: float, r_hi: float, tol: float = 1e-6, **kw):
    """Bisection in ``r`` (``p`` fixed) on the signed splitting.

    Returns ``r*`` or ``None`` when the bracket shows no sign change.
    """
    def g(r):
        return homoclinic_gap(variant, params.replace(r=r), spec, **kw)

    ga, gb = g(r_lo), g(r_hi)
    if ga is None or gb is None or np.sign(ga) == np.sign(gb):
        return None
    a, b = r_lo, r_hi
    while b - a > tol:
        m = 0.5 * (a + b)
        gm = g(m)
        if gm is None:
            return None
        if np.sign(gm) == np.sign(ga):
            a, ga = m, gm
        else:
            b, gb = m, gm
    return 0.5 * (a + b)


# ------------------------------------------------------------------------- SNLC

@dataclass
class SNLCResult:
    """Fold of limit cycles located in ``r`` at fixed ``p``.

    ``stable`` is the last stable cycle found on the existence side,
    ``unstable`` its repelling partner when it could be located (planar
    variants only) and ``amplitude_gap`` the difference of their x-ranges.
    """

    r: float
    bracket: tuple
    stable: LimitCycle
    unstable: LimitCycle | None
    amplitude_gap: float | None
    evaluations: int


def _cycle_family(variant, params, cyc: LimitCycle) -> str:
    orbit = cyc.orbit()
    lo, hi = orbit.states[:, 0].min(), orbit.states[:, 0].max()
    inside = sum(lo < eq.location[0] < hi for eq in equilibria(variant, params))
    return "large" if inside > 1 else "small"


def _x_range(cyc: LimitCycle) -> float:
    xs = cyc.orbit().states[:, 0]
    return float(xs.max() - xs.min())


def _stable_member(variant, params, seed, family, t_transient):
    try:
        cyc = find_limit_cycle(variant, params, seed, t_transient=t_transient)
    except CycleSearchError:
        return None   # ghost of a vanished cycle: slow passage, no fixed point
    if cyc is None or not cyc.stable or _cycle_family(variant, params, cyc) != family:
        return None
    return cyc


def snlc_detect(variant: Variant, params: ModelParams, r_exist: float, r_gone: float,
                family: str = "large", seed=None, tol: float = 1e-4,
                t_transient: float = 200.0, partner: bool = True) -> SNLCResult:
    """Saddle-node of limit cycles by bisection on stable-cycle existence.

    ``r_exist`` must carry a stable cycle of the requested family and
    ``r_gone`` must not. Each bisection step seeds the search with the
    anchor of the nearest cycle found so far, so the family is followed by
    natural continuation. The repelling partner near the fold is searched
    in backward time from just inside the stable cycle.
    """
    if family not in ("small", "large"):
        raise ContractError("family must be 'small' or 'large'")
    if seed is None:
        xs = [abs(e.location[0]) for e in equilibria(variant, params.replace(r=r_exist))]
        seed = np.zeros(variant.dim)
        seed[0] = 2.0 * max(xs) + 0.5
    cyc = _stable_member(variant, params.replace(r=r_exist), seed, family, t_transient)
    if cyc is None:
        raise ContractError(f"bracket end r_exist={r_exist}: no stable {family} cycle found")
    gone = _stable_member(variant, params.replace(r=r_gone), cyc.anchor, family, t_transient)
    if gone is not None:
        raise ContractError(f"bracket end r_gone={r_gone}: a stable {family} cycle "
                            f"still exists (period {gone.period:.6g})")
    a, b = float(r_exist), float(r_gone)
    n_eval = 2
    while abs(b - a) > tol:
        m = 0.5 * (a + b)
        c = _stable_member(variant, params.replace(r=m), cyc.anchor, family,
                           min(t_transient, 50.0))
        n_eval += 1
        if c is None:
            b = m
        else:
            a, cyc = m, c
    unstable, gap = None, None
    if partner and variant.planar:
        pa = params.replace(r=a)
        inner = _enclosed_point(variant, pa, cyc)
        for frac in (0.995, 0.98, 0.95, 0.9):
            trial = inner + frac * (cyc.anchor - inner)
            try:
                u = find_limit_cycle(variant, pa, trial, t_transient=t_transient,
                                     reverse=True)
            except CycleSearchError:
                u = None
            if u is not None and not u.stable:
                unstable = u
                gap = _x_range(cyc) - _x_range(u)
                break
    return SNLCResult(0.5 * (a + b), (a, b), cyc, unstable, gap, n_eval)


def _enclosed_point(variant, params, cyc: LimitCycle) -> np.ndarray:
    pts = cyc.orbit().states
    centre = pts.mean(axis=0)
    eqs = equilibria(variant, params)
    return min((e.location for e in eqs), key=lambda loc: np.linalg.norm(loc - centre))


# ------------------------------------------------------------- smoothness q_c

class InconclusiveError(RuntimeError):
    """A numerical classification could not be made."""


def transverse_lambda3(q: float) -> float:
    """Transverse eigenvalue of the full model at the organizing center Q0."""
    return -(1.0 + q - q / (1.0 + q))


def transverse_eigen_split(params: ModelParams):
    """Split full-model eigenvalues at every equilibrium into transverse and tangential.

    The transverse one is the real eigenvalue nearest ``lambda3(q)``.
    Returns a list of ``(label, transverse, tangential_pair)``. Raises
    :class:`InconclusiveError` when no real eigenvalue lies within 50% of
    ``lambda3``.
    """
    from .model import FULL3D

    l3 = transverse_lambda3(params.q)
    out = []
    for eq in equilibria(FULL3D, params):
        w = np.linalg.eigvals(jacobian(FULL3D, params, eq.location))
        real = [i for i in range(3) if abs(w[i].imag) <= 1e-12 * max(1.0, abs(w[i]))]
        if not real:
            raise InconclusiveError(f"{eq.label}: no real eigenvalue at q={params.q}")
        k = min(real, key=lambda i: abs(w[i].real - l3))
        if abs(w[k].real - l3) > 0.5 * abs(l3):
            raise InconclusiveError(
                f"{eq.label}: no real eigenvalue within 50% of lambda3={l3:.6g}")
        out.append((eq.label, float(w[k].real), np.delete(w, k)))
    return out


def qc_margin(params: ModelParams) -> float:
    """``M - |lambda3|`` with M the largest tangential ``|Re sigma|``.

    Negative once tangential rates are dominated by the normal one; ``nan``
    when the eigenvalue split is ambiguous.
    """
    try:
        split = transverse_eigen_split(params)
    except InconclusiveError:
        return math.nan
    m = max(float(np.max(np.abs(tang.real))) for _, _, tang in split)
    return m - abs(transverse_lambda3(params.q))


def qc_estimate(p: float, r: float, s: float = 0.0, q_range=(1.0, 20.0), tol: float = 1e-3,
                n_scan: int = 400) -> float:
    """Smallest ``q`` with ``M(p, r) < |lambda3|``.

    A uniform scan over ``q_range`` finds the first q where the margin is
    negative, and bisection refines it to ``tol``. If the condition
    already holds at the lower end, that end is returned (so values at or
    below one mean "for every admissible q"). Raises
    :class:`InconclusiveError` if the condition never holds in range.
    """
    q_lo, q_hi = q_range
    qs = np.linspace(q_lo, q_hi, n_scan + 1)
    qs[0] = max(qs[0], 1.0 + 1e-9)

    def margin(q):
        return qc_margin(ModelParams(p, float(q), r, s))

    prev = None
    for q in qs:
        mg = margin(q)
        if mg < 0.0:
            if prev is None:
                return float(q_lo)
            a, b = prev, float(q)
            while b - a > tol:
                m = 0.5 * (a + b)
                if margin(m) < 0.0:
                    b = m
                else:
                    a = m
            return 0.5 * (a + b)
        prev = float(q)
    raise InconclusiveError(f"M >= |lambda3| throughout q in {q_range} at (p, r)=({p}, {r})")
