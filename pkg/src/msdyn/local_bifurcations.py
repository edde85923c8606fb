"""Local bifurcations: Hopf curves, Bogdanov-Takens points, Hopf criticality
and the Bautin point on e2."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .integrate import integrate_adaptive
from .model import (
    FULL3D,
    PLANAR_CRITICAL,
    ContractError,
    ModelParams,
    Tag,
    Variant,
    equilibria,
    jacobian,
    routh_hurwitz,
)

__all__ = [
    "CURVE_NAMES",
    "PROVENANCES",
    "BifurcationCurve",
    "OrganizingCenter",
    "DomainError",
    "bt_points",
    "hopf_e0_full",
    "hopf_e0_curve",
    "e1e2_parabola",
    "e1e2_parabola_r",
    "hopf_e1_e2_full",
    "hopf_eigen_check",
    "hopf_series_slowfast",
    "hopf_planar_root",
    "hopf_frequencies_planar",
    "Criticality",
    "hopf_criticality",
    "bautin_locate",
    "diagonal_curve",
    "shifted_diagonal_curve",
]

CURVE_NAMES = (
    "e0", "e1", "e2", "e1e2_sym", "diagonal", "shifted_diagonal",
    "hom_P0_right", "hom_P0_left", "hom_P0_large",
    "hom_P1_right", "hom_P1_left", "hom_P1_large",
    "snlc_small", "snlc_large",
)
PROVENANCES = ("closed_form", "series_in_eps", "melnikov_leading", "numeric_detection")


class DomainError(ContractError):
    """Argument outside the region where a formula is defined."""


@dataclass
class BifurcationCurve:
    """Ordered ``(p, r)`` samples of a named curve."""

    name: str
    samples: np.ndarray
    provenance: str
    variant: Variant | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in CURVE_NAMES:
            raise ContractError(f"unknown curve name {self.name!r}")
        if self.provenance not in PROVENANCES:
            raise ContractError(f"unknown provenance {self.provenance!r}")
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(self.samples)):
            raise ContractError("curve samples must be finite")

    def __len__(self):
        return len(self.samples)

    @property
    def arc_length(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.samples, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def rows(self):
        for p, r in self.samples:
            yield self.name, p, r, self.provenance


@dataclass(frozen=True)
class OrganizingCenter:
    name: str
    location: tuple
    equilibrium: str
    transverse_eigenvalue: float | None = None


# ------------------------------------------------------------------ BT points

def _double_zero_planar(variant, params, label, guess):
    from scipy.optimize import fsolve

    def g(z):
        pm = params.replace(p=float(z[0]), r=float(z[1]))
        eqs = {e.label: e for e in equilibria(variant, pm)}
        if label not in eqs:
            return [1.0, 1.0]
        jm = jacobian(variant, pm, eqs[label].location)
        return [np.trace(jm), np.linalg.det(jm)]

    z, info, ok, _ = fsolve(g, guess, xtol=1e-14, full_output=True)
    if ok != 1:
        raise ContractError(f"double-zero point of {label} not found near {guess}")
    return float(z[0]), float(z[1])


def _fold_trace_zero(variant, params, p_guess, width=0.3):
    """Q1 on the fold line ``r = p - s^2/4`` (equilibria do not depend on
    the slow-manifold order) where the trace at the merged P1 = P2 vanishes."""
    from scipy.optimize import brentq

    s2 = 0.25 * params.s ** 2

    def tr(p):
        pm = params.replace(p=p, r=p - s2)
        eqs = {e.label: e for e in equilibria(variant, pm)}
        return float(np.trace(jacobian(variant, pm, eqs["P1"].location)))

    lo, hi = max(p_guess - width, s2 + 1e-9), p_guess + width
    grid = np.linspace(lo, hi, 31)
    vals = [tr(p) for p in grid]
    for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
        if fa * fb <= 0:
            p = brentq(tr, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            return float(p), float(p - s2)
    raise ContractError(f"double-zero point of P1 not found near p={p_guess}")


def bt_points(variant: Variant, params: ModelParams) -> list[OrganizingCenter]:
    """Organizing centers Q0 (at P0) and Q1 (at P1).

    Closed forms for the full and critical planar systems; the truncated
    slow-manifold systems are solved numerically for a double zero. With
    ``s = 0`` only one point (the symmetric BT point) is returned.
    """
    s, q = params.s, params.q
    if variant.tag is Tag.CENTER_REDUCED:
        raise ContractError("the center-reduced field is already centred at Q0")
    if variant.tag is Tag.PLANAR_CRITICAL:
        base, lam3 = 1.0, None
    elif variant.dim == 3:
        base, lam3 = q / (1.0 + q), -(1.0 + q - q / (1.0 + q))
    else:
        base, lam3 = None, None
    if base is not None:
        q0 = (base, base)
        q1 = (base + 0.5 * s * s, base + 0.25 * s * s)
    else:
        g0 = 1.0 / (1.0 + params.epsilon)
        q0 = _double_zero_planar(variant, params, "P0", [g0, g0])
        q1 = q0 if s == 0.0 else _fold_trace_zero(
            variant, params, g0 + 0.5 * s * s)
    out = [OrganizingCenter("Q0", q0, "P0", lam3)]
    if s != 0.0:
        out.append(OrganizingCenter("Q1", q1, "P1", lam3))
    return out


# ---------------------------------------------------------------- Hopf curves

def hopf_e0_full(params: ModelParams, p: float) -> float:
    """Lower branch of the e0 parabola of the full model, ``r = f0(p)``."""
    q = params.q
    if not q / (1.0 + q) < p < 1.0 + q:
        raise DomainError(f"e0 is defined for q/(1+q) < p < 1+q, got p={p}")
    return 0.5 * (1.0 + q) - math.sqrt(0.25 * (q - 1.0) ** 2 + q * p / (1.0 + q))


def hopf_e0_curve(params: ModelParams, p_values) -> BifurcationCurve:
    pts = [(p, hopf_e0_full(params, p)) for p in p_values]
    return BifurcationCurve("e0", pts, "closed_form", FULL3D, {"q": params.q})


def _L(q):
    return 1.0 + q - q / (1.0 + q)


def e1e2_parabola(q: float, r: float) -> float:
    """Symmetric-limit Hopf parabola ``p = f12(r)``."""
    L = _L(q)
    rad = 0.25 * L * L - q + 2.0 * q * r / (1.0 + q)
    if rad < 0:
        raise DomainError(f"e1e2 parabola undefined at r={r}")
    return 0.5 * L - math.sqrt(rad)


def e1e2_parabola_r(q: float, p: float) -> float:
    """Inverse of :func:`e1e2_parabola` on its lower branch (``p <= L/2``)."""
    L = _L(q)
    return (1.0 + q) / (2.0 * q) * ((0.5 * L - p) ** 2 - 0.25 * L * L + q)


def _e_and_c(params, label):
    try:
        _, c, _, e, _ = routh_hurwitz(params, label)
    except ContractError:
        return math.nan, math.nan
    return e, c


def _bisect_root(g, a, b, ga, gb, ftol=1e-12, maxit=200):
    for _ in range(maxit):
        m = 0.5 * (a + b)
        gm = g(m)
        if abs(gm) <= ftol and b - a < 1e-9:
            return m
        if np.sign(gm) == np.sign(ga):
            a, ga = m, gm
        else:
            b, gb = m, gm
        if b - a <= 4e-16 * max(1.0, abs(m)):
            return m if abs(gm) <= abs(ga) and abs(gm) <= abs(gb) else (a if abs(ga) < abs(gb) else b)
    return 0.5 * (a + b)


def _line_roots(params, label, fixed, value, lo, hi, n_scan):
    """Hopf roots of ``e`` with ``c > 0`` along one axis-aligned line."""
    if fixed == "p":
        def pm(t):
            return params.replace(p=value, r=t)
    else:
        def pm(t):
            return params.replace(p=t, r=value)

    def g(t):
        return _e_and_c(pm(t), label)[0]

    ts = np.linspace(lo, hi, n_scan + 1)
    vals = np.array([_e_and_c(pm(t), label) for t in ts])
    out = []
    for i in range(n_scan):
        (e0, c0), (e1, c1) = vals[i], vals[i + 1]
        if not (np.isfinite(e0) and np.isfinite(e1)) or np.sign(e0) == np.sign(e1):
            continue
        t = _bisect_root(g, ts[i], ts[i + 1], e0, e1)
        if _e_and_c(pm(t), label)[1] > 0:
            out.append(t)
    return out


def hopf_e1_e2_full(params: ModelParams, n_lines: int = 200, p_range=(0.0, 2.0),
                    r_range=(0.0, 3.0), n_scan: int = 600):
    """Trace the Hopf curves e1 (of P1) and e2 (of P2) of the full model.

    Zeros of ``e_i = b_i c_i - d_i`` with ``c_i > 0`` are bracketed on a
    scan and bisected to ``|e_i| <= 1e-12``. e1 is a graph over p and is
    traced on vertical lines; e2 folds back in p and is traced on
    horizontal lines. Lines without a root are skipped.
    """
    s = params.s
    p_lo, p_hi = p_range
    r_lo, r_hi = r_range
    e1 = []
    for p in np.linspace(p_lo, p_hi, n_lines + 1)[1:]:
        lo = max(r_lo, p - 0.25 * s * s) + 1e-12
        if lo >= r_hi:
            continue
        e1 += [(p, r) for r in _line_roots(params, "P1", "p", p, lo, r_hi, n_scan)]
    e2 = []
    q1r = params.q / (1.0 + params.q) + 0.25 * s * s
    for r in np.linspace(max(r_lo, q1r), r_hi, n_lines + 1)[1:]:
        hi = min(p_hi, r + 0.25 * s * s) - 1e-12
        lo = max(p_lo, 1e-12)
        if hi <= lo:
            continue
        e2 += [(p, r) for p in _line_roots(params, "P2", "r", r, lo, hi, n_scan)]
    # e1 runs away from Q0 towards small p; e2 away from Q1 upwards
    e1 = sorted(e1, key=lambda pr: -pr[0])
    e2 = sorted(e2, key=lambda pr: pr[1])
    meta = {"q": params.q, "s": s}
    return (BifurcationCurve("e1", e1, "closed_form", FULL3D, dict(meta, axis="p")),
            BifurcationCurve("e2", e2, "closed_form", FULL3D, dict(meta, axis="r")))


def hopf_eigen_check(params: ModelParams, label: str):
    """``(max |Re| of the critical pair, |Im| - sqrt(c))`` at a Hopf point."""
    b, c, d, e, _ = routh_hurwitz(params, label)
    ev = np.roots([1.0, b, c, d])
    crit = ev[np.argsort(np.abs(ev.real))[:2]]
    return float(np.max(np.abs(crit.real))), float(abs(abs(crit[0].imag) - math.sqrt(max(c, 0.0))))


def hopf_series_slowfast(eps: float, which: str, value: float) -> float:
    """Third-order series of the slow-fast Hopf curves.

    ``which='e0'`` returns r at ``p=value``; ``which='e1e2'`` returns p at
    ``r=value``.
    """
    if not 0.0 <= eps <= 0.2:
        raise DomainError(f"series are used for eps <= 0.2, got {eps}")
    if which == "e0":
        p = value
        return 1.0 - eps * p + eps ** 3 * p * (p - 1.0)
    if which == "e1e2":
        r = value
        return (1.0 + eps * (1.0 - 2.0 * r) + eps ** 2 * (1.0 - 2.0 * r)
                + eps ** 3 * (3.0 - 8.0 * r + 4.0 * r * r))
    raise ContractError("which must be 'e0' or 'e1e2'")


def hopf_planar_root(variant: Variant, params: ModelParams, label: str, free: str,
                     lo: float, hi: float, tol: float = 1e-14) -> float | None:
    """Zero of the trace at ``label`` along ``free`` ('p' or 'r') for a planar variant."""
    from scipy.optimize import brentq

    if not variant.planar:
        raise ContractError("planar variants only")

    def tr(t):
        pm = params.replace(**{free: t})
        eqs = {e.label: e for e in equilibria(variant, pm)}
        if label not in eqs:
            return math.nan
        return float(np.trace(jacobian(variant, pm, eqs[label].location)))

    a, b = tr(lo), tr(hi)
    if not (np.isfinite(a) and np.isfinite(b)) or np.sign(a) == np.sign(b):
        return None
    return brentq(tr, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


def hopf_frequencies_planar(params: ModelParams, eq_label: str) -> float:
    """Natural frequency on the Hopf curve of the critical planar system."""
    p, r, s = params.p, params.r, params.s
    if eq_label == "P0":
        rad = p - 1.0
    else:
        if r < 1.0:
            raise DomainError(f"r must be >= 1 for {eq_label}, got {r}")
        sign = 1.0 if eq_label == "P1" else -1.0
        rad = 2.0 * (r - 1.0) + sign * s * math.sqrt(r - 1.0)
    if rad < 0:
        raise DomainError(f"negative radicand {rad:.3g} for {eq_label}")
    return math.sqrt(rad)


def diagonal_curve(p_values) -> BifurcationCurve:
    p = np.asarray(p_values, dtype=float)
    return BifurcationCurve("diagonal", np.column_stack([p, p]), "closed_form")


def shifted_diagonal_curve(s: float, p_values) -> BifurcationCurve:
    p = np.asarray(p_values, dtype=float)
    return BifurcationCurve("shifted_diagonal", np.column_stack([p, p - 0.25 * s * s]),
                            "closed_form")


# ---------------------------------------------------------------- criticality

class Criticality(str, enum.Enum):
    SUPERCRITICAL = "supercritical"
    SUBCRITICAL = "subcritical"
    INCONCLUSIVE = "inconclusive"


def _critical_pair(variant, params, label):
    eqs = {e.label: e for e in equilibria(variant, params)}
    if label not in eqs:
        raise ContractError(f"{label} does not exist at these parameters")
    eq = eqs[label]
    w, v = np.linalg.eig(jacobian(variant, params, eq.location))
    cplx = [i for i in range(len(w)) if w[i].imag > 0]
    if not cplx:
        raise ContractError(f"{label} has no complex pair: not on a Hopf curve")
    k = min(cplx, key=lambda i: abs(w[i].real))
    return eq, w[k], v[:, k]


def hopf_criticality(variant: Variant, params_on_curve: ModelParams, eq_label: str,
                     sigma: float = 5e-4, a0: float = 1e-3, escape: float = 0.5,
                     t_budget: float | None = None, settle_tol: float = 1e-4,
                     n_settle: int = 3) -> Criticality:
    """Classify a Hopf point by simulation just past the curve.

    The parameters are moved along the gradient of the critical real part
    until it equals ``sigma``; an orbit started ``a0`` from the now
    unstable focus is followed in chunks of ten periods. Growth beyond
    ``escape`` or capture by another equilibrium means subcritical; a
    small oscillation whose chunk amplitude settles for ``n_settle``
    consecutive chunks means supercritical. The default time budget is
    ``40 / sigma``.
    """
    if t_budget is None:
        t_budget = 40.0 / sigma
    pm0 = params_on_curve
    _, lam0, _ = _critical_pair(variant, pm0, eq_label)
    if abs(lam0.real) > 1e-6:
        raise ContractError(f"({pm0.p}, {pm0.r}) is not on a Hopf curve of {eq_label} "
                            f"(Re = {lam0.real:.3g})")
    h = 1e-6
    grad = np.empty(2)
    for i, key in enumerate(("p", "r")):
        val = getattr(pm0, key)
        up = _critical_pair(variant, pm0.replace(**{key: val + h}), eq_label)[1].real
        dn = _critical_pair(variant, pm0.replace(**{key: val - h}), eq_label)[1].real
        grad[i] = (up - dn) / (2 * h)
    g2 = float(grad @ grad)
    if g2 == 0.0:
        return Criticality.INCONCLUSIVE
    step = sigma / g2 * grad
    pm = pm0.replace(p=pm0.p + step[0], r=pm0.r + step[1])
    eq, lam, vec = _critical_pair(variant, pm, eq_label)
    period = 2.0 * math.pi / lam.imag
    direction = vec.real / np.linalg.norm(vec.real)
    y = eq.location + a0 * direction
    others = [e.location for e in equilibria(variant, pm) if e.label != eq_label]
    chunk = 10.0 * period
    t, prev, calm = 0.0, None, 0
    while t < t_budget:
        tr = integrate_adaptive(variant, pm, y, chunk, 1e-10, 1e-13)
        t += chunk
        if tr.blowup:
            return Criticality.SUBCRITICAL
        dist = np.linalg.norm(tr.states - eq.location, axis=1)
        amp = float(dist.max())
        y = tr.final
        if amp > escape:
            return Criticality.SUBCRITICAL
        if any(np.linalg.norm(y - o) < 1e-4 for o in others):
            return Criticality.SUBCRITICAL
        if prev is not None and amp > 2.0 * a0 and abs(amp - prev) <= settle_tol * amp:
            calm += 1
            if calm >= n_settle:
                return Criticality.SUPERCRITICAL
        else:
            calm = 0
        prev = amp
    return Criticality.INCONCLUSIVE


def _e2_point(params, r, p_lo=1e-12, p_hi=None, n_scan=400):
    s = params.s
    hi = r + 0.25 * s * s - 1e-12 if p_hi is None else p_hi
    roots = _line_roots(params, "P2", "r", r, p_lo, hi, n_scan)
    return roots


@dataclass
class BautinResult:
    p: float
    r: float
    arc_position: float          # arc length along e2 from its first sample
    bracket: tuple
    classifications: list


def bautin_locate(params: ModelParams, e2: BifurcationCurve, variant: Variant = FULL3D,
                  arc_tol: float = 1e-3, n_probe: int = 12, **crit_kw) -> BautinResult | None:
    """Criticality switch along e2 by bisection in r.

    Probes ``n_probe`` samples spread along the arc, finds the first change
    from subcritical to supercritical (or the reverse) and bisects the
    bracket until its arc length is below ``arc_tol``. Returns ``None``
    when the classification never changes.
    """
    if len(e2) < 2:
        raise ContractError("e2 needs at least two samples")
    arc = e2.arc_length
    idx = np.unique(np.linspace(0, len(e2) - 1, n_probe).round().astype(int))
    labels = []
    for i in idx:
        p, r = e2.samples[i]
        labels.append((i, hopf_criticality(variant, params.replace(p=p, r=r), "P2", **crit_kw)))
    known = [(i, c) for i, c in labels if c is not Criticality.INCONCLUSIVE]
    bracket = None
    for (i0, c0), (i1, c1) in zip(known, known[1:]):
        if c0 != c1:
            bracket = (i0, c0, i1, c1)
            break
    if bracket is None:
        return None
    i0, c0, i1, c1 = bracket
    (pa, ra), (pb, rb) = e2.samples[i0], e2.samples[i1]

    def point_near(r, p_guess):
        roots = _e2_point(params, r)
        if not roots:
            return None
        return min(roots, key=lambda x: abs(x - p_guess))

    while math.hypot(pb - pa, rb - ra) > arc_tol:
        rm = 0.5 * (ra + rb)
        pm_ = point_near(rm, 0.5 * (pa + pb))
        if pm_ is None:
            break
        cm = hopf_criticality(variant, params.replace(p=pm_, r=rm), "P2", **crit_kw)
        if cm is Criticality.INCONCLUSIVE:
            break
        if cm == c0:
            pa, ra = pm_, rm
        else:
            pb, rb = pm_, rm
    p_b, r_b = 0.5 * (pa + pb), 0.5 * (ra + rb)
    # arc position measured along the traced samples up to the bracket start
    pos = float(arc[i0] + math.hypot(p_b - e2.samples[i0][0], r_b - e2.samples[i0][1]))
    return BautinResult(p_b, r_b, pos, ((pa, ra), (pb, rb)), labels)
