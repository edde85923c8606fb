"""Bogdanov-Takens unfolding of the critical planar system: rescaled chart,
Hamiltonian homoclinic loops, closed-form Melnikov integrals and the
leading-order homoclinic curves they predict in the (p, r) plane."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .global_dynamics import HomoclinicSpec
from .local_bifurcations import BifurcationCurve, DomainError
from .model import PLANAR_CRITICAL, ContractError, ModelParams

__all__ = [
    "HomoclinicBranchSpec",
    "RescaledParams",
    "rescale",
    "unrescale",
    "p1_constants",
    "hamiltonian_H",
    "hamiltonian_rhs",
    "homoclinic_orbit",
    "melnikov_integrals_P0",
    "melnikov_integrals_P1",
    "melnikov_quadrature_P0",
    "melnikov_quadrature_P1",
    "lambda_P0",
    "lambda_P1",
    "lambda_quadrature",
    "lambda_table",
    "homoclinic_curve_pr",
    "melnikov_point_at_p",
    "ETA_GRID",
]

# same spec object the numerical detector uses: saddle, side, mu_sign
HomoclinicBranchSpec = HomoclinicSpec

ETA_GRID = (0.05, 0.1, 0.2, 0.3)


@dataclass(frozen=True)
class RescaledParams:
    """Unfolding chart ``mu=(r-p)/eta^2, lam=(r-1)/eta^2, delta=s/eta``."""

    mu: float
    lam: float
    delta: float
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ContractError(f"eta must be positive, got {self.eta}")


def rescale(params: ModelParams, eta: float) -> RescaledParams:
    if not eta > 0:
        raise ContractError(f"eta must be positive, got {eta}")
    e2 = eta * eta
    return RescaledParams((params.r - params.p) / e2, (params.r - 1.0) / e2,
                          params.s / eta, eta)


def unrescale(rp: RescaledParams):
    """Back to ``(p, r, s)``."""
    e2 = rp.eta * rp.eta
    r = 1.0 + rp.lam * e2
    return r - rp.mu * e2, r, rp.delta * rp.eta


def _sign(side: str) -> int:
    if side == "right":
        return 1
    if side == "left":
        return -1
    raise ContractError(f"single loops are 'right' or 'left', got {side!r}")


def p1_constants(delta: float):
    """``(u1*, nu, kappa)`` of the P1 chart (mu = -1); needs ``delta > 2``."""
    if not delta > 2.0:
        raise DomainError(f"homoclinics to P1 need delta > 2, got {delta}")
    root = math.sqrt(delta * delta - 4.0)
    u1 = 0.5 * (-delta + root)
    return u1, -u1 * root, delta + 3.0 * u1


def _nu_kappa(delta, mu_sign):
    if mu_sign == 1:
        return 1.0, float(delta)
    if mu_sign == -1:
        _, nu, ka = p1_constants(delta)
        return nu, ka
    raise ContractError("mu_sign must be +1 or -1")


def hamiltonian_H(u, v, delta: float, mu_sign: int = 1):
    """``H = v^2/2 - nu u^2/2 + kappa u^3/3 + u^4/4`` (nu=1, kappa=delta at P0).

    For ``mu_sign=-1`` the coordinates are centred at P1.
    """
    nu, ka = _nu_kappa(delta, mu_sign)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return 0.5 * v * v - 0.5 * nu * u * u + ka * u ** 3 / 3.0 + 0.25 * u ** 4


def hamiltonian_rhs(delta: float, mu_sign: int = 1):
    """Vector field of the unperturbed (eta = 0) system as ``f(t, y)``."""
    nu, ka = _nu_kappa(delta, mu_sign)

    def f(t, y):
        u, v = y
        return [v, nu * u - ka * u * u - u ** 3]

    return f


def homoclinic_orbit(spec: HomoclinicSpec, delta: float, t):
    """Explicit loop ``(u, v)(t)`` of the Hamiltonian system; ``t`` may be an array."""
    sg = _sign(spec.side)
    nu, ka = _nu_kappa(delta, spec.mu_sign)
    alpha = 1.0 / math.sqrt(ka * ka + 4.5 * nu)
    sn = math.sqrt(nu)
    t = np.asarray(t, dtype=float)
    # cosh overflows for |t| > 710; the orbit is at the saddle long before
    st = np.clip(sn * t, -700.0, 700.0)
    den = np.cosh(st) + sg * alpha * ka
    u = sg * 3.0 * alpha * nu / den
    v = -sg * 3.0 * alpha * nu * sn * np.sinh(st) / den ** 2
    return u, v


def _psi(delta, mu_sign):
    # signed: kappa < 0 on part of the P1 range (2 < delta < 3)
    nu, ka = _nu_kappa(delta, mu_sign)
    return ka * math.sqrt(2.0) / (3.0 * math.sqrt(nu))


# Large-psi expansions of the '+' loop integrals in w = 1/psi, where the
# closed forms cancel catastrophically. Exact rationals from a CAS, stored
# as doubles; terms w^2k, w^2k+2, ... with the leading power noted.
_K0_SERIES = (
    0.26666666666666666, -0.11428571428571428, 0.06349206349206349, -0.04040404040404041,
    0.027972027972027972, -0.020512820512820513, 0.01568627450980392, -0.01238390092879257,
    0.010025062656641603, -0.008281573498964804, 0.006956521739130435,
    -0.005925925925925926, 0.005108556832694764, -0.004449388209121246,
    0.0039100684261974585, -0.003463203463203463, 0.003088803088803089,
)  # w^2
_K1_SERIES = (
    0.0761904761904762, -0.050793650793650794, 0.03463203463203463, -0.024864024864024864,
    0.018648018648018648, -0.014479638009049774, 0.011558307533539732,
    -0.009435353088603863, 0.007845701209545603, -0.006625258799171843,
    0.005668276972624798, -0.004904214559386973, 0.0042845960532278664,
    -0.0037752384804665114, 0.0033514872224549644, -0.0029952029952029953,
    0.0026928026928026926,
)  # w^3, times sqrt(2)
_K2_SERIES = (
    0.050793650793650794, -0.046176046176046176, 0.037296037296037296,
    -0.029836829836829837, 0.024132730015082957, -0.019814241486068113,
    0.016511867905056758, -0.013947913261414405, 0.011925465838509317,
    -0.010305958132045089, 0.008991060025542784, -0.007910023482882216,
    0.0070111571780092355, -0.0062561094819159335, 0.005616005616005616,
    -0.005068805068805068,
)  # w^4
_SERIES_PSI = 2.5


def _series(coefs, w, lead):
    w2 = w * w
    acc = 0.0
    for c in reversed(coefs):
        acc = acc * w2 + c
    return acc * w ** lead


def _core_plus(psi):
    """``(k0, k1, k2)`` on the loop with ``u > 0`` for signed ``psi``."""
    if psi >= _SERIES_PSI:
        w = 1.0 / psi
        return (_series(_K0_SERIES, w, 2), math.sqrt(2.0) * _series(_K1_SERIES, w, 3),
                _series(_K2_SERIES, w, 4))
    phi2 = 1.0 + psi * psi
    phi = math.sqrt(phi2)
    # psi - phi = -1 / (psi + phi); the second form is exact for psi > 0
    at = -math.atan(1.0 / (psi + phi)) if psi > 0 else math.atan(psi - phi)
    k0 = 2.0 / 3.0 * (3.0 * phi2 - 1.0) + 4.0 * psi * phi2 * at
    k2 = (16.0 / 15.0 + 23.0 / 3.0 * psi ** 2 + 7.0 * psi ** 4
          + 2.0 * psi * phi2 * (3.0 * phi2 + 4.0 * psi * psi) * at)
    k1 = -math.sqrt(2.0) * (psi * (2.5 * phi2 - 1.0 / 3.0)
                            + (5.0 * psi ** 4 + 6.0 * psi ** 2 + 1.0) * at)
    return k0, k1, k2


def _core_integrals(psi, sg):
    if sg > 0:
        return _core_plus(psi)
    # u -> -u maps the left loop at psi onto the right loop at -psi
    k0, k1, k2 = _core_plus(-psi)
    return k0, -k1, k2


def melnikov_integrals_P0(delta: float):
    """Closed forms ``(I0+, I0-, I2+, I2-)`` along the loops to P0."""
    if delta < 0:
        raise DomainError(f"delta must be non-negative, got {delta}")
    psi = _psi(delta, 1)
    k0p, _, k2p = _core_integrals(psi, 1)
    k0m, _, k2m = _core_integrals(psi, -1)
    return k0p, k0m, k2p, k2m


def melnikov_integrals_P1(delta: float):
    """Closed forms ``(I0+, I0-, I1+, I1-, I2+, I2-)`` along the loops to P1.

    The I1 bracket carries ``(5 psi^4 + 6 psi^2 + 1)``; this is the form
    that agrees with direct quadrature.
    """
    _, nu, _ = p1_constants(delta)
    psi = _psi(delta, -1)
    out = {}
    for sg in (1, -1):
        k0, k1, k2 = _core_integrals(psi, sg)
        out[sg] = (nu * math.sqrt(nu) * k0, nu * nu * k1, nu * nu * math.sqrt(nu) * k2)
    return out[1][0], out[-1][0], out[1][1], out[-1][1], out[1][2], out[-1][2]


def _quad_orbit(spec, delta, integrand):
    from scipy.integrate import quad

    nu, _ = _nu_kappa(delta, spec.mu_sign)
    T = 40.0 / math.sqrt(nu)

    def g(t):
        u, v = homoclinic_orbit(spec, delta, t)
        return integrand(float(u), float(v))

    val = 0.0
    # split at the apex so the adaptive rule sees one smooth bump per side
    for a, b in ((-T, 0.0), (0.0, T)):
        val += quad(g, a, b, epsabs=0.0, epsrel=1e-13, limit=400)[0]
    return val


def melnikov_quadrature_P0(delta: float):
    """Adaptive quadrature of the same four integrals (independent route)."""
    out = []
    for name in ("I0", "I2"):
        for side in ("right", "left"):
            spec = HomoclinicSpec("P0", side)
            if name == "I0":
                out.append(_quad_orbit(spec, delta, lambda u, v: v * v))
            else:
                out.append(_quad_orbit(spec, delta, lambda u, v: (u * v) ** 2))
    return tuple(out)


def melnikov_quadrature_P1(delta: float):
    p1_constants(delta)
    kernels = (lambda u, v: v * v, lambda u, v: u * v * v, lambda u, v: (u * v) ** 2)
    out = []
    for k in kernels:
        for side in ("right", "left"):
            out.append(_quad_orbit(HomoclinicSpec("P1", side), delta, k))
    return tuple(out)


def lambda_P0(delta: float, side: str) -> float:
    """Leading-order persistence value of lambda for loops to P0."""
    i0p, i0m, i2p, i2m = melnikov_integrals_P0(delta)
    if side == "large":
        return (i2p + i2m) / (i0p + i0m)
    return (i2p / i0p) if _sign(side) > 0 else (i2m / i0m)


def lambda_P1(delta: float, side: str) -> float:
    u1, _, _ = p1_constants(delta)
    i0p, i0m, i1p, i1m, i2p, i2m = melnikov_integrals_P1(delta)
    if side == "large":
        return u1 * u1 + (2.0 * u1 * (i1p + i1m) + (i2p + i2m)) / (i0p + i0m)
    if _sign(side) > 0:
        return u1 * u1 + (2.0 * u1 * i1p + i2p) / i0p
    return u1 * u1 + (2.0 * u1 * i1m + i2m) / i0m


def lambda_quadrature(spec: HomoclinicSpec, delta: float) -> float:
    """Zero of the Melnikov distance computed by quadrature of its integrand.

    The integrand is ``v * g(u, lam) * v`` with ``g = lam - u^2`` at P0 and
    ``g = lam - (u1* + u)^2`` at P1; it is linear in lam so the zero is a
    ratio of two quadratures. Large loops sum both single loops.
    """
    sides = ("right", "left") if spec.side == "large" else (spec.side,)
    u1 = 0.0 if spec.mu_sign == 1 else p1_constants(delta)[0]
    a = b = 0.0
    for side in sides:
        sp = HomoclinicSpec(spec.saddle, side)
        a += _quad_orbit(sp, delta, lambda u, v: v * v)
        b += _quad_orbit(sp, delta, lambda u, v: (u1 + u) ** 2 * v * v)
    return b / a


def _lambda(spec: HomoclinicSpec, delta: float) -> float:
    if spec.mu_sign == 1:
        return lambda_P0(delta, spec.side)
    return lambda_P1(delta, spec.side)


def lambda_table(saddle: str, deltas):
    """Rows ``(delta, lambda_plus, lambda_minus, lambda_cup)``."""
    rows = []
    for d in deltas:
        vals = [_lambda(HomoclinicSpec(saddle, side), float(d))
                for side in ("right", "left", "large")]
        rows.append((float(d), *vals))
    return rows


def _region(mu, lam):
    if mu > 0:
        return "I" if lam > 0 else "II"
    return "III" if lam > 0 else "IV"


def homoclinic_curve_pr(spec: HomoclinicSpec, s: float, eta_grid=ETA_GRID
                        ) -> BifurcationCurve:
    """Leading-order homoclinic curve mapped back to ``(p, r)``.

    Each ``eta`` gives ``delta = s / eta`` and ``lam = lambda(delta)``; with
    ``mu = +-1`` the inverse chart returns a point that lies on the
    tangent-line relation of the branch. Samples are ordered by ``eta``.
    P0 branches leave Q0 as ``eta -> 0``; P1 branches leave Q1 as
    ``delta -> 2``, i.e. ``eta -> s / 2``, and grid values past that are
    skipped.
    """
    if s < 0:
        raise ContractError("s must be non-negative")
    if s == 0 and spec.saddle == "P1":
        raise ContractError("homoclinics to P1 need s > 0")
    mu = float(spec.mu_sign)
    pts, regions, lams, etas, skipped = [], [], [], [], []
    for eta in sorted(eta_grid):
        delta = s / eta
        try:
            lam = _lambda(spec, delta)
        except DomainError:
            # P1 loops exist only for delta > 2, i.e. eta < s / 2
            skipped.append(eta)
            continue
        p, r, _ = unrescale(RescaledParams(mu, lam, delta, eta))
        pts.append((p, r))
        regions.append(_region(mu, lam))
        lams.append(lam)
        etas.append(eta)
    if not pts:
        raise DomainError(f"no eta in {list(eta_grid)} gives delta > 2 at s = {s}")
    name = f"hom_{spec.saddle}_{spec.side}"
    return BifurcationCurve(name, pts, "melnikov_leading", PLANAR_CRITICAL,
                            {"s": s, "eta": etas, "lambda": lams, "region": regions,
                             "skipped_eta": skipped})


def melnikov_point_at_p(spec: HomoclinicSpec, s: float, p: float, eta_lo: float = 1e-3,
                        eta_hi: float = 5.0, n_scan: int = 400):
    """Leading-order curve point with the given ``p``.

    Solves for the unfolding scale ``eta`` whose predicted point has this
    ``p``; returns ``(r, eta)`` or ``None`` when the curve does not reach it.
    """
    from scipy.optimize import brentq

    mu = float(spec.mu_sign)

    def point(eta):
        delta = s / eta
        try:
            lam = _lambda(spec, delta)
        except DomainError:
            return None
        return unrescale(RescaledParams(mu, lam, delta, eta))[:2]

    etas = np.geomspace(eta_lo, eta_hi, n_scan)
    prev = None
    for eta in etas:
        pt = point(eta)
        if pt is None:
            prev = None
            continue
        g = pt[0] - p
        if prev is not None and np.sign(g) != np.sign(prev[1]):
            e = brentq(lambda x: point(x)[0] - p, prev[0], eta, xtol=1e-14)
            return point(e)[1], e
        prev = (eta, g)
    return None
