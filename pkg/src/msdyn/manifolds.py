"""Slow-manifold and center-manifold reductions.

Two different planar coordinate systems live here and are never mixed:
slow-manifold functions take the original ``(x, y)``; center-manifold
functions take center coordinates ``(u, v)`` defined by
``(x, y, z) = F (u, v, w)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ContractError, ModelParams

__all__ = [
    "SlowManifoldExpansion",
    "slow_h_terms",
    "slow_h_eval",
    "slow_invariance_residual",
    "reduced_planar_rhs",
    "CenterManifoldModel",
    "center_build",
    "center_coefficients",
    "to_center",
    "from_center",
    "center_h_eval",
    "center_n_eval",
    "center_invariance_residual",
    "center_reduced_rhs",
    "slow_center_consistency",
    "invariance_monomial_check",
    "center_validity_radius",
]


def _complex_step(fun, args, i, step=1e-30):
    """Exact first derivative of a real-analytic ``fun`` in argument ``i``."""
    a = [np.asarray(x, dtype=complex) for x in args]
    a[i] = a[i] + 1j * step
    return np.imag(fun(*a)) / step


# ---------------------------------------------------------------- slow manifold

def slow_h_terms(params: ModelParams, x, y):
    """The four expansion coefficients ``(h0, h1, h2, h3)`` at ``(x, y)``."""
    p, r, s = params.p, params.r, params.s
    g = r * y + p * x + (s - y) * x * x
    h0 = -x
    h1 = -(x + y)
    h2 = -(x + y) + g
    h3 = -(1 - 2 * p + 4 * x * (y - s)) * (x + y) + (1 - r + x * x) * g
    return h0, h1, h2, h3


def slow_h_eval(params: ModelParams, x, y, order: int = 3):
    """Partial sum ``h0 + eps h1 + ... + eps^order h_order``."""
    if not 0 <= order <= 3:
        raise ContractError(f"slow-manifold order must be in 0..3, got {order}")
    eps = params.epsilon
    terms = slow_h_terms(params, x, y)
    return sum(eps**i * terms[i] for i in range(order + 1))


@dataclass(frozen=True)
class SlowManifoldExpansion:
    """Truncated slow manifold ``z = h_eps(x, y)`` for fixed parameters."""

    params: ModelParams
    order: int = 3

    def __post_init__(self):
        if not 0 <= self.order <= 3:
            raise ContractError(f"slow-manifold order must be in 0..3, got {self.order}")

    def terms(self, x, y):
        return slow_h_terms(self.params, x, y)[: self.order + 1]

    def __call__(self, x, y):
        return slow_h_eval(self.params, x, y, self.order)


def reduced_planar_rhs(params: ModelParams, x, y, order: int = 0):
    """Planar field on the slow manifold, ``h_eps`` truncated at ``order``."""
    h = slow_h_eval(params, x, y, order)
    xd = -x - y
    yd = params.r * y - params.p * h + params.s * h * h - y * h * h
    return xd, yd


def slow_invariance_residual(params: ModelParams, x, y, order: int = 3):
    """``|eps dh/dt + x + h|`` along the reduced flow with truncated ``h``."""
    eps = params.epsilon

    def h(xx, yy):
        return slow_h_eval(params, xx, yy, order)

    hx = _complex_step(h, (x, y), 0)
    hy = _complex_step(h, (x, y), 1)
    xd, yd = reduced_planar_rhs(params, x, y, order)
    return np.abs(eps * (hx * xd + hy * yd) + x + h(x, y))


# -------------------------------------------------------------- center manifold

def center_coefficients(q: float, s: float):
    """Nonzero quadratic (b1..b7) and cubic (c1..c16) center-manifold coefficients."""
    l = 1 + q + q * q
    q1 = q + 1
    b = np.empty(7)
    b[0] = q * q1**3 * s / l**3
    b[1] = 2 * q1**3 * (q**3 - q**2 - q - 1) * s / l**4
    b[2] = q1**3 * (q**6 - 2 * q**5 + 2 * q**3 + 4 * q**2 + 2 * q + 1) * s / (q * l**5)
    b[3] = q * q1**3 / l**3
    b[4] = q1**3 * (q**3 - q**2 - q - 1) / l**4
    b[5] = -b[3]
    b[6] = -q * q1**3 * (2 * q**2 + q + 1) / l**4

    s2 = s * s
    c = np.empty(16)
    c[0] = q * q1**3 / l**3 - 6 * q**2 * q1**6 * s2 / l**6
    c[1] = ((q - 1) * q1**3 * (4 * q**2 + 3 * q + 2) / l**4
            - 2 * q * q1**6 * (9 * q**3 - 14 * q**2 - 14 * q - 9) * s2 / l**7)
    c[2] = ((q - 1) ** 2 * q1**3 * (5 * q**4 + 6 * q**3 + 5 * q**2 + 2 * q + 1) / (q * l**5)
            - 2 * q * q1**6 * (9 * q**6 - 28 * q**5 + 2 * q**4 + 42 * q**3 + 58 * q**2
                               + 28 * q + 9) * s2 / (q * l**8))
    c[3] = ((q - 1) ** 2 * q1**3 * (2 * q**6 + q**5 + q**4 + 3 * q**3 + 5 * q**2 + 3 * q + 1)
            / (q * l**6)
            - 2 * q1**6 * (3 * q**9 - 14 * q**8 + 16 * q**7 + 21 * q**6 - 32 * q**5
                           - 92 * q**4 - 81 * q**3 - 44 * q**2 - 14 * q - 3) * s2 / (q * l**9))
    c[4] = -9 * q**2 * q1**6 * s / l**6
    c[5] = -2 * q * q1**6 * (9 * q**3 - 14 * q**2 - 14 * q - 9) * s / l**7
    c[6] = -q1**6 * (9 * q**6 - 28 * q**5 + 2 * q**4 + 42 * q**3 + 58 * q**2 + 28 * q + 9) * s / l**8
    c[7] = -q * q1**4 * (q**4 - 5 * q**3 - 13 * q**2 - 5 * q + 1) * s / l**6
    c[8] = -2 * q1**4 * (q**7 - 9 * q**6 - 17 * q**5 + 4 * q**4 + 16 * q**3 + 9 * q**2
                         + q - 1) * s / l**7
    c[9] = -q1**4 * (q**10 - 13 * q**9 - 7 * q**8 + 59 * q**7 + 91 * q**6 + 66 * q**5
                     + 35 * q**4 + 19 * q**3 + 9 * q**2 + 3 * q + 1) * s / (q * l**8)
    c[10] = -3 * q**2 * q1**6 / l**6
    c[11] = -q * q1**6 * (3 * q**3 - 4 * q**2 - 4 * q - 3) / l**7
    c[12] = -q * q1**4 * (q**4 - 2 * q**3 - 7 * q**2 - 2 * q + 1) / l**6
    c[13] = -q1**4 * (q**7 - 6 * q**6 - 17 * q**5 - 11 * q**4 - 5 * q**3 - 3 * q**2
                      - 2 * q - 1) / l**7
    c[14] = q * q1**4 * (q**4 + q**3 - q**2 + q + 1) / l**6
    c[15] = q * q1**4 * (2 * q**6 + 3 * q**5 + 3 * q**3 + 3 * q**2 + 2 * q + 1) / l**7
    return b, c


@dataclass(frozen=True, eq=False)
class CenterManifoldModel:
    """Center-manifold data at the full-model Q0 for fixed ``(q, s)``."""

    q: float
    s: float
    ell: float
    lambda3: float
    F: np.ndarray
    Finv: np.ndarray
    b_coeffs: np.ndarray
    c_coeffs: np.ndarray

    def linear_part(self) -> np.ndarray:
        """Jacobian ``A`` of the full model at P0 with (p, r) at Q0."""
        q = self.q
        k = q / (1 + q)
        return np.array([[-1.0, -1.0, 0.0], [0.0, k, -k], [-q, 0.0, -q]])

    def jordan(self) -> np.ndarray:
        return np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, self.lambda3]])


def center_build(params) -> CenterManifoldModel:
    """Build the center-manifold model from ``ModelParams`` or a ``(q, s)`` pair."""
    if isinstance(params, ModelParams):
        q, s = params.q, params.s
    else:
        q, s = params
    if q <= 1:
        raise ContractError(f"q must exceed 1, got {q}")
    ell = 1 + q + q * q
    lam3 = -(1 + q - q / (1 + q))
    F = np.array([
        [1.0, 1.0, 1.0 / (q * (1 + q))],
        [-1.0, -2.0, q / (1 + q) ** 2],
        [-1.0, (1 - q) / q, 1.0],
    ])
    b, c = center_coefficients(q, s)
    for arr in (F, b, c):
        arr.setflags(write=False)
    Finv = np.linalg.inv(F)
    Finv.setflags(write=False)
    return CenterManifoldModel(q, s, ell, lam3, F, Finv, b, c)


def to_center(model: CenterManifoldModel, xyz) -> np.ndarray:
    return model.Finv @ np.asarray(xyz, dtype=float)


def from_center(model: CenterManifoldModel, uvw) -> np.ndarray:
    return model.F @ np.asarray(uvw, dtype=float)


def center_h_eval(model: CenterManifoldModel, u, v, pt, rt):
    """``w = h2 + h3`` on the center manifold (pure p~, r~ terms are zero)."""
    b, c = model.b_coeffs, model.c_coeffs
    h2 = (b[0] * u * u + b[1] * u * v + b[2] * v * v
          + b[3] * pt * u + b[4] * pt * v + b[5] * rt * u + b[6] * rt * v)
    h3 = (c[0] * u**3 + c[1] * u * u * v + c[2] * u * v * v + c[3] * v**3
          + pt * (c[4] * u * u + c[5] * u * v + c[6] * v * v)
          + rt * (c[7] * u * u + c[8] * u * v + c[9] * v * v)
          + pt * pt * (c[10] * u + c[11] * v)
          + pt * rt * (c[12] * u + c[13] * v)
          + rt * rt * (c[14] * u + c[15] * v))
    return h2 + h3


def center_n_eval(model: CenterManifoldModel, u, v, w, pt, rt):
    """Nonlinearity of the y-equation written in center coordinates."""
    q, s = model.q, model.s
    yy = -u - 2 * v + q / (1 + q) ** 2 * w
    zz = -u + (1 - q) / q * v + w
    return rt * yy - pt * zz + s * zz * zz - yy * zz * zz


def center_reduced_rhs(model: CenterManifoldModel, u, v, pt, rt):
    """Planar field on the center manifold: ``(u', v')``."""
    q, ell = model.q, model.ell
    w = center_h_eval(model, u, v, pt, rt)
    n = center_n_eval(model, u, v, w, pt, rt)
    return v + (1 + q) * (q * ell - 1) / ell**2 * n, -q * (1 + q) / ell * n


def center_invariance_residual(model: CenterManifoldModel, u, v, pt, rt):
    """Absolute residual of the center-manifold invariance equation."""
    q, ell = model.q, model.ell

    def h(uu, vv):
        return center_h_eval(model, uu, vv, pt, rt)

    hu = _complex_step(h, (u, v), 0)
    hv = _complex_step(h, (u, v), 1)
    ud, vd = center_reduced_rhs(model, u, v, pt, rt)
    w = h(u, v)
    n = center_n_eval(model, u, v, w, pt, rt)
    return np.abs(hu * ud + hv * vd - model.lambda3 * w - q * (1 + q) ** 2 / ell**2 * n)


def _slow_center_gap(params: ModelParams, m: CenterManifoldModel, u, v, pt, rt):
    q = params.q
    w = center_h_eval(m, u, v, pt, rt)
    x = u + v + w / (q * (1 + q))
    y = -u - 2 * v + q / (1 + q) ** 2 * w
    # p and r may leave the physical range far from the organizing center;
    # the polynomial terms are still well defined, so bypass ModelParams.
    full = _Coeffs(pt + q / (1 + q), rt + q / (1 + q), params.s)
    h = slow_h_terms(full, x, y)
    eps = params.epsilon
    w_slow = u + (1 - eps) * v + h[0] + eps * h[1] + eps**2 * h[2] + eps**3 * h[3]
    return w_slow - w


@dataclass(frozen=True)
class _Coeffs:
    p: float
    r: float
    s: float


def slow_center_consistency(params: ModelParams, u, v, pt, rt, jet: bool = True):
    """Distance in ``w`` between the slow manifold and the center manifold.

    The slow manifold ``z = h_eps(x, y)`` (through eps^3) reads
    ``w = u + (1 - eps) v + h_eps(x, y)`` in center coordinates, with
    ``(x, y)`` taken on the center manifold.

    The pointwise gap is ``O(eps^4) + O(eps^3 |a|^4)`` with
    ``a = (u, v, p~, r~)``: the eps^3 slow term carries monomials of degree
    four and five that a cubic center manifold cannot contain. With
    ``jet=True`` (default) both sides are reduced to their cubic Taylor jet
    in ``a`` along the ray through the given point, which isolates the
    ``O(eps^4)`` agreement. ``jet=False`` returns the raw pointwise gap.
    """
    if params.epsilon > 0.2:
        raise ContractError("slow-center comparison needs eps <= 0.2")
    m = center_build(params)
    a = np.array([u, v, pt, rt], dtype=float)
    if not jet:
        return float(abs(_slow_center_gap(params, m, *a)))
    if not np.any(a):
        return 0.0
    # the gap is a polynomial of degree <= 16 in sigma along the ray
    nodes = np.cos(np.pi * (np.arange(40) + 0.5) / 40)
    vals = np.array([_slow_center_gap(params, m, *(sg * a)) for sg in nodes])
    cheb = np.polynomial.Chebyshev.fit(nodes, vals, 20, domain=[-1, 1])
    co = cheb.convert(kind=np.polynomial.Polynomial).coef
    return float(abs(np.sum(co[:4])))


def invariance_monomial_check(q: float, s: float, n_dirs: int = 12, seed: int = 0) -> float:
    """Largest relative degree-0..3 coefficient of the invariance residual.

    Samples the residual along random rays ``sigma * d`` in
    ``(u, v, p~, r~)``, fits the exact-degree polynomial in ``sigma`` and
    reports the size of its low-order coefficients relative to the higher
    ones. A homogeneous polynomial that vanishes on many random rays is
    identically zero, so a tiny value certifies every quadratic and cubic
    coefficient without computer algebra.
    """
    m = center_build((q, s))
    rng = np.random.default_rng(seed)
    sig = np.cos(np.pi * (np.arange(24) + 0.5) / 24)
    worst = 0.0
    for _ in range(n_dirs):
        d = rng.normal(size=4)
        d /= np.linalg.norm(d)
        signed = []
        for sg in sig:
            u, v, pt, rt = sg * d
            q_, ell = m.q, m.ell
            w = center_h_eval(m, u, v, pt, rt)
            hu = _complex_step(lambda a, b_: center_h_eval(m, a, b_, pt, rt), (u, v), 0)
            hv = _complex_step(lambda a, b_: center_h_eval(m, a, b_, pt, rt), (u, v), 1)
            ud, vd = center_reduced_rhs(m, u, v, pt, rt)
            n = center_n_eval(m, u, v, w, pt, rt)
            signed.append(hu * ud + hv * vd - m.lambda3 * w - q_ * (1 + q_) ** 2 / ell**2 * n)
        co = np.polynomial.polynomial.polyfit(sig, np.array(signed), 13)
        scale = max(np.max(np.abs(co[4:])), 1.0)
        worst = max(worst, float(np.max(np.abs(co[:4])) / scale))
    return worst


def center_validity_radius(model: CenterManifoldModel, direction, pt=0.0, rt=0.0):
    """Heuristic radius along ``direction`` in (u, v) where the cubic part of
    ``h`` first exceeds half the quadratic part."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    b, c = model.b_coeffs, model.c_coeffs
    u, v = d
    quad = b[0] * u * u + b[1] * u * v + b[2] * v * v
    cub = c[0] * u**3 + c[1] * u * u * v + c[2] * u * v * v + c[3] * v**3
    if cub == 0:
        return np.inf
    return abs(0.5 * quad / cub) if quad != 0 else 0.0
