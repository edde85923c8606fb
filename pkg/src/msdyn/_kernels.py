"""Compiled right-hand sides and Jacobians.

Every vector field shares one calling convention, ``f(t, y, par, out)``,
so the integrators in :mod:`msdyn.integrate` can take any of them as a
first-class argument. ``par`` is the flat array built by
:func:`msdyn.model.pack_params`.
"""
import numpy as np
from numba import njit

# flat parameter layout
P, Q, R, S, EPS, ORDER, PT, RT = 0, 1, 2, 3, 4, 5, 6, 7
B0 = 8            # b1..b7 -> par[8:15]
C0 = 15           # c1..c16 -> par[15:31]
ELL, KU, KV, KY, KZ, LAM3 = 31, 32, 33, 34, 35, 36
PAR_SIZE = 37


@njit(cache=True)
def full3d_rhs(t, y, par, out):
    p, q, r, s = par[P], par[Q], par[R], par[S]
    x, yy, z = y[0], y[1], y[2]
    out[0] = -x - yy
    out[1] = r * yy - p * z + s * z * z - yy * z * z
    out[2] = -q * x - q * z


@njit(cache=True)
def full3d_jac(y, par, jac):
    p, q, r, s = par[P], par[Q], par[R], par[S]
    yy, z = y[1], y[2]
    jac[0, 0] = -1.0
    jac[0, 1] = -1.0
    jac[0, 2] = 0.0
    jac[1, 0] = 0.0
    jac[1, 1] = r - z * z
    jac[1, 2] = -p + 2.0 * s * z - 2.0 * yy * z
    jac[2, 0] = -q
    jac[2, 1] = 0.0
    jac[2, 2] = -q


@njit(cache=True)
def slow_h(x, y, par, order):
    """Truncated slow-manifold graph and its gradient, (h, h_x, h_y)."""
    p, r, s, e = par[P], par[R], par[S], par[EPS]
    h = -x
    hx = -1.0
    hy = 0.0
    if order >= 1:
        h += e * (-(x + y))
        hx += -e
        hy += -e
    if order >= 2:
        g = r * y + p * x + (s - y) * x * x
        gx = p + 2.0 * (s - y) * x
        gy = r - x * x
        e2 = e * e
        h += e2 * (-(x + y) + g)
        hx += e2 * (-1.0 + gx)
        hy += e2 * (-1.0 + gy)
        if order >= 3:
            a = 1.0 - 2.0 * p + 4.0 * x * (y - s)
            b = 1.0 - r + x * x
            e3 = e2 * e
            h += e3 * (-a * (x + y) + b * g)
            hx += e3 * (-4.0 * (y - s) * (x + y) - a + 2.0 * x * g + b * gx)
            hy += e3 * (-4.0 * x * (x + y) - a + b * gy)
    return h, hx, hy


@njit(cache=True)
def planar_rhs(t, y, par, out):
    p, r, s = par[P], par[R], par[S]
    order = int(par[ORDER])
    x, yy = y[0], y[1]
    h, hx, hy = slow_h(x, yy, par, order)
    out[0] = -x - yy
    out[1] = r * yy - p * h + s * h * h - yy * h * h


@njit(cache=True)
def planar_jac(y, par, jac):
    p, r, s = par[P], par[R], par[S]
    order = int(par[ORDER])
    x, yy = y[0], y[1]
    h, hx, hy = slow_h(x, yy, par, order)
    dfdh = -p + 2.0 * s * h - 2.0 * yy * h
    jac[0, 0] = -1.0
    jac[0, 1] = -1.0
    jac[1, 0] = dfdh * hx
    jac[1, 1] = r + dfdh * hy - h * h


@njit(cache=True)
def center_h(u, v, par):
    """Quadratic plus cubic center-manifold graph and its (u, v) gradient."""
    pt, rt = par[PT], par[RT]
    b = par[B0:B0 + 7]
    c = par[C0:C0 + 16]
    h = (b[0] * u * u + b[1] * u * v + b[2] * v * v
         + b[3] * pt * u + b[4] * pt * v + b[5] * rt * u + b[6] * rt * v
         + c[0] * u ** 3 + c[1] * u * u * v + c[2] * u * v * v + c[3] * v ** 3
         + c[4] * pt * u * u + c[5] * pt * u * v + c[6] * pt * v * v
         + c[7] * rt * u * u + c[8] * rt * u * v + c[9] * rt * v * v
         + c[10] * pt * pt * u + c[11] * pt * pt * v
         + c[12] * pt * rt * u + c[13] * pt * rt * v
         + c[14] * rt * rt * u + c[15] * rt * rt * v)
    hu = (2.0 * b[0] * u + b[1] * v + b[3] * pt + b[5] * rt
          + 3.0 * c[0] * u * u + 2.0 * c[1] * u * v + c[2] * v * v
          + 2.0 * c[4] * pt * u + c[5] * pt * v
          + 2.0 * c[7] * rt * u + c[8] * rt * v
          + c[10] * pt * pt + c[12] * pt * rt + c[14] * rt * rt)
    hv = (b[1] * u + 2.0 * b[2] * v + b[4] * pt + b[6] * rt
          + c[1] * u * u + 2.0 * c[2] * u * v + 3.0 * c[3] * v * v
          + c[5] * pt * u + 2.0 * c[6] * pt * v
          + c[8] * rt * u + 2.0 * c[9] * rt * v
          + c[11] * pt * pt + c[13] * pt * rt + c[15] * rt * rt)
    return h, hu, hv


@njit(cache=True)
def center_n(u, v, w, par):
    """Nonlinearity n in center coordinates and its partials in (Y, Z)."""
    pt, rt, s = par[PT], par[RT], par[S]
    yy = -u - 2.0 * v + par[KY] * w
    zz = -u + par[KZ] * v + w
    n = rt * yy - pt * zz + s * zz * zz - yy * zz * zz
    n_y = rt - zz * zz
    n_z = -pt + 2.0 * s * zz - 2.0 * yy * zz
    return n, n_y, n_z


@njit(cache=True)
def center_rhs(t, y, par, out):
    u, v = y[0], y[1]
    w, hu, hv = center_h(u, v, par)
    n, n_y, n_z = center_n(u, v, w, par)
    out[0] = v + par[KU] * n
    out[1] = par[KV] * n


@njit(cache=True)
def center_jac(y, par, jac):
    u, v = y[0], y[1]
    w, hu, hv = center_h(u, v, par)
    n, n_y, n_z = center_n(u, v, w, par)
    ky, kz = par[KY], par[KZ]
    dn_du = n_y * (-1.0 + ky * hu) + n_z * (-1.0 + hu)
    dn_dv = n_y * (-2.0 + ky * hv) + n_z * (kz + hv)
    jac[0, 0] = par[KU] * dn_du
    jac[0, 1] = 1.0 + par[KU] * dn_dv
    jac[1, 0] = par[KV] * dn_du
    jac[1, 1] = par[KV] * dn_dv


@njit(cache=True)
def _var_fill(y, jm, out, n):
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += jm[i, k] * y[n + k * n + j]
            out[n + i * n + j] = acc
    tr = 0.0
    for i in range(n):
        tr += jm[i, i]
    out[n + n * n] = tr


# Variational systems. The augmented state is
# [x (n), Phi (n*n, row-major), int tr J dt].

@njit(cache=True)
def full3d_var(t, y, par, out):
    full3d_rhs(t, y[:3], par, out[:3])
    jm = np.empty((3, 3))
    full3d_jac(y[:3], par, jm)
    _var_fill(y, jm, out, 3)


@njit(cache=True)
def planar_var(t, y, par, out):
    planar_rhs(t, y[:2], par, out[:2])
    jm = np.empty((2, 2))
    planar_jac(y[:2], par, jm)
    _var_fill(y, jm, out, 2)


@njit(cache=True)
def center_var(t, y, par, out):
    center_rhs(t, y[:2], par, out[:2])
    jm = np.empty((2, 2))
    center_jac(y[:2], par, jm)
    _var_fill(y, jm, out, 2)
