"""Compiled one-step integrators.

Dormand-Prince 5(4) with PI step control and classical RK4. All drivers
take the vector field ``f(t, y, par, out)`` as a first-class argument.
They are not disk-cached: numba cannot reuse or reliably pickle
overloads keyed on function-typed arguments.
Time may run backwards (``t_end < t0``).

Status codes: 0 ok, 1 blow-up, 2 step underflow, 3 step budget exhausted,
4 no event found.
"""
import numpy as np
from numba import njit

OK, BLOWUP, UNDERFLOW, MAXSTEPS, NOEVENT = 0, 1, 2, 3, 4

# Dormand-Prince tableau
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
C2, C3, C4, C5 = 0.2, 0.3, 0.8, 8.0 / 9.0

SAFETY, FACMIN, FACMAX = 0.9, 0.2, 10.0
BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA


@njit(nogil=True)
def _norm(y):
    acc = 0.0
    for i in range(y.shape[0]):
        acc += y[i] * y[i]
    return np.sqrt(acc)


@njit(nogil=True)
def _dp_step(f, par, t, y, k, h, ynew, tmp):
    """One Dormand-Prince step from (t, y) with k[0] = f(t, y) given.

    Fills ``ynew`` and k[1..6] (k[6] = f(t+h, ynew)); returns nothing.
    """
    d = y.shape[0]
    for i in range(d):
        tmp[i] = y[i] + h * A21 * k[0, i]
    f(t + C2 * h, tmp, par, k[1])
    for i in range(d):
        tmp[i] = y[i] + h * (A31 * k[0, i] + A32 * k[1, i])
    f(t + C3 * h, tmp, par, k[2])
    for i in range(d):
        tmp[i] = y[i] + h * (A41 * k[0, i] + A42 * k[1, i] + A43 * k[2, i])
    f(t + C4 * h, tmp, par, k[3])
    for i in range(d):
        tmp[i] = y[i] + h * (A51 * k[0, i] + A52 * k[1, i] + A53 * k[2, i] + A54 * k[3, i])
    f(t + C5 * h, tmp, par, k[4])
    for i in range(d):
        tmp[i] = y[i] + h * (A61 * k[0, i] + A62 * k[1, i] + A63 * k[2, i]
                             + A64 * k[3, i] + A65 * k[4, i])
    f(t + h, tmp, par, k[5])
    for i in range(d):
        ynew[i] = y[i] + h * (B1 * k[0, i] + B3 * k[2, i] + B4 * k[3, i]
                              + B5 * k[4, i] + B6 * k[5, i])
    f(t + h, ynew, par, k[6])


@njit(nogil=True)
def _dp_error(y, ynew, k, h, rtol, atol):
    d = y.shape[0]
    acc = 0.0
    for i in range(d):
        e = h * (E1 * k[0, i] + E3 * k[2, i] + E4 * k[3, i]
                 + E5 * k[4, i] + E6 * k[5, i] + E7 * k[6, i])
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        acc += (e / sc) ** 2
    return np.sqrt(acc / d)


@njit(nogil=True)
def _initial_step(f, par, t, y, f0, rtol, atol, sign, hmax):
    d = y.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(d):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = np.sqrt(d0 / d)
    d1 = np.sqrt(d1 / d)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, hmax)
    y1 = np.empty(d)
    f1 = np.empty(d)
    for i in range(d):
        y1[i] = y[i] + sign * h0 * f0[i]
    f(t + sign * h0, y1, par, f1)
    d2 = 0.0
    for i in range(d):
        sc = atol + rtol * abs(y[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = np.sqrt(d2 / d) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, hmax)


@njit(nogil=True)
def hermite(t0, y0, f0, t1, y1, f1, t, out):
    h = t1 - t0
    th = (t - t0) / h
    th2 = th * th
    th3 = th2 * th
    h00 = 2.0 * th3 - 3.0 * th2 + 1.0
    h10 = th3 - 2.0 * th2 + th
    h01 = -2.0 * th3 + 3.0 * th2
    h11 = th3 - th2
    for i in range(y0.shape[0]):
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i]


@njit(nogil=True)
def dopri5_path(f, par, t0, y0, t_end, rtol, atol, hmax, max_steps, blowup):
    """Adaptive integration storing every accepted step.

    Returns ``(ts, ys, fs, status, n_reject)``; ``fs`` holds the field at
    each stored point for Hermite dense output.
    """
    d = y0.shape[0]
    sign = 1.0 if t_end >= t0 else -1.0
    cap = 1024
    ts = np.empty(cap)
    ys = np.empty((cap, d))
    fs = np.empty((cap, d))
    k = np.empty((7, d))
    y = y0.copy()
    ynew = np.empty(d)
    tmp = np.empty(d)
    f(t0, y, par, k[0])
    ts[0] = t0
    ys[0] = y
    fs[0] = k[0]
    n = 1
    t = t0
    status = OK
    n_reject = 0
    if t_end == t0:
        return ts[:1], ys[:1], fs[:1], status, 0
    h = _initial_step(f, par, t, y, k[0], rtol, atol, sign, hmax)
    err_old = 1e-4
    steps = 0
    rejected_last = False
    while True:
        if steps >= max_steps:
            status = MAXSTEPS
            break
        if h < 1e-14 * max(1.0, abs(t)):
            status = UNDERFLOW
            break
        last = False
        if sign * (t + sign * h - t_end) >= 0.0:
            h = abs(t_end - t)
            last = True
        _dp_step(f, par, t, y, k, sign * h, ynew, tmp)
        err = _dp_error(y, ynew, k, h, rtol, atol)
        steps += 1
        if err <= 1.0:
            if err == 0.0:
                fac = FACMAX
            else:
                fac = SAFETY * err ** (-ALPHA) * err_old ** BETA
                fac = min(FACMAX, max(FACMIN, fac))
            if rejected_last:
                fac = min(fac, 1.0)
            err_old = max(err, 1e-4)
            t = t_end if last else t + sign * h
            for i in range(d):
                y[i] = ynew[i]
                k[0, i] = k[6, i]
            if n == cap:
                cap *= 2
                ts2 = np.empty(cap)
                ys2 = np.empty((cap, d))
                fs2 = np.empty((cap, d))
                ts2[:n] = ts[:n]
                ys2[:n] = ys[:n]
                fs2[:n] = fs[:n]
                ts, ys, fs = ts2, ys2, fs2
            ts[n] = t
            ys[n] = y
            fs[n] = k[0]
            n += 1
            if not (_norm(y) <= blowup):
                status = BLOWUP
                break
            if last:
                break
            h = min(h * fac, hmax)
            rejected_last = False
        else:
            n_reject += 1
            if not np.isfinite(err):
                h *= FACMIN
            else:
                h *= max(FACMIN, SAFETY * err ** (-ALPHA))
            rejected_last = True
    return ts[:n], ys[:n], fs[:n], status, n_reject


@njit(nogil=True)
def rk4_path(f, par, t0, y0, dt, n_steps, stride, blowup):
    """Classical RK4 with fixed step, storing every ``stride``-th point."""
    d = y0.shape[0]
    n_out = n_steps // stride + 1
    if n_steps % stride != 0:
        n_out += 1
    ts = np.empty(n_out)
    ys = np.empty((n_out, d))
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    tmp = np.empty(d)
    y = y0.copy()
    ts[0] = t0
    ys[0] = y
    j = 1
    status = OK
    t = t0
    for step in range(1, n_steps + 1):
        f(t, y, par, k1)
        for i in range(d):
            tmp[i] = y[i] + 0.5 * dt * k1[i]
        f(t + 0.5 * dt, tmp, par, k2)
        for i in range(d):
            tmp[i] = y[i] + 0.5 * dt * k2[i]
        f(t + 0.5 * dt, tmp, par, k3)
        for i in range(d):
            tmp[i] = y[i] + dt * k3[i]
        f(t + dt, tmp, par, k4)
        for i in range(d):
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t = t0 + step * dt
        bad = not (_norm(y) <= blowup)
        if step % stride == 0 or step == n_steps or bad:
            ts[j] = t
            ys[j] = y
            j += 1
        if bad:
            status = BLOWUP
            break
    return ts[:j], ys[:j], status


@njit(nogil=True)
def _section_value(y, normal, offset):
    acc = -offset
    for i in range(y.shape[0]):
        acc += normal[i] * y[i]
    return acc


@njit(nogil=True)
def _refine_crossing(f, par, t0, y0, f0, t1, y1, f1, normal, offset, k, tmp, yout):
    """Root of the section function inside one accepted step.

    Illinois iteration on the Hermite interpolant, then Newton polishing
    with a single Dormand-Prince substep from the step start so the event
    state carries the integrator's own accuracy. Returns the event time.
    """
    ga = _section_value(y0, normal, offset)
    gb = _section_value(y1, normal, offset)
    a, b = t0, t1
    side = 0
    tc = t0
    for _ in range(100):
        tc = (a * gb - b * ga) / (gb - ga)
        hermite(t0, y0, f0, t1, y1, f1, tc, yout)
        gc = _section_value(yout, normal, offset)
        if gc == 0.0 or abs(b - a) < 1e-15 * max(1.0, abs(tc)):
            break
        if (gc > 0.0) == (gb > 0.0):
            b, gb = tc, gc
            if side == -1:
                ga *= 0.5
            side = -1
        else:
            a, ga = tc, gc
            if side == 1:
                gb *= 0.5
            side = 1
    d = y0.shape[0]
    fy = np.empty(d)
    for _ in range(4):
        tau = tc - t0
        for i in range(d):
            k[0, i] = f0[i]
        if tau == 0.0:
            for i in range(d):
                yout[i] = y0[i]
        else:
            _dp_step(f, par, t0, y0, k, tau, yout, tmp)
        g = _section_value(yout, normal, offset)
        f(tc, yout, par, fy)
        dg = _section_value(fy, normal, 0.0)
        if dg == 0.0:
            break
        dt = g / dg
        tc -= dt
        if abs(dt) < 1e-15 * max(1.0, abs(tc)):
            break
    tau = tc - t0
    for i in range(d):
        k[0, i] = f0[i]
    if tau == 0.0:
        for i in range(d):
            yout[i] = y0[i]
    else:
        _dp_step(f, par, t0, y0, k, tau, yout, tmp)
    return tc


@njit(nogil=True)
def dopri5_section(f, par, t0, y0, t_max, rtol, atol, hmax, max_steps, blowup,
                   normal, offset, direction, n_target, t_skip):
    """Integrate until the ``n_target``-th crossing of the section.

    Crossings within ``t_skip`` of the start are ignored. Returns
    ``(t_event, y_event, status)``. ``direction`` 0 counts both senses.
    """
    d = y0.shape[0]
    sign = 1.0 if t_max >= t0 else -1.0
    k = np.empty((7, d))
    kr = np.empty((7, d))
    y = y0.copy()
    ynew = np.empty(d)
    tmp = np.empty(d)
    yev = np.empty(d)
    f0 = np.empty(d)
    f(t0, y, par, k[0])
    t = t0
    h = _initial_step(f, par, t, y, k[0], rtol, atol, sign, hmax)
    err_old = 1e-4
    steps = 0
    count = 0
    rejected_last = False
    g0 = _section_value(y, normal, offset)
    while True:
        if steps >= max_steps:
            return t, y, MAXSTEPS
        if h < 1e-14 * max(1.0, abs(t)):
            return t, y, UNDERFLOW
        last = False
        if sign * (t + sign * h - t_max) >= 0.0:
            h = abs(t_max - t)
            last = True
        _dp_step(f, par, t, y, k, sign * h, ynew, tmp)
        err = _dp_error(y, ynew, k, h, rtol, atol)
        steps += 1
        if err <= 1.0:
            if err == 0.0:
                fac = FACMAX
            else:
                fac = min(FACMAX, max(FACMIN, SAFETY * err ** (-ALPHA) * err_old ** BETA))
            if rejected_last:
                fac = min(fac, 1.0)
            err_old = max(err, 1e-4)
            tn = t_max if last else t + sign * h
            g1 = _section_value(ynew, normal, offset)
            hit = False
            if direction >= 0 and g0 < 0.0 and g1 >= 0.0:
                hit = True
            if direction <= 0 and g0 > 0.0 and g1 <= 0.0:
                hit = True
            if hit:
                for i in range(d):
                    f0[i] = k[0, i]
                te = _refine_crossing(f, par, t, y, f0, tn, ynew, k[6], normal, offset,
                                      kr, tmp, yev)
                if sign * (te - t0) > t_skip:
                    count += 1
                    if count == n_target:
                        return te, yev.copy(), OK
            t = tn
            g0 = g1
            for i in range(d):
                y[i] = ynew[i]
                k[0, i] = k[6, i]
            if not (_norm(y) <= blowup):
                return t, y, BLOWUP
            if last:
                return t, y, NOEVENT
            h = min(h * fac, hmax)
            rejected_last = False
        else:
            if not np.isfinite(err):
                h *= FACMIN
            else:
                h *= max(FACMIN, SAFETY * err ** (-ALPHA))
            rejected_last = True


@njit(nogil=True)
def dopri5_window_max(f, par, t0, y0, t_trans, t_win, rtol, atol, hmax, max_steps,
                      blowup, comp):
    """Max of component ``comp`` over ``[t0 + t_trans, t0 + t_trans + t_win]``.

    Interior maxima inside a step are located on the Hermite interpolant.
    Returns ``(value, y_final, status)``.
    """
    d = y0.shape[0]
    k = np.empty((7, d))
    y = y0.copy()
    ynew = np.empty(d)
    tmp = np.empty(d)
    yi = np.empty(d)
    f(t0, y, par, k[0])
    t = t0
    ta = t0 + t_trans
    tb = ta + t_win
    h = _initial_step(f, par, t, y, k[0], rtol, atol, 1.0, hmax)
    err_old = 1e-4
    steps = 0
    best = -np.inf
    rejected_last = False
    status = OK
    while True:
        if steps >= max_steps:
            status = MAXSTEPS
            break
        if h < 1e-14 * max(1.0, abs(t)):
            status = UNDERFLOW
            break
        # land exactly on the window start and end
        target = ta if t < ta else tb
        last = False
        if t + h >= target:
            h = target - t
            last = True
        _dp_step(f, par, t, y, k, h, ynew, tmp)
        err = _dp_error(y, ynew, k, h, rtol, atol)
        steps += 1
        if err <= 1.0:
            if err == 0.0:
                fac = FACMAX
            else:
                fac = min(FACMAX, max(FACMIN, SAFETY * err ** (-ALPHA) * err_old ** BETA))
            if rejected_last:
                fac = min(fac, 1.0)
            err_old = max(err, 1e-4)
            tn = target if last else t + h
            if t >= ta:
                if y[comp] > best:
                    best = y[comp]
                if ynew[comp] > best:
                    best = ynew[comp]
                if k[0, comp] > 0.0 and k[6, comp] < 0.0:
                    # maximum of the cubic x(theta) inside the step
                    a, b = t, tn
                    fa = k[0, comp]
                    for _ in range(60):
                        m = 0.5 * (a + b)
                        hermite(t, y, k[0], tn, ynew, k[6], m + 1e-9 * (tn - t), yi)
                        v1 = yi[comp]
                        hermite(t, y, k[0], tn, ynew, k[6], m - 1e-9 * (tn - t), yi)
                        slope = v1 - yi[comp]
                        if slope > 0.0:
                            a = m
                        else:
                            b = m
                    hermite(t, y, k[0], tn, ynew, k[6], 0.5 * (a + b), yi)
                    if yi[comp] > best:
                        best = yi[comp]
            t = tn
            for i in range(d):
                y[i] = ynew[i]
                k[0, i] = k[6, i]
            if not (_norm(y) <= blowup):
                status = BLOWUP
                break
            if last and target == tb:
                break
            h = min(max(h * fac, 1e-12), hmax)
            rejected_last = False
        else:
            if not np.isfinite(err):
                h *= FACMIN
            else:
                h *= max(FACMIN, SAFETY * err ** (-ALPHA))
            rejected_last = True
    return best, y, status
