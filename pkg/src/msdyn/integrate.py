"""Time integration, section crossings and monodromy matrices."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _solvers as S
from .model import ContractError, ModelParams, Variant, pack_params

__all__ = [
    "Trajectory",
    "Section",
    "SectionEvent",
    "StiffnessError",
    "BLOWUP_NORM",
    "integrate_fixed",
    "integrate_adaptive",
    "solve_fixed",
    "solve_adaptive",
    "detect_crossings",
    "refine_event",
    "next_crossing",
    "monodromy",
    "monodromy_liouville",
    "write_csv",
]

BLOWUP_NORM = 1e6
MIN_EPS = 0.01


class StiffnessError(RuntimeError):
    """The explicit integrator cannot resolve the requested problem."""


@dataclass
class Trajectory:
    """Accepted states of one integration.

    ``derivs`` holds the vector field at every stored state and enables
    cubic Hermite dense output. It is ``None`` for fixed-step output
    decimated with a stride.
    """

    times: np.ndarray
    states: np.ndarray
    variant: Variant | None
    params: ModelParams | None
    derivs: np.ndarray | None = None
    blowup: bool = False
    n_rejected: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def step_sizes(self) -> np.ndarray:
        return np.abs(np.diff(self.times))

    def __call__(self, t) -> np.ndarray:
        """Hermite dense output at time ``t``."""
        if self.derivs is None:
            raise ContractError("dense output needs stored derivatives")
        ts = self.times
        fwd = ts[-1] >= ts[0]
        key = ts if fwd else -ts
        tk = t if fwd else -t
        i = int(np.clip(np.searchsorted(key, tk) - 1, 0, len(ts) - 2))
        out = np.empty(self.states.shape[1])
        S.hermite(ts[i], self.states[i], self.derivs[i], ts[i + 1], self.states[i + 1],
                  self.derivs[i + 1], float(t), out)
        return out


@dataclass(frozen=True)
class Section:
    """Hyperplane ``normal . y = offset`` with crossing direction filter.

    ``direction`` +1 keeps crossings where ``normal . y - offset`` goes
    from negative to non-negative, -1 the opposite, 0 both.
    """

    normal: tuple
    offset: float = 0.0
    direction: int = 1

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if not np.any(n != 0) or not np.all(np.isfinite(n)):
            raise ContractError("section normal must be finite and nonzero")
        if self.direction not in (-1, 0, 1):
            raise ContractError("direction must be -1, 0 or +1")

    @property
    def n(self) -> np.ndarray:
        return np.asarray(self.normal, dtype=float)

    def value(self, y) -> float:
        return float(self.n @ np.asarray(y) - self.offset)


@dataclass
class SectionEvent:
    time: float
    state: np.ndarray
    direction: int


def _check_stiffness(variant: Variant, params: ModelParams):
    if variant.dim == 3 and params.epsilon < MIN_EPS:
        raise StiffnessError(
            f"eps = {params.epsilon:.3g} < {MIN_EPS}: the fast scale is too stiff for the "
            "explicit pair; use a reduced planar variant instead")


def _status_check(status, t, where):
    if status == S.UNDERFLOW:
        raise StiffnessError(f"step size underflow (< 1e-14) at t = {t:.6g} in {where}")


def solve_fixed(f, par, y0, t_end, dt, t0=0.0, stride=1, blowup=BLOWUP_NORM):
    """RK4 on an arbitrary compiled field; returns ``(times, states, blown_up)``."""
    if not dt > 0 or not t_end > t0:
        raise ContractError("need dt > 0 and t_end > t0")
    n = int(round((t_end - t0) / dt))
    if not math.isclose(n * dt, t_end - t0, rel_tol=1e-9, abs_tol=1e-12):
        n = int(math.ceil((t_end - t0) / dt))
    ts, ys, status = S.rk4_path(f, par, float(t0), np.asarray(y0, dtype=float), float(dt),
                                n, int(stride), float(blowup))
    return ts, ys, status == S.BLOWUP


def solve_adaptive(f, par, y0, t_end, rel_tol=1e-9, abs_tol=1e-12, t0=0.0, hmax=np.inf,
                   max_steps=10_000_000, blowup=BLOWUP_NORM):
    """DOPRI5 on an arbitrary compiled field.

    Returns ``(times, states, derivs, status, n_rejected)``.
    """
    if not (1e-14 <= rel_tol <= 1e-2 and 1e-14 <= abs_tol <= 1e-2):
        raise ContractError("tolerances must lie in [1e-14, 1e-2]")
    return S.dopri5_path(f, par, float(t0), np.asarray(y0, dtype=float), float(t_end),
                         float(rel_tol), float(abs_tol), float(hmax), int(max_steps),
                         float(blowup))


def integrate_fixed(variant: Variant, params: ModelParams, initial_state, t_end: float,
                    dt: float, stride: int = 1) -> Trajectory:
    """Classical fourth-order Runge-Kutta with constant step ``dt``."""
    y0 = np.asarray(initial_state, dtype=float)
    if y0.shape != (variant.dim,):
        raise ContractError(f"{variant.name} expects a state of length {variant.dim}")
    _check_stiffness(variant, params)
    f = variant.kernels()[0]
    ts, ys, blown = solve_fixed(f, pack_params(variant, params), y0, t_end, dt, stride=stride)
    derivs = None
    if stride == 1:
        par = pack_params(variant, params)
        derivs = np.empty_like(ys)
        for i in range(len(ts)):
            f(ts[i], ys[i], par, derivs[i])
    return Trajectory(ts, ys, variant, params, derivs, blown, meta={"method": "rk4", "dt": dt})


def integrate_adaptive(variant: Variant, params: ModelParams, initial_state, t_end: float,
                       rel_tol: float = 1e-9, abs_tol: float = 1e-12, t0: float = 0.0,
                       hmax: float = np.inf, max_steps: int = 10_000_000) -> Trajectory:
    """Dormand-Prince 5(4) with PI step control.

    ``t_end < t0`` integrates backwards in time. Raises
    :class:`StiffnessError` on step-size underflow or when the 3-D model is
    asked to run with ``eps < 0.01``.
    """
    y0 = np.asarray(initial_state, dtype=float)
    if y0.shape != (variant.dim,):
        raise ContractError(f"{variant.name} expects a state of length {variant.dim}")
    if not np.all(np.isfinite(y0)):
        raise ContractError("initial state must be finite")
    _check_stiffness(variant, params)
    f = variant.kernels()[0]
    ts, ys, fs, status, nrej = solve_adaptive(
        f, pack_params(variant, params), y0, t_end, rel_tol, abs_tol, t0, hmax, max_steps)
    _status_check(status, ts[-1], variant.name)
    meta = {"method": "dopri5", "rel_tol": rel_tol, "abs_tol": abs_tol,
            "max_steps_hit": status == S.MAXSTEPS}
    return Trajectory(ts, ys, variant, params, fs, status == S.BLOWUP, nrej, meta)


def refine_event(traj: Trajectory, i: int, section: Section, tol: float = 1e-13):
    """Root of the section function on the Hermite interpolant of step ``i``."""
    from scipy.optimize import brentq

    def g(t):
        return section.value(_hermite_at(traj, i, t))

    t0, t1 = traj.times[i], traj.times[i + 1]
    g0, g1 = g(t0), g(t1)
    if g0 == 0.0:
        return t0, traj.states[i].copy()
    if g1 == 0.0:
        return t1, traj.states[i + 1].copy()
    lo, hi = (t0, t1) if t0 < t1 else (t1, t0)
    te = brentq(g, lo, hi, xtol=tol * max(1.0, abs(lo)), rtol=4 * np.finfo(float).eps,
                maxiter=200)
    return te, _hermite_at(traj, i, te)


def _hermite_at(traj, i, t):
    out = np.empty(traj.states.shape[1])
    S.hermite(traj.times[i], traj.states[i], traj.derivs[i], traj.times[i + 1],
              traj.states[i + 1], traj.derivs[i + 1], float(t), out)
    return out


def detect_crossings(traj: Trajectory, section: Section) -> list[SectionEvent]:
    """Every sign change of the section function, one event each.

    Events are refined on the Hermite interpolant so that
    ``|section(state)| <= 1e-10`` at the tolerances used in this package.
    """
    if traj.derivs is None:
        raise ContractError("crossing detection needs a trajectory with stored derivatives")
    g = traj.states @ section.n - section.offset
    events = []
    for i in range(len(g) - 1):
        a, b = g[i], g[i + 1]
        if a < 0.0 <= b:
            sense = 1
        elif a > 0.0 >= b:
            sense = -1
        else:
            continue
        if section.direction and sense != section.direction:
            continue
        te, ye = refine_event(traj, i, section)
        events.append(SectionEvent(float(te), ye, sense))
    return events


def next_crossing(variant: Variant, params: ModelParams, y0, section: Section, t_max: float,
                  n: int = 1, rel_tol: float = 1e-11, abs_tol: float = 1e-13,
                  t_skip: float = 1e-6, par=None):
    """Integrate live until the ``n``-th crossing of ``section``.

    Negative ``t_max`` runs backwards. Returns ``(time, state)`` or ``None``
    if no crossing occurs before ``t_max`` or the orbit escapes.
    """
    if par is None:
        par = pack_params(variant, params)
    f = variant.kernels()[0]
    te, ye, status = S.dopri5_section(
        f, par, 0.0, np.asarray(y0, dtype=float), float(t_max), rel_tol, abs_tol, np.inf,
        10_000_000, BLOWUP_NORM, section.n, float(section.offset), int(section.direction),
        int(n), float(t_skip))
    _status_check(status, te, variant.name)
    if status != S.OK:
        return None
    return te, ye


def monodromy_liouville(variant: Variant, params: ModelParams, cycle_point, period: float,
                        rel_tol: float = 1e-12, abs_tol: float = 1e-14):
    """Fundamental matrix over one period and ``exp(int tr J dt)``."""
    if not period > 0:
        raise ContractError(f"period must be positive, got {period}")
    n = variant.dim
    y0 = np.zeros(n + n * n + 1)
    y0[:n] = cycle_point
    y0[n:n + n * n] = np.eye(n).ravel()
    var = variant.kernels()[2]
    ts, ys, fs, status, _ = S.dopri5_path(
        var, pack_params(variant, params), 0.0, y0, float(period), rel_tol, abs_tol, np.inf,
        10_000_000, BLOWUP_NORM * 1e6)
    _status_check(status, ts[-1], variant.name)
    end = ys[-1]
    return end[n:n + n * n].reshape(n, n), math.exp(end[-1])


def monodromy(variant: Variant, params: ModelParams, cycle_point, period: float) -> np.ndarray:
    """Fundamental matrix solution over one period of a periodic orbit."""
    return monodromy_liouville(variant, params, cycle_point, period)[0]


def write_csv(traj: Trajectory, path_or_file):
    """Write ``t,x,y[,z]`` rows with 17 significant digits."""
    cols = ["t", "x", "y", "z"][: traj.states.shape[1] + 1]

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for t, y in zip(traj.times, traj.states):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in y])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)
