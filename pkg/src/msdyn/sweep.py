"""Parameter-plane sweeps: x-bar color maps, isoperiod grids and basin maps.

Cells are independent jobs run on a thread pool (the compiled integrators
release the GIL). Every cell draws its random initial condition from its
own counter-based stream keyed by ``(seed, cell index)``, and results are
stored by index, so output does not depend on the number of workers or on
completion order.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import global_dynamics as gd
from .integrate import BLOWUP_NORM, Section, integrate_adaptive, next_crossing
from .model import ContractError, ModelParams, Variant, equilibria, pack_params, rhs

__all__ = [
    "CellRecord",
    "GridProduct",
    "BasinGrid",
    "resolve_threads",
    "run_indexed",
    "cell_rng",
    "cell_initial_state",
    "classify_cell",
    "colormap_grid",
    "isoperiod_grid",
    "isoperiod_contours",
    "basin_grid",
    "fmt_float",
    "MAX_COLORMAP_DIM",
    "MAX_ISOPERIOD_DIM",
]

MAX_COLORMAP_DIM = 2000
MAX_ISOPERIOD_DIM = 500
IC_BOX = 2.0
CYCLE_LABELS = (gd.Attractor.SMALL_CYCLE, gd.Attractor.LARGE_CYCLE)


def fmt_float(v) -> str:
    """Shortest round-trip decimal; empty for ``None``."""
    if v is None:
        return ""
    return repr(float(v))


@dataclass
class CellRecord:
    p: float
    r: float
    xbar: float
    attractor: gd.Attractor
    period: float | None = None

    def __post_init__(self):
        self.attractor = gd.Attractor(self.attractor)
        is_cycle = self.attractor in CYCLE_LABELS
        if is_cycle != (self.period is not None):
            raise ContractError("period is present exactly for cycle attractors")

    def row(self):
        return [fmt_float(self.p), fmt_float(self.r), fmt_float(self.xbar),
                self.attractor.value, fmt_float(self.period)]


@dataclass
class GridProduct:
    """Cells of a ``(p, r)`` grid, index ``i_r * n_p + i_p``."""

    p_values: np.ndarray
    r_values: np.ndarray
    cells: list
    meta: dict = field(default_factory=dict)

    HEADER = ("p", "r", "xbar", "attractor", "period")

    @property
    def shape(self):
        return len(self.r_values), len(self.p_values)

    def field(self, name: str) -> np.ndarray:
        """``(n_r, n_p)`` array of ``xbar`` or ``period`` (NaN where absent)."""
        vals = [getattr(c, name) for c in self.cells]
        return np.array([np.nan if v is None else v for v in vals], float).reshape(self.shape)

    def labels(self) -> np.ndarray:
        return np.array([c.attractor.value for c in self.cells]).reshape(self.shape)

    def write_csv(self, path_or_file):
        def emit(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for c in self.cells:
                w.writerow(c.row())

        if hasattr(path_or_file, "write"):
            emit(path_or_file)
        else:
            with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
                emit(fh)


@dataclass
class BasinGrid:
    """Attractor labels over a grid of initial ``(x, y)`` at fixed parameters."""

    x_values: np.ndarray
    y_values: np.ndarray
    labels: list
    params: ModelParams
    meta: dict = field(default_factory=dict)

    def write_csv(self, path_or_file):
        def emit(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("x", "y", "attractor"))
            k = 0
            for y in self.y_values:
                for x in self.x_values:
                    w.writerow([fmt_float(x), fmt_float(y), self.labels[k].value])
                    k += 1

        if hasattr(path_or_file, "write"):
            emit(path_or_file)
        else:
            with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
                emit(fh)


# ---------------------------------------------------------------- execution

def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``MSDYN_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("MSDYN_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ContractError(f"threads must be >= 1, got {threads}")
    return int(threads)


def run_indexed(job, n: int, threads: int | None = None) -> list:
    """``[job(0), ..., job(n-1)]`` computed on a pool, stored by index."""
    threads = resolve_threads(threads)
    out = [None] * n
    if threads == 1 or n <= 1:
        for i in range(n):
            out[i] = job(i)
        return out

    def run(i):
        out[i] = job(i)

    with ThreadPoolExecutor(max_workers=threads) as ex:
        for fut in [ex.submit(run, i) for i in range(n)]:
            fut.result()
    return out


def cell_rng(seed: int, index: int) -> np.random.Generator:
    """Philox stream for one cell; independent of every other cell."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed),
                                                                       spawn_key=(int(index),))))


def cell_initial_state(variant: Variant, seed: int, index: int) -> np.ndarray:
    return cell_rng(seed, index).uniform(-IC_BOX, IC_BOX, variant.dim)


# ---------------------------------------------------------------- cell work

def classify_cell(variant: Variant, params: ModelParams, y_final, match: float = 1e-5,
                  par=None, eqs=None, retries: int = 2, t_extra: float = 300.0):
    """Label and period from the state reached after the x-bar window.

    Equilibria match within ``match``; otherwise returns to a section
    through the state decide between a cycle (the last return time is the
    period), a slowly converging focus, and an undecided orbit; undecided
    orbits are integrated ``t_extra`` further, up to ``retries`` times. A
    cycle is large when its x-range contains more than one equilibrium.
    """
    if not np.all(np.isfinite(y_final)) or np.linalg.norm(y_final) >= BLOWUP_NORM:
        return gd.Attractor.ESCAPE, None
    if eqs is None:
        eqs = equilibria(variant, params)
    for eq in eqs:
        if np.linalg.norm(y_final - eq.location) <= match:
            return gd.Attractor(eq.label), None
    if par is None:
        par = pack_params(variant, params)
    y = np.asarray(y_final, dtype=float)
    # hyperplane through the current point normal to the flow: a periodic
    # orbit through it returns once per period
    n = rhs(variant, params, y)
    if not np.linalg.norm(n) > 0:
        return gd.Attractor.INCONCLUSIVE, None
    for _ in range(retries + 1):
        sec = Section(tuple(n), float(n @ y), 1)
        label, period = gd.cycle_recurrence(variant, params, y, sec, eqs, 1e3 * match,
                                            par=par)
        if label is not None:
            return label, period
        # undecided: let the orbit settle further and look again
        tr = integrate_adaptive(variant, params, y, t_extra)
        if tr.blowup:
            return gd.Attractor.ESCAPE, None
        y = tr.final
        for eq in eqs:
            if np.linalg.norm(y - eq.location) <= match:
                return gd.Attractor(eq.label), None
        n = rhs(variant, params, y)
        if not np.linalg.norm(n) > 0:
            break
    return gd.Attractor.INCONCLUSIVE, None


def _cell(variant, params, y0, t_trans, t_win, rel_tol, abs_tol, label=True):
    from . import _solvers as S

    par = pack_params(variant, params)
    f = variant.kernels()[0]
    best, yf, status = S.dopri5_window_max(
        f, par, 0.0, np.asarray(y0, dtype=float), float(t_trans), float(t_win), rel_tol,
        abs_tol, np.inf, 50_000_000, BLOWUP_NORM, 0)
    if status == S.BLOWUP:
        return CellRecord(params.p, params.r, gd.XBAR_ESCAPE, gd.Attractor.ESCAPE)
    if status != S.OK:
        return CellRecord(params.p, params.r, math.nan, gd.Attractor.INCONCLUSIVE)
    if not label:
        return CellRecord(params.p, params.r, float(best), gd.Attractor.INCONCLUSIVE)
    att, period = classify_cell(variant, params, yf, par=par)
    return CellRecord(params.p, params.r, float(best), att, period)


def _axes(p_range, r_range, dims, limit):
    n_p, n_r = (int(d) for d in dims)
    if not (1 <= n_p <= limit and 1 <= n_r <= limit):
        raise ContractError(f"grid dims must lie in 1..{limit}, got {dims}")
    for lo, hi in (p_range, r_range):
        if not hi >= lo:
            raise ContractError(f"empty range ({lo}, {hi})")
    return np.linspace(*p_range, n_p), np.linspace(*r_range, n_r)


def colormap_grid(variant: Variant, params: ModelParams, p_range, r_range, dims, seed: int = 0,
                  threads: int | None = None, t_trans: float = gd.T_TRANS,
                  t_win: float = gd.T_WIN, rel_tol: float = 1e-8, abs_tol: float = 1e-10,
                  label: bool = True) -> GridProduct:
    """x-bar over a ``(p, r)`` grid with one seeded random start per cell.

    ``params`` fixes ``q`` and ``s``; ``dims = (n_p, n_r)``. Starts are
    uniform in ``[-2, 2]^dim``.
    """
    ps, rs = _axes(p_range, r_range, dims, MAX_COLORMAP_DIM)
    n_p = len(ps)

    def job(k):
        pr = params.replace(p=float(ps[k % n_p]), r=float(rs[k // n_p]))
        y0 = cell_initial_state(variant, seed, k)
        return _cell(variant, pr, y0, t_trans, t_win, rel_tol, abs_tol, label)

    cells = run_indexed(job, len(ps) * len(rs), threads)
    return GridProduct(ps, rs, cells, {"kind": "colormap", "variant": variant.name,
                                       "q": params.q, "s": params.s, "seed": seed,
                                       "t_trans": t_trans, "t_win": t_win})


def isoperiod_grid(variant: Variant, params: ModelParams, p_range, r_range, dims,
                   seed: int = 0, threads: int | None = None, t_trans: float = gd.T_TRANS,
                   rel_tol: float = 1e-9, abs_tol: float = 1e-11,
                   starts: int = 2) -> GridProduct:
    """Stable-cycle period per cell, absent where no stable cycle is reached.

    Each cell tries up to ``starts`` seeded random starts and keeps the
    first that lands on a cycle.
    """
    ps, rs = _axes(p_range, r_range, dims, MAX_ISOPERIOD_DIM)
    n_p = len(ps)
    n = len(ps) * len(rs)

    def job(k):
        pr = params.replace(p=float(ps[k % n_p]), r=float(rs[k // n_p]))
        rec = None
        for j in range(starts):
            y0 = cell_initial_state(variant, seed, k + j * n)
            rec = _cell(variant, pr, y0, t_trans, 50.0, rel_tol, abs_tol)
            if rec.period is not None:
                return rec
        return rec

    cells = run_indexed(job, n, threads)
    return GridProduct(ps, rs, cells, {"kind": "isoperiod", "variant": variant.name,
                                       "q": params.q, "s": params.s, "seed": seed})


def isoperiod_contours(grid: GridProduct, levels) -> dict:
    """Marching-squares polylines of the period field, ``{level: [array (k, 2)]}``.

    Cells without a period are masked out so contours stop at the edge of
    the oscillatory region.
    """
    import contourpy

    z = np.ma.masked_invalid(grid.field("period"))
    gen = contourpy.contour_generator(grid.p_values, grid.r_values, z,
                                      line_type=contourpy.LineType.Separate)
    return {float(lv): [np.asarray(seg) for seg in gen.lines(float(lv))] for lv in levels}


def basin_grid(variant: Variant, params: ModelParams, x_range, y_range, dims,
               z: float | None = None, threads: int | None = None, **kw) -> BasinGrid:
    """:func:`basin_classify` over a grid of initial ``(x, y)``.

    For 3-D variants the start is ``(x, y, z)`` with ``z`` given, or on the
    slow manifold ``z = -x`` when ``z`` is ``None``.
    """
    n_x, n_y = (int(d) for d in dims)
    if not (n_x >= 1 and n_y >= 1):
        raise ContractError("basin grid dims must be positive")
    xs = np.linspace(*x_range, n_x)
    ys = np.linspace(*y_range, n_y)

    def job(k):
        x, y = float(xs[k % n_x]), float(ys[k // n_x])
        y0 = [x, y] if variant.planar else [x, y, -x if z is None else z]
        return gd.basin_classify(variant, params, y0, **kw)

    labels = run_indexed(job, n_x * n_y, threads)
    return BasinGrid(xs, ys, labels, params, {"variant": variant.name})
