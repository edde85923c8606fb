"""Command-line entry point ``msdyn``.

Every subcommand reads a flat JSON config (``--config``) whose values are
overridden by flags, writes its product to ``--out`` (stdout by default)
and, for file outputs, a ``<out>.manifest.json`` next to it. Exit codes:
0 success, 2 bad arguments, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import global_dynamics as gd
from . import local_bifurcations as lb
from . import melnikov as mel
from . import sweep
from .integrate import StiffnessError, integrate_adaptive, integrate_fixed, write_csv
from .model import ContractError, ModelParams, Variant, equilibria, routh_hurwitz

__all__ = ["RunConfig", "RunManifest", "emit_svg", "build_parser", "cli_dispatch", "main",
           "COMMANDS", "EXIT_OK", "EXIT_USAGE", "EXIT_NUMERIC"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

COMMANDS = ("simulate", "equilibria", "hopf", "bt", "melnikov", "homoclinic-detect",
            "snlc-detect", "colormap", "isoperiod", "basins", "manifold-check", "qc")

_DEFAULT_VARIANT = {"simulate": "full3d", "equilibria": "full3d", "hopf": "full3d",
                    "bt": "full3d", "melnikov": "planar-critical",
                    "homoclinic-detect": "planar-critical", "snlc-detect": "planar-critical",
                    "colormap": "full3d", "isoperiod": "full3d", "basins": "slowfast-asym",
                    "manifold-check": "full3d", "qc": "full3d"}


class NumericalFailure(RuntimeError):
    """A computation finished without a usable result."""


# ------------------------------------------------------------------- config

@dataclass
class RunConfig:
    """Everything a run needs; flat JSON with an exact round trip."""

    command: str
    variant: str = "full3d"
    p: float = 1.0
    q: float = 1.2
    r: float = 0.8
    s: float = 0.8
    p_range: tuple = (0.0, 2.0)
    r_range: tuple = (0.0, 3.0)
    dims: tuple = (50, 50)
    seed: int = 0
    threads: int = 1
    tol: float = 1e-9
    out: str = "-"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ContractError(f"unknown command {self.command!r}")
        Variant.parse(self.variant)
        self.p_range = tuple(float(v) for v in self.p_range)
        self.r_range = tuple(float(v) for v in self.r_range)
        self.dims = tuple(int(v) for v in self.dims)
        for rg in (self.p_range, self.r_range):
            if len(rg) != 2 or not rg[1] >= rg[0]:
                raise ContractError(f"range must be (lo, hi) with hi >= lo, got {rg}")
        if len(self.dims) != 2 or min(self.dims) < 1:
            raise ContractError(f"dims must be two positive integers, got {self.dims}")
        if int(self.threads) < 1:
            raise ContractError("threads must be >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ContractError("seed must be a 64-bit unsigned integer")
        if not 0 < self.tol < 1:
            raise ContractError("tol must lie in (0, 1)")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.p, self.q, self.r, self.s)

    @property
    def variant_obj(self) -> Variant:
        return Variant.parse(self.variant)

    def opt(self, key, default=None):
        return self.options.get(key, default)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("p_range", "r_range", "dims"):
            d[k] = list(d[k])
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ContractError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class RunManifest:
    config: dict
    version: str
    wall_time: float
    summary: dict

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=1, default=_jsonable)


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not serializable: {type(o)}")


# ---------------------------------------------------------------------- SVG

# fixed palette, low to high x-bar quantile
PALETTE = ("#2b83ba", "#5fa2c4", "#93c5c4", "#c7e8ad", "#ecf5a2", "#fede99",
           "#fdb56a", "#f17c4a", "#d7191c")
ESCAPE_COLOR = "#7f7f7f"
CURVE_COLORS = {"hopf": "#d62728", "hom": "#1f4fd6", "snlc": "#000000", "other": "#888888"}


def _curve_color(name: str) -> str:
    if name in ("e0", "e1", "e2", "e1e2_sym"):
        return CURVE_COLORS["hopf"]
    if name.startswith("hom_"):
        return CURVE_COLORS["hom"]
    if name.startswith("snlc"):
        return CURVE_COLORS["snlc"]
    return CURVE_COLORS["other"]


def emit_svg(grid: sweep.GridProduct | None = None, curves=(), bounds=None,
             width: int = 480, height: int = 480, title: str = "") -> str:
    """Standalone SVG of an x-bar color map and/or curves in the (p, r) plane.

    Cells are colored by nine quantile bins of x-bar over finite values;
    escaping or unresolved cells are gray. Curves follow the usual code:
    red Hopf, blue homoclinic, black SNLC, gray guides.
    """
    if bounds is None:
        if grid is not None:
            bounds = (grid.p_values[0], grid.p_values[-1], grid.r_values[0], grid.r_values[-1])
        elif curves:
            allpts = np.vstack([c.samples for c in curves if len(c)] or [np.zeros((1, 2))])
            bounds = (allpts[:, 0].min(), allpts[:, 0].max(),
                      allpts[:, 1].min(), allpts[:, 1].max())
        else:
            bounds = (0.0, 2.0, 0.0, 3.0)
    p0, p1, r0, r1 = (float(b) for b in bounds)
    if p1 <= p0:
        p0, p1 = p0 - 0.5, p1 + 0.5
    if r1 <= r0:
        r0, r1 = r0 - 0.5, r1 + 0.5
    m = 50
    W, H = width - 2 * m, height - 2 * m

    def X(p):
        return m + (p - p0) / (p1 - p0) * W

    def Y(r):
        return m + H - (r - r0) / (r1 - r0) * H

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    if grid is not None:
        xb = grid.field("xbar")
        fin = xb[np.isfinite(xb)]
        edges = np.quantile(fin, np.linspace(0, 1, len(PALETTE) + 1)[1:-1]) if fin.size else []
        n_r, n_p = xb.shape
        dp = (p1 - p0) / max(n_p - 1, 1)
        dr = (r1 - r0) / max(n_r - 1, 1)
        for i in range(n_r):
            for j in range(n_p):
                v = xb[i, j]
                col = PALETTE[int(np.searchsorted(edges, v, "right"))] if np.isfinite(v) \
                    else ESCAPE_COLOR
                x = X(grid.p_values[j] - 0.5 * dp)
                y = Y(grid.r_values[i] + 0.5 * dr)
                out.append(f'<rect x="{x:.3f}" y="{y:.3f}" width="{dp / (p1 - p0) * W:.3f}" '
                           f'height="{dr / (r1 - r0) * H:.3f}" fill="{col}" stroke="none"/>')
    for c in curves:
        if len(c) < 2:
            continue
        pts = " ".join(f"{X(p):.3f},{Y(r):.3f}" for p, r in c.samples)
        dash = ' stroke-dasharray="6,3"' if c.provenance == "melnikov_leading" else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{_curve_color(c.name)}" '
                   f'stroke-width="1.5"{dash}><title>{c.name}</title></polyline>')
    # axes
    out.append(f'<rect x="{m}" y="{m}" width="{W}" height="{H}" fill="none" stroke="black"/>')
    for k in range(5):
        pv = p0 + k * (p1 - p0) / 4
        rv = r0 + k * (r1 - r0) / 4
        out.append(f'<text x="{X(pv):.1f}" y="{m + H + 16}" font-size="11" '
                   f'text-anchor="middle">{pv:.3g}</text>')
        out.append(f'<text x="{m - 6}" y="{Y(rv) + 4:.1f}" font-size="11" '
                   f'text-anchor="end">{rv:.3g}</text>')
    out.append(f'<text x="{m + W / 2}" y="{height - 10}" font-size="13" '
               f'text-anchor="middle">p</text>')
    out.append(f'<text x="14" y="{m + H / 2}" font-size="13" text-anchor="middle">r</text>')
    if title:
        out.append(f'<text x="{m + W / 2}" y="{m - 16}" font-size="13" '
                   f'text-anchor="middle">{title}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ----------------------------------------------------------------- commands

def _curves_csv(curves) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("name", "p", "r", "provenance"))
    for c in curves:
        for name, p, r, prov in c.rows():
            w.writerow((name, sweep.fmt_float(p), sweep.fmt_float(r), prov))
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_jsonable) + "\n"


def cmd_simulate(cfg: RunConfig):
    v, prm = cfg.variant_obj, cfg.params
    ic = cfg.opt("ic") or [0.5, 0.5, 0.5][: v.dim]
    t_end = float(cfg.opt("t", 200.0))
    dt = cfg.opt("dt")
    if dt:
        tr = integrate_fixed(v, prm, ic, t_end, float(dt))
    else:
        tr = integrate_adaptive(v, prm, ic, t_end, rel_tol=cfg.tol, abs_tol=cfg.tol * 1e-3)
        sample = cfg.opt("sample")
        if sample:
            ts = np.arange(0.0, t_end + 0.5 * sample, float(sample))
            ts = ts[ts <= t_end]
            ys = np.array([tr(t) for t in ts])
            tr = dataclasses.replace(tr, times=ts, states=ys, derivs=None)
    if tr.blowup:
        raise NumericalFailure(f"trajectory escaped at t = {tr.times[-1]:.6g}")
    buf = io.StringIO()
    write_csv(tr, buf)
    return buf.getvalue(), {"n_rows": len(tr), "t_end": float(tr.times[-1])}


def cmd_equilibria(cfg: RunConfig):
    v, prm = cfg.variant_obj, cfg.params
    rows = []
    for eq in equilibria(v, prm):
        d = {"label": eq.label, "location": eq.location.tolist(),
             "eigenvalues": [[z.real, z.imag] for z in np.asarray(eq.eigenvalues, complex)],
             "stable": bool(eq.stable), "degenerate": bool(eq.degenerate)}
        if v.dim == 3 and v.name == "full3d":
            b, c, dd, e, st = routh_hurwitz(prm, eq.label)
            d["routh_hurwitz"] = {"b": b, "c": c, "d": dd, "e": e, "stable": bool(st)}
        rows.append(d)
    return _json({"variant": v.name, "params": dataclasses.asdict(prm), "equilibria": rows}), \
        {"n_equilibria": len(rows)}


def _hopf_curves(cfg: RunConfig):
    prm = cfg.params
    n = int(cfg.opt("n", 200))
    lo, hi = cfg.p_range
    q = prm.q
    ps = np.linspace(max(lo, q / (1 + q)) + 1e-9, min(hi, 1 + q) - 1e-9, n)
    curves = [lb.hopf_e0_curve(prm, ps)]
    curves += list(lb.hopf_e1_e2_full(prm, n_lines=n, p_range=cfg.p_range,
                                      r_range=cfg.r_range))
    return curves


def cmd_hopf(cfg: RunConfig):
    curves = _hopf_curves(cfg)
    if cfg.opt("svg"):
        extra = [lb.diagonal_curve(np.linspace(*cfg.p_range, 50))]
        if cfg.s > 0:
            extra.append(lb.shifted_diagonal_curve(cfg.s, np.linspace(*cfg.p_range, 50)))
        _write_text(cfg.opt("svg"), emit_svg(None, curves + extra, bounds=cfg.p_range +
                                             cfg.r_range, title=f"q={cfg.q}, s={cfg.s}"))
    return _curves_csv(curves), {c.name: len(c) for c in curves}


def cmd_bt(cfg: RunConfig):
    pts = lb.bt_points(cfg.variant_obj, cfg.params)
    rows = [{"name": o.name, "location": list(o.location), "equilibrium": o.equilibrium,
             "transverse_eigenvalue": o.transverse_eigenvalue} for o in pts]
    return _json({"variant": cfg.variant, "organizing_centers": rows}), {"n": len(rows)}


def cmd_melnikov(cfg: RunConfig):
    saddle = cfg.opt("saddle", "P0")
    lo, hi, n = cfg.opt("deltas", [0.0, 5.0, 51] if saddle == "P0" else [2.05, 10.0, 51])
    deltas = np.linspace(float(lo), float(hi), int(n))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("delta", "lambda_plus", "lambda_minus", "lambda_cup"))
    for row in mel.lambda_table(saddle, deltas):
        w.writerow([sweep.fmt_float(v) for v in row])
    curves_out = cfg.opt("curves_out")
    if curves_out:
        eta = cfg.opt("eta_grid", list(mel.ETA_GRID))
        curves = []
        for side in ("right", "left", "large"):
            try:
                curves.append(mel.homoclinic_curve_pr(gd.HomoclinicSpec(saddle, side), cfg.s,
                                                      eta))
            except lb.DomainError:
                pass
        _write_text(curves_out, _curves_csv(curves))
    return buf.getvalue(), {"saddle": saddle, "n_delta": len(deltas)}


def cmd_homoclinic(cfg: RunConfig):
    spec = gd.HomoclinicSpec(cfg.opt("saddle", "P0"), cfg.opt("side", "right"),
                             int(cfg.opt("lead", 1)))
    r_lo, r_hi = float(cfg.opt("r_lo")), float(cfg.opt("r_hi"))
    rs = gd.homoclinic_detect(cfg.variant_obj, cfg.params, spec, r_lo, r_hi,
                              tol=float(cfg.opt("r_tol", 1e-6)))
    if rs is None:
        raise NumericalFailure(f"no sign change of the splitting in r in [{r_lo}, {r_hi}]")
    res = {"p": cfg.p, "r_star": rs, "saddle": spec.saddle, "side": spec.side,
           "sign_convention": "unstable minus stable along the transversal, oriented by "
                              "increasing x"}
    return _json(res), res


def cmd_snlc(cfg: RunConfig):
    res = gd.snlc_detect(cfg.variant_obj, cfg.params, float(cfg.opt("r_exist")),
                         float(cfg.opt("r_gone")), family=cfg.opt("family", "large"),
                         tol=float(cfg.opt("r_tol", 1e-4)))
    out = {"p": cfg.p, "r_star": res.r, "bracket": list(res.bracket),
           "stable_period": res.stable.period if res.stable else None,
           "unstable_period": res.unstable.period if res.unstable else None,
           "amplitude_gap": res.amplitude_gap}
    return _json(out), out


def _grid_kw(cfg):
    return dict(seed=cfg.seed, threads=cfg.threads)


def cmd_colormap(cfg: RunConfig):
    g = sweep.colormap_grid(cfg.variant_obj, cfg.params, cfg.p_range, cfg.r_range, cfg.dims,
                            t_trans=float(cfg.opt("t_trans", gd.T_TRANS)),
                            t_win=float(cfg.opt("t_win", gd.T_WIN)),
                            rel_tol=cfg.tol, abs_tol=cfg.tol * 1e-2, **_grid_kw(cfg))
    buf = io.StringIO()
    g.write_csv(buf)
    if cfg.opt("svg"):
        _write_text(cfg.opt("svg"), emit_svg(g, title=f"xbar, q={cfg.q}, s={cfg.s}"))
    labels, counts = np.unique(g.labels(), return_counts=True)
    return buf.getvalue(), {"cells": len(g.cells),
                            "labels": dict(zip(labels.tolist(), counts.tolist()))}


def cmd_isoperiod(cfg: RunConfig):
    g = sweep.isoperiod_grid(cfg.variant_obj, cfg.params, cfg.p_range, cfg.r_range, cfg.dims,
                             rel_tol=cfg.tol, abs_tol=cfg.tol * 1e-2, **_grid_kw(cfg))
    buf = io.StringIO()
    g.write_csv(buf)
    levels = cfg.opt("levels")
    summary = {"cells": len(g.cells),
               "with_period": int(np.sum(np.isfinite(g.field("period"))))}
    if levels:
        cont = sweep.isoperiod_contours(g, levels)
        text = json.dumps({sweep.fmt_float(k): [seg.tolist() for seg in v]
                           for k, v in cont.items()}, sort_keys=True)
        target = cfg.opt("contours_out") or (cfg.out + ".contours.json" if cfg.out != "-"
                                             else None)
        if target:
            _write_text(target, text + "\n")
        else:
            sys.stderr.write(text + "\n")
        summary["contour_segments"] = {sweep.fmt_float(k): len(v) for k, v in cont.items()}
    return buf.getvalue(), summary


def cmd_basins(cfg: RunConfig):
    xr = tuple(cfg.opt("x_range", [-2.0, 2.0]))
    yr = tuple(cfg.opt("y_range", [-2.0, 2.0]))
    g = sweep.basin_grid(cfg.variant_obj, cfg.params, xr, yr, cfg.dims, z=cfg.opt("z"),
                         threads=cfg.threads,
                         t_budget=float(cfg.opt("t_budget", 2000.0)))
    buf = io.StringIO()
    g.write_csv(buf)
    labels, counts = np.unique([l.value for l in g.labels], return_counts=True)
    return buf.getvalue(), {"labels": dict(zip(labels.tolist(), counts.tolist()))}


def cmd_manifold_check(cfg: RunConfig):
    from . import manifolds as mf

    prm = cfg.params
    rng = sweep.cell_rng(cfg.seed, 0)
    pts = rng.uniform(-0.5, 0.5, (32, 2))
    slow = {str(k): float(np.max(mf.slow_invariance_residual(prm, pts[:, 0], pts[:, 1], k)))
            for k in range(4)}
    report = {"q": prm.q, "s": prm.s, "eps": prm.epsilon,
              "slow_invariance_max_residual_by_order": slow,
              "center_low_order_residual": mf.invariance_monomial_check(prm.q, prm.s)}
    if prm.epsilon <= 0.2:
        a = (0.05, 0.05, 0.0, 0.0)
        report["slow_center_jet_gap"] = mf.slow_center_consistency(prm, *a)
    return _json(report), report


def cmd_qc(cfg: RunConfig):
    qr = tuple(cfg.opt("q_range", [1.0 + 1e-6, 20.0]))
    try:
        qc = gd.qc_estimate(cfg.p, cfg.r, cfg.s, q_range=qr, tol=float(cfg.opt("q_tol", 1e-3)))
    except gd.InconclusiveError as err:
        raise NumericalFailure(str(err)) from err
    res = {"p": cfg.p, "r": cfg.r, "s": cfg.s, "q_c": qc}
    return _json(res), res


_HANDLERS = {"simulate": cmd_simulate, "equilibria": cmd_equilibria, "hopf": cmd_hopf,
             "bt": cmd_bt, "melnikov": cmd_melnikov, "homoclinic-detect": cmd_homoclinic,
             "snlc-detect": cmd_snlc, "colormap": cmd_colormap, "isoperiod": cmd_isoperiod,
             "basins": cmd_basins, "manifold-check": cmd_manifold_check, "qc": cmd_qc}


# ------------------------------------------------------------------ parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_TOP = ("variant", "p", "q", "r", "s", "p_range", "r_range", "dims", "seed", "threads", "tol",
        "out")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="msdyn", description="Maasch-Saltzman model dynamics toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    S = argparse.SUPPRESS
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat JSON config; flags override it")
        sp.add_argument("--variant", default=S)
        for k in ("p", "q", "r", "s"):
            sp.add_argument(f"--{k}", type=float, default=S)
        sp.add_argument("--seed", type=int, default=S)
        sp.add_argument("--threads", type=int, default=S,
                        help="worker threads (MSDYN_THREADS if omitted)")
        sp.add_argument("--tol", type=float, default=S)
        sp.add_argument("--out", default=S, help="output file, '-' for stdout")
        if name in ("colormap", "isoperiod", "hopf"):
            sp.add_argument("--p-range", type=float, nargs=2, default=S)
            sp.add_argument("--r-range", type=float, nargs=2, default=S)
        if name in ("colormap", "isoperiod", "basins"):
            sp.add_argument("--dims", type=int, nargs=2, default=S)
        opt = sp.add_argument_group("command options")
        if name == "simulate":
            opt.add_argument("--t", type=float, default=S)
            opt.add_argument("--ic", type=float, nargs="+", default=S)
            opt.add_argument("--dt", type=float, default=S, help="fixed RK4 step")
            opt.add_argument("--sample", type=float, default=S, help="uniform output step")
        elif name == "hopf":
            opt.add_argument("--n", type=int, default=S)
            opt.add_argument("--svg", default=S)
        elif name == "melnikov":
            opt.add_argument("--saddle", choices=("P0", "P1"), default=S)
            opt.add_argument("--deltas", type=float, nargs=3, default=S,
                             metavar=("LO", "HI", "N"))
            opt.add_argument("--eta-grid", type=float, nargs="+", default=S)
            opt.add_argument("--curves-out", default=S)
        elif name == "homoclinic-detect":
            opt.add_argument("--saddle", choices=("P0", "P1"), default=S)
            opt.add_argument("--side", choices=("right", "left", "large"), default=S)
            opt.add_argument("--lead", type=int, choices=(1, -1), default=S)
            opt.add_argument("--r-lo", type=float, default=S)
            opt.add_argument("--r-hi", type=float, default=S)
            opt.add_argument("--r-tol", type=float, default=S)
        elif name == "snlc-detect":
            opt.add_argument("--r-exist", type=float, default=S)
            opt.add_argument("--r-gone", type=float, default=S)
            opt.add_argument("--family", choices=("small", "large"), default=S)
            opt.add_argument("--r-tol", type=float, default=S)
        elif name == "colormap":
            opt.add_argument("--t-trans", type=float, default=S)
            opt.add_argument("--t-win", type=float, default=S)
            opt.add_argument("--svg", default=S)
        elif name == "isoperiod":
            opt.add_argument("--levels", type=float, nargs="+", default=S)
            opt.add_argument("--contours-out", default=S)
        elif name == "basins":
            opt.add_argument("--x-range", type=float, nargs=2, default=S)
            opt.add_argument("--y-range", type=float, nargs=2, default=S)
            opt.add_argument("--z", type=float, default=S)
            opt.add_argument("--t-budget", type=float, default=S)
        elif name == "qc":
            opt.add_argument("--q-range", type=float, nargs=2, default=S)
            opt.add_argument("--q-tol", type=float, default=S)
    return ap


_REQUIRED = {"homoclinic-detect": ("r_lo", "r_hi"), "snlc-detect": ("r_exist", "r_gone")}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    d = {}
    if getattr(ns, "config", None):
        with open(ns.config, encoding="utf-8") as fh:
            d = json.load(fh)
        if d.get("command", ns.command) != ns.command:
            raise ContractError(f"config is for {d['command']!r}, not {ns.command!r}")
    d["command"] = ns.command
    d.setdefault("variant", _DEFAULT_VARIANT[ns.command])
    opts = dict(d.get("options", {}))
    for k, v in vars(ns).items():
        if k in ("command", "config"):
            continue
        if k in _TOP:
            d[k] = v
        else:
            opts[k] = v
    if "threads" not in d:
        d["threads"] = sweep.resolve_threads(None)
    d["options"] = opts
    for k in _REQUIRED.get(ns.command, ()):
        if k not in opts:
            raise ContractError(f"--{k.replace('_', '-')} is required for {ns.command}")
    return RunConfig.from_dict(d)


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cli_dispatch(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as ex:
        return int(ex.code or 0)
    try:
        cfg = config_from_args(ns)
    except (ContractError, ValueError, OSError, json.JSONDecodeError) as err:
        sys.stderr.write(f"msdyn {ns.command}: bad arguments: {err}\n")
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        text, summary = _HANDLERS[cfg.command](cfg)
    except ContractError as err:
        sys.stderr.write(f"msdyn {cfg.command}: bad arguments: {err}\n")
        return EXIT_USAGE
    except (NumericalFailure, StiffnessError, gd.CycleSearchError, ArithmeticError,
            np.linalg.LinAlgError, RuntimeError) as err:
        sys.stderr.write(f"msdyn {cfg.command}: numerical failure: {err}\n")
        return EXIT_NUMERIC
    wall = time.perf_counter() - t0
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        _write_text(cfg.out, text)
        man = RunManifest(cfg.to_dict(), __version__, wall, summary)
        _write_text(cfg.out + ".manifest.json", man.to_json() + "\n")
    return EXIT_OK


def main(argv=None):
    sys.exit(cli_dispatch(argv))


if __name__ == "__main__":
    main()
