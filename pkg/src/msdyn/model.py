"""Parameters, vector fields, equilibria and Routh-Hurwitz stability.

The full model is

    x' = -x - y
    y' = r y - p z + s z^2 - y z^2
    z' = -q x - q z

with ice mass ``x``, CO2 ``y`` and deep-water volume ``z``. The slow-fast
forms divide the last equation by ``q`` (``eps = 1/q``); they are the same
vector field, so the SlowFast variants only differ from Full3D in the
restrictions they put on ``s`` and ``q``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K

__all__ = [
    "ModelParams",
    "Tag",
    "Variant",
    "FULL3D",
    "SLOWFAST_SYM",
    "SLOWFAST_ASYM",
    "PLANAR_CRITICAL",
    "CENTER_REDUCED",
    "planar_slow",
    "Equilibrium",
    "ContractError",
    "NonexistentEquilibriumError",
    "pack_params",
    "rhs",
    "jacobian",
    "equilibria",
    "equilibrium_x",
    "routh_hurwitz",
    "char_poly_roots",
    "bt_q",
]


class ContractError(ValueError):
    """Raised when a caller violates a precondition (shape, domain, sign)."""


class NonexistentEquilibriumError(ContractError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """The four model parameters. ``epsilon`` is always ``1/q``."""

    p: float
    q: float
    r: float
    s: float = 0.0

    def __post_init__(self):
        for name in ("p", "q", "r", "s"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ContractError(f"{name} must be finite, got {v}")
        if self.p <= 0 or self.r <= 0:
            raise ContractError(f"p and r must be positive (p={self.p}, r={self.r})")
        if self.q <= 1:
            raise ContractError(f"q must exceed 1, got {self.q}")
        if self.s < 0:
            raise ContractError(f"s must be non-negative, got {self.s}")

    @property
    def epsilon(self) -> float:
        return 1.0 / self.q

    @classmethod
    def from_eps(cls, p, eps, r, s=0.0):
        return cls(p=p, q=1.0 / eps, r=r, s=s)

    def replace(self, **kw) -> "ModelParams":
        d = dict(p=self.p, q=self.q, r=self.r, s=self.s)
        d.update(kw)
        return ModelParams(**d)

    @property
    def p_tilde(self) -> float:
        return self.p - self.q / (1.0 + self.q)

    @property
    def r_tilde(self) -> float:
        return self.r - self.q / (1.0 + self.q)


class Tag(enum.Enum):
    FULL3D = "full3d"
    SLOWFAST_SYM = "slowfast-sym"
    SLOWFAST_ASYM = "slowfast-asym"
    PLANAR_CRITICAL = "planar-critical"
    PLANAR_SLOW = "planar-slow"
    CENTER_REDUCED = "center-reduced"


@dataclass(frozen=True)
class Variant:
    """Which vector field is meant.

    ``order`` is only used by ``PLANAR_SLOW`` (slow-manifold truncation
    order, 0..3).
    """

    tag: Tag
    order: int | None = None

    def __post_init__(self):
        if self.tag is Tag.PLANAR_SLOW:
            if self.order is None or not 0 <= self.order <= 3:
                raise ContractError(f"slow-manifold order must be in 0..3, got {self.order}")
        elif self.order is not None:
            raise ContractError(f"{self.tag.value} takes no order")

    @property
    def dim(self) -> int:
        return 3 if self.tag in (Tag.FULL3D, Tag.SLOWFAST_SYM, Tag.SLOWFAST_ASYM) else 2

    @property
    def planar(self) -> bool:
        return self.dim == 2

    @property
    def name(self) -> str:
        if self.tag is Tag.PLANAR_SLOW:
            return f"planar-slow{self.order}"
        return self.tag.value

    @classmethod
    def parse(cls, text: str) -> "Variant":
        text = text.strip().lower()
        if text.startswith("planar-slow"):
            return cls(Tag.PLANAR_SLOW, int(text[len("planar-slow"):]))
        return cls(Tag(text))

    def kernels(self):
        """(rhs, jac, variational_rhs) compiled functions for this variant."""
        if self.dim == 3:
            return K.full3d_rhs, K.full3d_jac, K.full3d_var
        if self.tag is Tag.CENTER_REDUCED:
            return K.center_rhs, K.center_jac, K.center_var
        return K.planar_rhs, K.planar_jac, K.planar_var


FULL3D = Variant(Tag.FULL3D)
SLOWFAST_SYM = Variant(Tag.SLOWFAST_SYM)
SLOWFAST_ASYM = Variant(Tag.SLOWFAST_ASYM)
PLANAR_CRITICAL = Variant(Tag.PLANAR_CRITICAL)
CENTER_REDUCED = Variant(Tag.CENTER_REDUCED)


def planar_slow(order: int) -> Variant:
    return Variant(Tag.PLANAR_SLOW, order)


def _check_variant_params(variant: Variant, params: ModelParams):
    if variant.tag is Tag.SLOWFAST_SYM and params.s != 0.0:
        raise ContractError("the symmetric slow-fast system requires s = 0")


def pack_params(variant: Variant, params: ModelParams) -> np.ndarray:
    """Flatten parameters into the array layout the compiled kernels expect."""
    _check_variant_params(variant, params)
    par = np.zeros(K.PAR_SIZE)
    par[K.P], par[K.Q], par[K.R], par[K.S] = params.p, params.q, params.r, params.s
    par[K.EPS] = params.epsilon
    if variant.tag is Tag.PLANAR_SLOW:
        par[K.ORDER] = variant.order
    par[K.PT] = params.p_tilde
    par[K.RT] = params.r_tilde
    if variant.tag is Tag.CENTER_REDUCED:
        from .manifolds import center_build

        m = center_build(params)
        par[K.B0:K.B0 + 7] = m.b_coeffs
        par[K.C0:K.C0 + 16] = m.c_coeffs
        q, ell = params.q, m.ell
        par[K.ELL] = ell
        par[K.KU] = (1 + q) * (q * ell - 1) / ell**2
        par[K.KV] = -q * (1 + q) / ell
        par[K.KY] = q / (1 + q) ** 2
        par[K.KZ] = (1 - q) / q
        par[K.LAM3] = m.lambda3
    return par


def _as_state(variant: Variant, state) -> np.ndarray:
    y = np.asarray(state, dtype=float)
    if y.shape != (variant.dim,):
        raise ContractError(
            f"{variant.name} expects a state of length {variant.dim}, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ContractError("state must be finite")
    return y


def rhs(variant: Variant, params: ModelParams, state) -> np.ndarray:
    """Exact polynomial vector field of ``variant`` at ``state``."""
    y = _as_state(variant, state)
    f = variant.kernels()[0]
    out = np.empty_like(y)
    f(0.0, y, pack_params(variant, params), out)
    return out


def jacobian(variant: Variant, params: ModelParams, state) -> np.ndarray:
    y = _as_state(variant, state)
    jac = variant.kernels()[1]
    out = np.empty((variant.dim, variant.dim))
    jac(y, pack_params(variant, params), out)
    return out


def equilibrium_x(params: ModelParams):
    """x-coordinates of P1 and P2, or ``None`` below the shifted diagonal.

    Returns ``(x1, x2, degenerate)``.
    """
    s = params.s
    disc = s * s + 4.0 * (params.r - params.p)
    if disc < -1e-14:
        return None
    if abs(disc) <= 1e-14:
        return -0.5 * s, -0.5 * s, True
    root = math.sqrt(disc)
    return 0.5 * (-s + root), 0.5 * (-s - root), False


def bt_q(q: float) -> float:
    """Location q/(1+q) of the full-model Q0 on the diagonal."""
    return q / (1.0 + q)


@dataclass
class Equilibrium:
    location: np.ndarray
    label: str
    eigenvalues: np.ndarray
    stable: bool
    rh_coeffs: tuple | None = None
    degenerate: bool = False
    meta: dict = field(default_factory=dict)


def routh_hurwitz(params: ModelParams, eq_label: str):
    """Closed-form characteristic coefficients ``(b, c, d, e, stable)``.

    The characteristic polynomial of the full-model Jacobian at the
    equilibrium is ``l^3 + b l^2 + c l + d`` and ``e = b c - d``.
    """
    p, q, r, s = params.p, params.q, params.r, params.s
    if eq_label == "P0":
        b = 1 + q - r
        c = q - (1 + q) * r
        d = q * (p - r)
    elif eq_label in ("P1", "P2"):
        disc = s * s + 4.0 * (r - p)
        if disc < -1e-14:
            raise NonexistentEquilibriumError(
                f"{eq_label} does not exist below the shifted diagonal (discriminant {disc:.3g})")
        root = math.sqrt(max(disc, 0.0))
        sign = -1.0 if eq_label == "P1" else 1.0
        b = 1 + q - p + 0.5 * s * s + sign * 0.5 * s * root
        c = (1 + q) * (q / (1 + q) - p + 0.5 * s * s + sign * 0.5 * s * root)
        d = 0.5 * q * (disc + sign * s * root)
    else:
        raise ContractError(f"unknown equilibrium label {eq_label!r}")
    e = b * c - d
    return b, c, d, e, bool(b > 0 and c > 0 and d > 0 and e > 0)


def char_poly_roots(b, c, d) -> np.ndarray:
    """Roots of ``l^3 + b l^2 + c l + d`` via the companion matrix."""
    return np.roots([1.0, b, c, d])


def _planar_center_equilibria(params: ModelParams):
    """Equilibria of the center-reduced field: v = 0 and n(u, 0, h(u, 0)) = 0."""
    from scipy.optimize import brentq

    from .manifolds import center_build, to_center

    par = pack_params(CENTER_REDUCED, params)

    def g(u):
        w, _, _ = K.center_h(u, 0.0, par)
        return K.center_n(u, 0.0, w, par)[0]

    found = [("P0", 0.0, False)]
    roots = equilibrium_x(params)
    if roots is not None:
        x1, x2, degen = roots
        m = center_build(params)
        for label, xs in (("P1", x1), ("P2", x2)):
            u0 = to_center(m, np.array([xs, -xs, -xs]))[0]
            u = _newton_scalar(g, u0)
            if u is not None:
                found.append((label, u, degen))
    return found


def _newton_scalar(g, x0, tol=1e-15, maxit=60):
    x = float(x0)
    for _ in range(maxit):
        fx = g(x)
        hstep = 1e-7 * max(1.0, abs(x))
        d = (g(x + hstep) - g(x - hstep)) / (2 * hstep)
        if d == 0 or not math.isfinite(d):
            return None
        dx = fx / d
        x -= dx
        if abs(dx) <= tol * max(1.0, abs(x)):
            break
    if abs(g(x)) > 1e-12 or abs(x - x0) > 0.5 * max(1.0, abs(x0)):
        return None
    return x


def equilibria(variant: Variant, params: ModelParams) -> list[Equilibrium]:
    """Equilibria in the fixed order ``[P0, P1, P2]``.

    P1 and P2 exist iff ``s^2 + 4 (r - p) >= 0``; on the shifted diagonal
    both are reported at the common location with ``degenerate=True``.
    """
    _check_variant_params(variant, params)
    out = []
    if variant.tag is Tag.CENTER_REDUCED:
        for label, u, degen in _planar_center_equilibria(params):
            loc = np.array([u, 0.0])
            ev = np.linalg.eigvals(jacobian(variant, params, loc))
            out.append(Equilibrium(loc, label, ev, bool(np.all(ev.real < 0)), None, degen))
        return out

    roots = equilibrium_x(params)
    xs = [("P0", 0.0, False)]
    if roots is not None:
        xs += [("P1", roots[0], roots[2]), ("P2", roots[1], roots[2])]
    for label, x, degen in xs:
        if variant.dim == 3:
            loc = np.array([x, -x, -x])
            b, c, d, e, stable = routh_hurwitz(params, label)
            ev = char_poly_roots(b, c, d)
            out.append(Equilibrium(loc, label, ev, stable, (b, c, d, e), degen))
        else:
            loc = np.array([x, -x])
            jm = jacobian(variant, params, loc)
            tr, det = np.trace(jm), np.linalg.det(jm)
            ev = np.roots([1.0, -tr, det])
            out.append(Equilibrium(loc, label, ev, bool(tr < 0 and det > 0), None, degen))
    return out
