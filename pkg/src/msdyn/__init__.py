"""Bifurcation and invariant-manifold toolkit for the Maasch-Saltzman glacial-cycle model."""
from .model import (
    CENTER_REDUCED,
    FULL3D,
    PLANAR_CRITICAL,
    SLOWFAST_ASYM,
    SLOWFAST_SYM,
    ContractError,
    Equilibrium,
    ModelParams,
    NonexistentEquilibriumError,
    Tag,
    Variant,
    equilibria,
    jacobian,
    planar_slow,
    rhs,
    routh_hurwitz,
)

__version__ = "0.1.0"
