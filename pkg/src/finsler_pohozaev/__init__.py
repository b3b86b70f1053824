"""Numerical laboratory for Pohozaev-type identities of anisotropic quasilinear equations

    -div(B'(H(grad u)) grad H(grad u)) = g(x, u)

on smooth star-shaped planar domains.
"""

from .anisotropy import Ellipsoidal, Euclidean, SmoothedLq, check_hypotheses
from .domain import StarDomain, deterministic_summation
from .field import GridField, gradient, manufactured_source, stress_field
from .pohozaev import (
    critical_exponent,
    dirichlet_boundary_reduction,
    identity_sides,
    nonexistence_scan,
    wholespace_check,
)
from .profile import Profile, check_structural_bounds
from .solver import SolverConfig, energy, solve_dirichlet, torsion_oracle
from .sources import ConstantSource, GeneralSource, PowerSource, SeparableSource

__version__ = "0.1.0"

__all__ = [
    "ConstantSource",
    "Ellipsoidal",
    "Euclidean",
    "GeneralSource",
    "GridField",
    "PowerSource",
    "Profile",
    "SeparableSource",
    "SmoothedLq",
    "SolverConfig",
    "StarDomain",
    "check_hypotheses",
    "check_structural_bounds",
    "critical_exponent",
    "deterministic_summation",
    "dirichlet_boundary_reduction",
    "energy",
    "gradient",
    "identity_sides",
    "manufactured_source",
    "nonexistence_scan",
    "solve_dirichlet",
    "stress_field",
    "torsion_oracle",
    "wholespace_check",
]
