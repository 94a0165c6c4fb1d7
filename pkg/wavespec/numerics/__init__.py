from wavespec.numerics.collocation import (
    BVPSolution,
    MeshFunction,
    PeriodicCollocation,
    regrid,
    solve_periodic_bvp,
)
from wavespec.numerics.continuation import (
    Branch,
    BranchEvent,
    BranchPoint,
    StepControl,
    arclength_continue,
)
from wavespec.numerics.ivp import IVPResult, integrate_ivp
from wavespec.numerics.linalg import (
    EigenPairs,
    PeriodicInterpolant,
    central_derivative,
    differentiation_matrix,
    eig_dense,
    spectral_derivative,
)
from wavespec.numerics.newton import NewtonResult, newton_solve

__all__ = [
    "BVPSolution",
    "Branch",
    "BranchEvent",
    "BranchPoint",
    "EigenPairs",
    "IVPResult",
    "MeshFunction",
    "NewtonResult",
    "PeriodicCollocation",
    "PeriodicInterpolant",
    "StepControl",
    "arclength_continue",
    "central_derivative",
    "differentiation_matrix",
    "eig_dense",
    "integrate_ivp",
    "newton_solve",
    "regrid",
    "solve_periodic_bvp",
    "spectral_derivative",
]
