"""
Numerical laboratory for multi-soliton dynamics of the one-dimensional
nonlinear Klein-Gordon equation u_tt - u_xx + u - f(u) = 0: ground states,
linearized spectral theory around boosted solitons, symplectic time
integration, modulation decomposition, and backward-shooting construction
of trajectories converging to multi-soliton sums.
"""

from .grid import (
    Grid,
    ScalarField,
    FieldPair,
    GridMismatchError,
    inner_l2,
    inner_pair,
    norm_energy,
    load_snapshot,
    save_snapshot,
)
from .soliton import (
    Boost,
    GroundState,
    GroundStateError,
    Nonlinearity,
    SolitonParams,
    boosted_soliton,
    groundstate,
    lorentz_matrix,
    soliton_sum,
    velocity_add,
)
from .spectral import SpectralPack, build_pack
from .evolve import EvolveConfig, Trajectory, BlowupError, energy, evolve, momentum
from .modulation import ModState, gamma0, modulate, tube_check
from .shoot import (
    AimError,
    ConstructionError,
    ShootProblem,
    ShootResult,
    aim,
    backward_run,
    final_data,
    horizon_continuation,
)
from .config import RunConfig, parse_config

__all__ = [
    "Grid", "ScalarField", "FieldPair", "GridMismatchError",
    "inner_l2", "inner_pair", "norm_energy", "load_snapshot", "save_snapshot",
    "Boost", "GroundState", "GroundStateError", "Nonlinearity",
    "SolitonParams", "boosted_soliton", "groundstate", "lorentz_matrix",
    "soliton_sum", "velocity_add",
    "SpectralPack", "build_pack",
    "EvolveConfig", "Trajectory", "BlowupError", "energy", "evolve", "momentum",
    "ModState", "gamma0", "modulate", "tube_check",
    "AimError", "ConstructionError", "ShootProblem", "ShootResult",
    "aim", "backward_run", "final_data", "horizon_continuation",
    "RunConfig", "parse_config",
]

__version__ = "0.1.0"
