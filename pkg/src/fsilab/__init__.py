"""Rigid body in a compressible isentropic gas: solvers, transforms, diagnostics."""

from .core import (
    GasLaw,
    FluidState,
    RigidState,
    SolverParams,
    eos_pressure,
    pressure_potential,
    sound_speed,
    rigid_velocity,
)
from .errors import (
    FsilabError,
    ConfigError,
    SolverError,
    MapError,
    GeometryError,
    CouplingError,
    MeasureError,
)

__version__ = "0.1.0"

__all__ = [
    "GasLaw", "FluidState", "RigidState", "SolverParams",
    "eos_pressure", "pressure_potential", "sound_speed", "rigid_velocity",
    "FsilabError", "ConfigError", "SolverError", "MapError", "GeometryError",
    "CouplingError", "MeasureError",
    "__version__",
]
