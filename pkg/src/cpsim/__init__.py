"""Compound Poisson time discretization for SDEs and singular stochastic Volterra equations."""

from .errors import (
    ConfigError,
    CpsimError,
    OutOfRangeError,
    ParameterError,
    SingularHitError,
    TruncationError,
)
from .grid import (
    GridBrownian,
    JumpGrid,
    JumpGridBatch,
    count_at,
    prefix_sum,
    rescaled_count,
    sample_increments,
    sample_jump_grid,
    sample_jump_grids,
)
from .rng import PathStream
from .sde import PathSample, SdeModel, StrongErrorSample, cp_sde_path, em_sde_path, scheme_state_at, strong_error_sample
from .sve import PowerKernel, SveModel, SveQueryResult, cp_sve_values, em_sve_values

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CpsimError",
    "OutOfRangeError",
    "ParameterError",
    "SingularHitError",
    "TruncationError",
    "GridBrownian",
    "JumpGrid",
    "JumpGridBatch",
    "count_at",
    "prefix_sum",
    "rescaled_count",
    "sample_increments",
    "sample_jump_grid",
    "sample_jump_grids",
    "PathStream",
    "PathSample",
    "SdeModel",
    "StrongErrorSample",
    "cp_sde_path",
    "em_sde_path",
    "scheme_state_at",
    "strong_error_sample",
    "PowerKernel",
    "SveModel",
    "SveQueryResult",
    "cp_sve_values",
    "em_sve_values",
]
