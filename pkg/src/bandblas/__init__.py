"""Band-matrix BLAS Level-2 kernels (GBMV, SBMV, TBMV, TBSV).

Reference and blocked implementations over a portable lane-based vector
engine, a dense oracle for checking them, bandwidth-based dispatch and a
benchmark harness.
"""

from .core import (
    BandError,
    BandLayout,
    BandViolationError,
    DimensionError,
    GeneralBandMatrix,
    Precision,
    SymmetricBandMatrix,
    TriangularBandMatrix,
    get_element,
    random_band,
    random_vector,
    set_element,
    to_dense,
)
from .dispatch import (
    BlasArgumentError,
    ConfigError,
    DispatchConfig,
    Impl,
    default_config,
    gbmv,
    load_config,
    sbmv,
    select_impl,
    tbmv,
    tbsv,
)
from .engine import LaneConfig

__version__ = "0.1.0"

__all__ = [
    "BandError",
    "BandLayout",
    "BandViolationError",
    "DimensionError",
    "GeneralBandMatrix",
    "Precision",
    "SymmetricBandMatrix",
    "TriangularBandMatrix",
    "get_element",
    "set_element",
    "random_band",
    "random_vector",
    "to_dense",
    "BlasArgumentError",
    "ConfigError",
    "DispatchConfig",
    "Impl",
    "default_config",
    "load_config",
    "select_impl",
    "gbmv",
    "sbmv",
    "tbmv",
    "tbsv",
    "LaneConfig",
]
