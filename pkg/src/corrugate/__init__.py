"""Corrugation Processes for h-principle constructions: loop patterns, Kuiper relations,
the desingularized Plucker conoid and Nash-Kuiper desk runs."""

import os as _os

_threads = _os.environ.get("CORRUGATE_THREADS")
if _threads and _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .chart import ChartMap, MetricField, grid_points  # noqa: E402
from .corrugation import (  # noqa: E402
    LoopFamily,
    Submersion,
    convex_integration,
    corrugation_process,
    shaped_displacement,
    verify_cp_properties,
)
from .errors import (  # noqa: E402
    ConeError,
    ConfigError,
    ContractError,
    ConvergenceError,
    CorrugateError,
    DegenerateError,
    DomainError,
    ShapeError,
)
from .pattern import PATTERN, LoopPattern, alpha0, bessel_j0, j0_inverse, k_c, k_s, pattern_c  # noqa: E402

__version__ = "0.1.0"
