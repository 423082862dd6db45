"""Penalized multiscale, scan and average-likelihood-ratio tests for signals on Gaussian grids."""

__version__ = "0.1.0"

import numba as _numba

# TBB is tried first by default and warns when the system copy is too old.
_numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .calibration import (  # noqa: E402
    CalibrationKey,
    CalibrationRecord,
    PowerEntry,
    PowerReport,
    cache_load,
    cache_store,
    calibrate,
    calibrate_many,
    calibrated,
    compare_tests,
    null_ecdf,
    power,
)
from .grid import GridField, PrefixTable, Rect, build_prefix, enumerate_rects, read_grid, rect_count, rect_sum  # noqa: E402
from .kernels import Kernel, ScaledKernel  # noqa: E402
from .penalties import PenaltySpec, d_norm, gamma_pen, gamma_v_pen  # noqa: E402
from .simulation import RngSpec, SignalSpec, gaussian_grid, observed_grid, parse_signal  # noqa: E402
from .statistics import (  # noqa: E402
    DetectionResult,
    SideBounds,
    StatisticSpec,
    alr_An,
    evaluate,
    multiscale_T,
    multiscale_T_star,
    scan_Mn,
)

__all__ = [
    "CalibrationKey",
    "CalibrationRecord",
    "DetectionResult",
    "GridField",
    "Kernel",
    "PenaltySpec",
    "PowerEntry",
    "PowerReport",
    "PrefixTable",
    "Rect",
    "RngSpec",
    "ScaledKernel",
    "SideBounds",
    "SignalSpec",
    "StatisticSpec",
    "alr_An",
    "build_prefix",
    "cache_load",
    "cache_store",
    "calibrate",
    "calibrate_many",
    "calibrated",
    "compare_tests",
    "d_norm",
    "enumerate_rects",
    "evaluate",
    "gamma_pen",
    "gamma_v_pen",
    "gaussian_grid",
    "multiscale_T",
    "multiscale_T_star",
    "null_ecdf",
    "observed_grid",
    "parse_signal",
    "power",
    "read_grid",
    "rect_count",
    "rect_sum",
    "scan_Mn",
]
