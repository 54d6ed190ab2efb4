"""Discretized shortest feasible transition paths in AC-OPF control space."""

from ._core import (
    __version__,
    case_to_json,
    check_derivatives,
    load_case,
    merge_case_generators,
    path_metrics_csv,
    powerflow,
    solve,
)

__all__ = [
    "__version__",
    "case_to_json",
    "check_derivatives",
    "load_case",
    "merge_case_generators",
    "path_metrics_csv",
    "powerflow",
    "solve",
]
