"""Renyi outlier test: an omnibus test for a few small p-values among many."""

__version__ = "0.1.0"

from ._backend import BACKEND, available_backends
from .calibration import (
    CalibrationTable,
    TableSet,
    default_table_set,
    fit_table,
    load_table_set,
    lookup_log_pvalue,
    save_table_set,
    simulate_null,
)
from .pipeline import MissingTableError, rot_test
from .specfun import DomainError
from .statistic import RotResult, choose_kstar, collapse_tail, fixed_k_test, rot_statistic
from .transform import LogPValueVector, PriorWeights, TransformResult, renyi_transform

__all__ = [
    "__version__",
    "BACKEND",
    "available_backends",
    "CalibrationTable",
    "TableSet",
    "default_table_set",
    "fit_table",
    "load_table_set",
    "lookup_log_pvalue",
    "save_table_set",
    "simulate_null",
    "MissingTableError",
    "rot_test",
    "DomainError",
    "RotResult",
    "choose_kstar",
    "collapse_tail",
    "fixed_k_test",
    "rot_statistic",
    "LogPValueVector",
    "PriorWeights",
    "TransformResult",
    "renyi_transform",
]
