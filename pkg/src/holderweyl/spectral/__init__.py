"""Eigenvalue counting at the matrix level."""
from ._backend import BACKEND, KERNELS
from .counting import (
    DENSE_LIMIT,
    MAX_RETRIES,
    PIVOT_RTOL,
    SHIFT_EPS,
    Analysis,
    CountRecord,
    analyze,
    count_below,
    count_below_dense,
    count_below_inertia,
    count_negative,
    count_scan,
    records_to_csv,
)
from .ordering import nested_dissection

__all__ = [
    "BACKEND",
    "KERNELS",
    "DENSE_LIMIT",
    "MAX_RETRIES",
    "PIVOT_RTOL",
    "SHIFT_EPS",
    "Analysis",
    "CountRecord",
    "analyze",
    "count_below",
    "count_below_dense",
    "count_below_inertia",
    "count_negative",
    "count_scan",
    "records_to_csv",
    "nested_dissection",
]
