"""Exact arithmetic substrate: fields, PIDs, series and linear algebra."""

from .fields import FieldDesc, Q
from .linalg import LinSolveResult, solve_linear
from .pid import PIDDesc, PrimeBound
from .series import TruncSeries, default_window
from .smith import smith_diagonal

__all__ = [
    "FieldDesc", "Q", "LinSolveResult", "solve_linear", "PIDDesc", "PrimeBound",
    "TruncSeries", "default_window", "smith_diagonal",
]
