"""Persistence, periodic-solution and global-attraction analysis for delay differential equations."""
from ._backend import BACKEND
from .core import (
    HistorySegment,
    ModelSpec,
    StepControl,
    Trajectory,
    eval_at,
    evaluate_rhs,
    integrate,
    make_history,
    make_history_constant,
    segment_at,
)
from .models import linear_delay, nicholson, nicholson_system, zero_model

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "HistorySegment",
    "ModelSpec",
    "StepControl",
    "Trajectory",
    "eval_at",
    "evaluate_rhs",
    "integrate",
    "linear_delay",
    "make_history",
    "make_history_constant",
    "nicholson",
    "nicholson_system",
    "segment_at",
    "zero_model",
]
