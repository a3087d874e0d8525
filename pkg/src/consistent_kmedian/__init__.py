"""Online k-median with irrevocable labels under a known cost budget."""

from .engine import AlgorithmState, BudgetViolation, OnlineEngine, replay, run_engine
from .kernels import BACKEND
from .metric import MetricSpace, Stream, read_stream, write_stream
from .weights import WeightIndex, natural_weight

__all__ = [
    "AlgorithmState",
    "BACKEND",
    "BudgetViolation",
    "MetricSpace",
    "OnlineEngine",
    "Stream",
    "WeightIndex",
    "natural_weight",
    "read_stream",
    "replay",
    "run_engine",
    "write_stream",
]
