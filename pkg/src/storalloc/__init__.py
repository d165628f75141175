"""Storage allocation for wireless distributed caching under a sum storage budget."""

from .allocation import AllocationVector, make_custom, make_minimal, make_symmetric, validate
from .channel import ChannelDraw, sample_batch, sample_draw
from .config import SystemConfig, db_to_linear, linear_to_db
from .montecarlo import (FailureEstimate, SweepResult, compare_paired, empirical_order,
                         estimate_failure, find_crossing, sweep)
from .protocol import run_trial

__version__ = "0.1.0"

__all__ = [
    "AllocationVector", "ChannelDraw", "FailureEstimate", "SweepResult", "SystemConfig",
    "compare_paired", "db_to_linear", "empirical_order", "estimate_failure", "find_crossing", "linear_to_db", "make_custom", "make_minimal",
    "make_symmetric", "run_trial", "sample_batch", "sample_draw", "sweep", "validate",
]
