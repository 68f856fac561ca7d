"""Monte Carlo and multilevel Monte Carlo engine for power system adequacy."""

__version__ = "0.1.0"

from .estimators import (  # noqa: F401
    AllocationPlan,
    LevelStats,
    MeasureSet,
    MomentAccumulator,
    RiskEstimate,
    mc_estimate,
    mlmc_estimate,
    optimal_allocation,
    speed_metric,
    speedup,
    variance_floor,
)
from .runner import ModelStack, run_controller  # noqa: F401
