"""Monte Carlo and multilevel Monte Carlo estimation primitives.

The multilevel estimator combines per-level sample means of pair
differences Y_l = X_l - X_{l-1}; its variance is the sum of per-level
sample variances divided by the per-level sample counts.  Sample counts are
allocated across levels proportionally to sigma_l / sqrt(tau_l), which
minimises the total variance at a fixed time budget.  All running moments
use numerically stable one-pass updates (mean plus sum of squared
deviations) merged pairwise, so levels can accumulate 1e6-1e7 samples and
batches can be combined associatively.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "AllocationError",
    "AllocationPlan",
    "EstimateUndefinedError",
    "LevelStats",
    "MeasureSet",
    "MomentAccumulator",
    "RiskEstimate",
    "SpeedUndefinedError",
    "mc_estimate",
    "mlmc_estimate",
    "optimal_allocation",
    "speed_metric",
    "speedup",
    "variance_floor",
]


class EstimateUndefinedError(ValueError):
    """No samples and no analytic term: the estimate does not exist."""


class SpeedUndefinedError(ValueError):
    """Computation speed q^2/(t var) is undefined (q = 0, or t/var = 0)."""


class AllocationError(ValueError):
    """Sample allocation is impossible (for instance, all variances zero)."""


class MeasureSet:
    """Ordered collection of risk-measure identifiers estimated in parallel.

    Model evaluations return one outcome per measure; estimator bookkeeping
    is kept per measure, while sample allocation follows a single target
    measure.
    """

    def __init__(self, measure_ids: Sequence[str]):
        ids = list(measure_ids)
        if not ids:
            raise ValueError("at least one measure id is required")
        if len(set(ids)) != len(ids):
            dupes = sorted({m for m in ids if ids.count(m) > 1})
            raise ValueError(f"duplicate measure ids: {dupes}")
        self.ids = tuple(ids)

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def index(self, measure_id: str) -> int:
        try:
            return self.ids.index(measure_id)
        except ValueError:
            raise KeyError(f"unknown measure id {measure_id!r}") from None


@dataclass
class RiskEstimate:
    """Point estimate of one risk measure with its estimator variance."""

    measure_id: str
    q_hat: float
    var_q_hat: Optional[float]  # None when a variance cannot be estimated
    n_total: int
    elapsed: float
    z: Optional[float] = None  # filled in by speed_metric when requested

    @property
    def std_error(self) -> Optional[float]:
        if self.var_q_hat is None:
            return None
        return math.sqrt(self.var_q_hat)


@dataclass
class LevelStats:
    """Per-level sample statistics of one measure.

    ``mean_Y``/``var_Y`` describe the pair difference driving the estimator;
    the upper/lower marginals and their covariance are kept as diagnostics
    (variance identity: var_Y = var_lo + var_up - 2 cov).
    """

    level: int
    n_l: int
    mean_Y: float
    var_Y: Optional[float]
    mean_X_upper: float
    mean_X_lower: float
    var_X_upper: Optional[float]
    var_X_lower: Optional[float]
    cov_pair: Optional[float]
    tau_l: float

    def variance_identity_gap(self) -> float:
        """Relative defect of var_Y = var_lo + var_up - 2 cov on this sample."""
        if self.var_Y is None:
            raise EstimateUndefinedError("variances require n_l >= 2")
        lhs = self.var_Y
        rhs = self.var_X_lower + self.var_X_upper - 2.0 * self.cov_pair
        scale = max(abs(lhs), abs(rhs), self.var_X_lower, self.var_X_upper, 1e-300)
        return abs(lhs - rhs) / scale


@dataclass
class AllocationPlan:
    """Per-level sample counts for one budgeted run."""

    budget_t: float
    counts: list[int]
    target_measure: str
    over_budget: bool = False

    def total_cost(self, taus: Sequence[float]) -> float:
        return float(sum(n * t for n, t in zip(self.counts, taus)))


class MomentAccumulator:
    """Streaming moments of level pairs, vector-valued over measures.

    Tracks, per measure: mean and squared-deviation sum of Y = up - lo, of
    both marginals, and the pair co-moment.  Batches are folded in with the
    pairwise merge formulas, so ``merge`` is associative up to float
    reassociation error and parallel workers can combine partial results.
    """

    def __init__(self, n_measures: int):
        self.n = 0
        self.mean_y = np.zeros(n_measures)
        self.m2_y = np.zeros(n_measures)
        self.mean_lo = np.zeros(n_measures)
        self.m2_lo = np.zeros(n_measures)
        self.mean_up = np.zeros(n_measures)
        self.m2_up = np.zeros(n_measures)
        self.comoment = np.zeros(n_measures)
        self.elapsed = 0.0

    @property
    def n_measures(self) -> int:
        return self.mean_y.size

    def update_batch(self, x_lower: np.ndarray, x_upper: np.ndarray,
                     elapsed: float) -> None:
        """Fold in a batch of pair outcomes, shape (n_samples, n_measures)."""
        x_upper = np.atleast_2d(x_upper)
        x_lower = np.atleast_2d(x_lower)
        nb = x_upper.shape[0]
        if nb == 0:
            self.elapsed += elapsed
            return
        y = x_upper - x_lower
        other = MomentAccumulator(self.n_measures)
        other.n = nb
        other.mean_y = y.mean(axis=0)
        other.m2_y = ((y - other.mean_y) ** 2).sum(axis=0)
        other.mean_lo = x_lower.mean(axis=0)
        other.m2_lo = ((x_lower - other.mean_lo) ** 2).sum(axis=0)
        other.mean_up = x_upper.mean(axis=0)
        other.m2_up = ((x_upper - other.mean_up) ** 2).sum(axis=0)
        other.comoment = ((x_lower - other.mean_lo) * (x_upper - other.mean_up)).sum(axis=0)
        other.elapsed = elapsed
        self.merge(other)

    def merge(self, other: "MomentAccumulator") -> None:
        """Combine another accumulator into this one (pairwise merge)."""
        if other.n == 0:
            self.elapsed += other.elapsed
            return
        if self.n == 0:
            for name in ("mean_y", "m2_y", "mean_lo", "m2_lo", "mean_up",
                         "m2_up", "comoment"):
                setattr(self, name, getattr(other, name).copy())
            self.n = other.n
            self.elapsed += other.elapsed
            return
        na, nb = self.n, other.n
        ntot = na + nb
        w = na * nb / ntot
        d_y = other.mean_y - self.mean_y
        d_lo = other.mean_lo - self.mean_lo
        d_up = other.mean_up - self.mean_up
        self.m2_y += other.m2_y + d_y * d_y * w
        self.m2_lo += other.m2_lo + d_lo * d_lo * w
        self.m2_up += other.m2_up + d_up * d_up * w
        self.comoment += other.comoment + d_lo * d_up * w
        self.mean_y += d_y * nb / ntot
        self.mean_lo += d_lo * nb / ntot
        self.mean_up += d_up * nb / ntot
        self.n = ntot
        self.elapsed += other.elapsed

    def level_stats(self, level: int, measure_index: int) -> LevelStats:
        n = self.n
        if n >= 2:
            var_y = float(self.m2_y[measure_index] / (n - 1))
            var_lo = float(self.m2_lo[measure_index] / (n - 1))
            var_up = float(self.m2_up[measure_index] / (n - 1))
            cov = float(self.comoment[measure_index] / (n - 1))
        else:
            var_y = var_lo = var_up = cov = None
        return LevelStats(
            level=level,
            n_l=n,
            mean_Y=float(self.mean_y[measure_index]) if n else 0.0,
            var_Y=var_y,
            mean_X_upper=float(self.mean_up[measure_index]) if n else 0.0,
            mean_X_lower=float(self.mean_lo[measure_index]) if n else 0.0,
            var_X_upper=var_up,
            var_X_lower=var_lo,
            cov_pair=cov,
            tau_l=self.elapsed / n if n else 0.0,
        )


def mc_estimate(values: Sequence[float], elapsed: float = 0.0,
                measure_id: str = "q") -> RiskEstimate:
    """Plain Monte Carlo estimate: sample mean with variance s^2/n."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise EstimateUndefinedError("cannot estimate from an empty sample")
    if elapsed < 0:
        raise ValueError("elapsed must be >= 0")
    q = float(x.mean())
    if x.size >= 2:
        var = float(x.var(ddof=1)) / x.size
    else:
        var = None  # single draw: variance flagged unavailable
    return RiskEstimate(measure_id=measure_id, q_hat=q, var_q_hat=var,
                        n_total=int(x.size), elapsed=float(elapsed))


def mlmc_estimate(stats: Sequence[LevelStats], analytic_r0: Optional[float] = None,
                  elapsed: float = 0.0, measure_id: str = "q") -> RiskEstimate:
    """Combine per-level statistics into the multilevel estimate.

    ``analytic_r0`` replaces the sampled level 0 (zero variance
    contribution).  The variance is flagged unavailable if any sampled level
    has fewer than two pairs.
    """
    stats = list(stats)
    if not stats and analytic_r0 is None:
        raise EstimateUndefinedError("no sampled levels and no analytic term")
    levels = sorted(s.level for s in stats)
    first = 1 if analytic_r0 is not None else 0
    if stats and levels != list(range(first, first + len(levels))):
        raise ValueError(f"level set {levels} has gaps (telescoping is broken)")
    q = float(analytic_r0) if analytic_r0 is not None else 0.0
    var: Optional[float] = 0.0
    n_total = 0
    for s in stats:
        q += s.mean_Y
        n_total += s.n_l
        if s.n_l < 2 or s.var_Y is None:
            var = None
        elif var is not None:
            var += s.var_Y / s.n_l
    return RiskEstimate(measure_id=measure_id, q_hat=q, var_q_hat=var,
                        n_total=n_total, elapsed=float(elapsed))


def variance_floor(stats: Sequence[LevelStats], alpha: float) -> list[float]:
    """Conservative per-level variances for sample allocation.

    Raw variance estimates of rare-event levels are often near zero early
    on, which would starve those levels of samples.  The adjusted value
    floors level l at alpha**l times the largest marginal variance seen on
    any level:  max(var_Y[l], alpha**l * max_l var_X).
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    sigma_x2 = 0.0
    for s in stats:
        for v in (s.var_X_upper, s.var_X_lower):
            if v is not None and v > sigma_x2:
                sigma_x2 = v
    out = []
    for s in stats:
        raw = s.var_Y if s.var_Y is not None else 0.0
        out.append(max(raw, alpha ** s.level * sigma_x2))
    return out


def optimal_allocation(stats: Sequence[LevelStats], budget_t: float,
                       variances: Optional[Sequence[float]] = None,
                       target_measure: str = "q") -> AllocationPlan:
    """Sample counts n_l proportional to sigma_l/sqrt(tau_l) within a budget.

    ``variances`` override the raw ``var_Y`` entries (floor-adjusted values
    are normally passed in).  Zero-variance levels still receive one sample
    per run so their variance estimate can self-correct; counts are rounded
    half-up and clamped to that floor.  A plan whose floors alone exceed the
    budget is returned with ``over_budget`` set.
    """
    stats = list(stats)
    if budget_t <= 0:
        raise ValueError("budget_t must be > 0")
    if variances is None:
        variances = [s.var_Y if s.var_Y is not None else 0.0 for s in stats]
    variances = [float(v) for v in variances]
    taus = [s.tau_l for s in stats]
    if any(t <= 0 for t in taus):
        raise AllocationError("tau_l must be > 0 for every sampled level")
    if all(v <= 0 for v in variances):
        raise AllocationError("all level variances are zero; nothing to sample")

    # zero-variance levels get exactly the floor; spend the rest optimally
    floor_cost = sum(t for v, t in zip(variances, taus) if v <= 0)
    remaining = budget_t - floor_cost
    weights = [math.sqrt(v) / math.sqrt(t) if v > 0 else 0.0
               for v, t in zip(variances, taus)]
    denom = sum(math.sqrt(v) * math.sqrt(t) for v, t in zip(variances, taus) if v > 0)

    counts = []
    for v, wgt in zip(variances, weights):
        if v <= 0 or remaining <= 0:
            counts.append(1)
        else:
            n_star = remaining / denom * wgt
            counts.append(max(1, math.floor(n_star + 0.5)))  # round half-up

    cost = sum(n * t for n, t in zip(counts, taus))
    slack = sum(taus)  # rounding slack: one evaluation per level
    too_small = slack > budget_t  # cannot even afford the per-level floors
    return AllocationPlan(budget_t=float(budget_t), counts=counts,
                          target_measure=target_measure,
                          over_budget=too_small or cost > budget_t + slack)


def speed_metric(q_hat: float, var_q_hat: float, elapsed: float) -> float:
    """Computation speed z = q^2 / (t * var), in 1/seconds.

    Higher is faster: reaching a coefficient of variation c requires time
    1/(c^2 z) regardless of the measure's units.
    """
    if q_hat == 0.0:
        raise SpeedUndefinedError("speed is undefined for q = 0")
    if elapsed <= 0.0:
        raise SpeedUndefinedError("speed requires elapsed > 0")
    if var_q_hat is None or var_q_hat <= 0.0:
        raise SpeedUndefinedError("speed requires a positive variance estimate")
    return q_hat * q_hat / (elapsed * var_q_hat)


def speedup(mc: RiskEstimate, ml: RiskEstimate) -> float:
    """Speed ratio z_ML / z_MC: equivalent time saving at matched accuracy."""
    if mc.z is None or ml.z is None:
        raise SpeedUndefinedError("both estimates need a computed speed z")
    return ml.z / mc.z
