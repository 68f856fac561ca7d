"""Adaptive multi-run controller for (multilevel) Monte Carlo estimation.

A model stack exposes jointly sampled level pairs; the controller runs one
exploratory pass of fixed size to seed variance and cost estimates, then a
sequence of budgeted runs whose per-level sample counts come from the
optimal-allocation rule applied to floor-adjusted variance estimates of a
chosen target measure.  All samples accumulate across runs; every
registered measure is estimated from the same samples.

Timing modes:

* ``wall``: per-evaluation cost is measured wall-clock time (realistic,
  non-reproducible timing);
* ``counted``: cost is a deterministic per-pair work estimate declared by
  the stack, making replays bit-identical end to end.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .estimators import (
    AllocationError,
    MeasureSet,
    MomentAccumulator,
    SpeedUndefinedError,
    mlmc_estimate,
    optimal_allocation,
    speed_metric,
    variance_floor,
)
from .sampling import RngStream

__all__ = ["ControllerResult", "LevelPairStack", "ModelStack", "run_controller"]

# nominal seconds per declared work unit in counted mode
UNIT_SECONDS = 1e-6

DEFAULT_BATCH = 65536


class LevelPairStack(Protocol):
    """What the controller needs from a model hierarchy."""

    measures: MeasureSet
    level_names: Sequence[str]

    def eval_pair_batch(self, level: int, n: int,
                        rng: np.random.Generator) -> tuple:
        """Jointly sample n level pairs; returns (x_lower, x_upper) arrays
        of shape (n, n_measures).  Level 0 pairs against the constant 0."""

    def analytic_level0(self) -> Optional[dict]:
        """Exact level-0 expectations per measure, or None if unsupported."""

    def pair_cost_units(self, level: int) -> float:
        """Deterministic nominal work per pair evaluation (counted mode)."""

    def analytic_cost_units(self) -> float: ...


@dataclass
class ModelStack:
    """A stack bound to estimation choices: which levels are sampled and
    whether level 0 is replaced by its exact expectation."""

    stack: LevelPairStack
    use_analytic_level0: bool = False

    def __post_init__(self):
        self.n_levels = len(self.stack.level_names)
        if self.use_analytic_level0 and self.n_levels < 1:
            raise ValueError("empty stack")

    @property
    def sampled_levels(self) -> list:
        start = 1 if self.use_analytic_level0 else 0
        return list(range(start, self.n_levels))

    @property
    def measures(self) -> MeasureSet:
        return self.stack.measures


@dataclass
class ControllerResult:
    estimates: dict
    level_rows: list
    analytic: Optional[dict]
    elapsed_model: float
    elapsed_wall: float
    run_log: list
    timing_mode: str
    target_measure: str
    seed: int
    workers: int


def _eval_chunk(args):
    """Worker task: evaluate a chunk of pairs on its own stream (picklable)."""
    stack, level, count, stream, batch_cap, n_measures = args
    acc = MomentAccumulator(n_measures)
    rng = stream.generator()
    done = 0
    elapsed = 0.0
    while done < count:
        nb = min(batch_cap, count - done)
        t0 = time.perf_counter()
        x_lo, x_up = stack.eval_pair_batch(level, nb, rng)
        elapsed += time.perf_counter() - t0
        acc.update_batch(x_lo, x_up, 0.0)
        done += nb
    return acc, elapsed


def run_controller(model: ModelStack, *, n0: int, runs: int, t_star: float,
                   target_measure: str, seed: int, alpha: float = 0.1,
                   timing_mode: str = "wall", workers: int = 1,
                   batch_cap: int = DEFAULT_BATCH,
                   progress=None) -> ControllerResult:
    """Execute the exploratory-plus-budgeted-runs estimation protocol.

    ``n0`` pairs per sampled level seed the statistics; each of the ``runs``
    follow-up runs spends roughly ``t_star`` seconds of model-evaluation
    time, split over levels by the optimal-allocation rule on the target
    measure (with variance floors against rare-event underestimates).
    Deterministic for fixed (seed, workers, batch_cap) in counted mode.
    """
    if n0 < 2:
        raise ValueError("n0 must be >= 2 (variances need two samples)")
    if runs < 0 or t_star <= 0:
        raise ValueError("runs must be >= 0 and t_star > 0")
    if timing_mode not in ("wall", "counted"):
        raise ValueError(f"unknown timing_mode {timing_mode!r}")
    if workers < 1:
        raise ValueError("workers must be >= 1")

    stack = model.stack
    measures = model.measures
    target_idx = measures.index(target_measure)
    sampled = model.sampled_levels
    n_meas = len(measures)
    wall_start = time.perf_counter()

    analytic = None
    elapsed_model = 0.0
    if model.use_analytic_level0:
        t0 = time.perf_counter()
        analytic = stack.analytic_level0()
        dt = time.perf_counter() - t0
        if analytic is None:
            raise ValueError("stack does not support an analytic level 0")
        missing = [m for m in measures if m not in analytic]
        if missing:
            raise ValueError(f"analytic level 0 lacks measures {missing}")
        if timing_mode == "counted":
            dt = stack.analytic_cost_units() * UNIT_SECONDS
        elapsed_model += dt

    accs = {lvl: MomentAccumulator(n_meas) for lvl in sampled}
    root = RngStream(seed)
    run_log = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None

    def eval_level(run_idx: int, level: int, count: int):
        nonlocal elapsed_model
        if count <= 0:
            return
        if pool is None:
            chunks = [(count, root.child(run_idx, level, 0))]
        else:
            base = count // workers
            sizes = [base + (1 if w < count % workers else 0)
                     for w in range(workers)]
            chunks = [(sz, root.child(run_idx, level, w))
                      for w, sz in enumerate(sizes) if sz > 0]
        args = [(stack, level, sz, stream, batch_cap, n_meas)
                for sz, stream in chunks]
        if pool is None:
            results = [_eval_chunk(args[0])]
        else:
            results = list(pool.map(_eval_chunk, args))
        for acc, dt in results:
            if timing_mode == "counted":
                dt = acc.n * stack.pair_cost_units(level) * UNIT_SECONDS
            acc.elapsed = dt
            accs[level].merge(acc)
            elapsed_model += dt

    try:
        # warm-up pass on a reserved stream: JIT compilation and cache
        # effects would otherwise contaminate the first cost estimates
        if hasattr(stack, "warmup"):
            stack.warmup()
        warm_rng = root.child(2 ** 20).generator()
        for lvl in sampled:
            stack.eval_pair_batch(lvl, 2, warm_rng)

        # exploratory run
        for lvl in sampled:
            eval_level(0, lvl, n0)
        run_log.append({"run": 0, "counts": {lvl: n0 for lvl in sampled},
                        "kind": "exploratory"})

        for run_idx in range(1, runs + 1):
            if not sampled:
                break
            stats = [accs[lvl].level_stats(lvl, target_idx) for lvl in sampled]
            floors = variance_floor(stats, alpha)
            try:
                plan = optimal_allocation(stats, t_star, variances=floors,
                                          target_measure=target_measure)
                counts = plan.counts
            except AllocationError:
                # every variance is still zero (no event seen anywhere):
                # spend the budget evenly by cost so estimates can correct
                plan = None
                counts = [max(1, int(t_star / (len(sampled) * s.tau_l)))
                          for s in stats]
            for lvl, cnt in zip(sampled, counts):
                eval_level(run_idx, lvl, cnt)
            run_log.append({
                "run": run_idx,
                "counts": dict(zip(sampled, counts)),
                "tau": {lvl: accs[lvl].elapsed / max(accs[lvl].n, 1)
                        for lvl in sampled},
                "over_budget": bool(plan.over_budget) if plan else False,
            })
            if progress is not None:
                progress(run_idx, runs, run_log[-1])
    finally:
        if pool is not None:
            pool.shutdown()

    # final estimates for every measure from the pooled samples
    estimates = {}
    for midx, mid in enumerate(measures):
        stats = [accs[lvl].level_stats(lvl, midx) for lvl in sampled]
        r0 = analytic[mid] if analytic is not None else None
        est = mlmc_estimate(stats, analytic_r0=r0, elapsed=elapsed_model,
                            measure_id=mid)
        try:
            est.z = speed_metric(est.q_hat, est.var_q_hat, est.elapsed)
        except SpeedUndefinedError:
            est.z = None
        estimates[mid] = est

    level_rows = []
    for lvl in sampled:
        row = {"level": lvl, "name": stack.level_names[lvl],
               "n": accs[lvl].n,
               "tau": accs[lvl].elapsed / max(accs[lvl].n, 1)}
        for midx, mid in enumerate(measures):
            s = accs[lvl].level_stats(lvl, midx)
            row[mid] = {
                "mean_Y": s.mean_Y, "var_Y": s.var_Y,
                "mean_X_upper": s.mean_X_upper, "mean_X_lower": s.mean_X_lower,
                "var_X_upper": s.var_X_upper, "var_X_lower": s.var_X_lower,
                "cov_pair": s.cov_pair,
            }
        level_rows.append(row)

    return ControllerResult(
        estimates=estimates,
        level_rows=level_rows,
        analytic=analytic,
        elapsed_model=elapsed_model,
        elapsed_wall=time.perf_counter() - wall_start,
        run_log=run_log,
        timing_mode=timing_mode,
        target_measure=target_measure,
        seed=seed,
        workers=workers,
    )
