"""Random state generation for both adequacy studies.

Two pairing patterns correlate the level pairs of the multilevel estimator:

* component-subset states (snapshot studies): the detailed state is sampled
  and the simpler model's state is obtained by discarding fields, so both
  levels see identical demand and generator draws;
* shared randomness (time-sequential studies): all dispatch models evaluate
  the identical sampled year.

Streams are split deterministically from a root seed by integer paths, so a
replay with the same seed and worker layout reproduces every draw.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._accel import maybe_jit

__all__ = [
    "HOURS_PER_YEAR",
    "RngStream",
    "SystemStateHL1",
    "SystemStateHL2",
    "ThermalPortfolio",
    "YearState",
    "pattern2_pair",
    "project_pattern1",
    "sample_component_state",
    "sample_hl2_batch",
    "sample_hl2_state",
    "sample_year_state",
]

HOURS_PER_YEAR = 8760


@dataclass(frozen=True)
class RngStream:
    """Deterministic, independently seeded random stream.

    Streams are identified by an integer path (for instance
    ``(run, level, worker)``); distinct paths give statistically independent
    generators, and the same ``(seed, path)`` reproduces the same draws on
    every platform.
    """

    seed: int
    path: tuple[int, ...] = ()
    algorithm: str = "pcg64"

    def child(self, *path: int) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(path), self.algorithm)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        if self.algorithm == "pcg64":
            bitgen = np.random.PCG64(ss)
        elif self.algorithm == "philox":
            bitgen = np.random.Philox(ss)
        else:
            raise ValueError(f"unknown rng algorithm {self.algorithm!r}")
        return np.random.Generator(bitgen)


@dataclass
class SystemStateHL2:
    """Snapshot of the composite system: demand plus component statuses."""

    nodal_demand: np.ndarray   # MW per node
    gen_status: np.ndarray     # {0,1} per generator
    line_status: np.ndarray    # {0,1} per line
    hour_index: int            # 1-based hour of the annual trace


@dataclass
class SystemStateHL1:
    """Single-node snapshot: the composite state without the network."""

    nodal_demand: np.ndarray
    gen_status: np.ndarray
    hour_index: int


@dataclass
class YearState:
    """Sampled annual traces driving the storage study (hourly, one year)."""

    demand: np.ndarray
    wind: np.ndarray
    conventional: np.ndarray
    demand_year: int
    wind_year: int


def sample_component_state(availability: float, rng: np.random.Generator) -> int:
    """Draw a two-state component at stationarity: 1 (up) with the given probability."""
    if not 0.0 <= availability <= 1.0:
        raise ValueError(f"availability {availability} outside [0, 1]")
    return int(rng.random() < availability)


def sample_hl2_state(system, rng: np.random.Generator) -> SystemStateHL2:
    """Sample one composite-system snapshot.

    The hour is uniform over the annual demand trace; nodal demands split
    the system demand by the fixed nodal weights; every generator and line
    is drawn independently at its stationary availability.
    """
    trace = system.demand_trace
    hour = int(rng.integers(trace.size)) + 1
    total = trace[hour - 1]
    return SystemStateHL2(
        nodal_demand=system.nodal_weights * total,
        gen_status=(rng.random(system.gen_availability.size)
                    < system.gen_availability).astype(np.int8),
        line_status=(rng.random(system.line_availability.size)
                     < system.line_availability).astype(np.int8),
        hour_index=hour,
    )


def sample_hl2_batch(system, rng: np.random.Generator, n: int,
                     with_lines: bool = True):
    """Vectorised sampling of n snapshots.

    Returns ``(hours, total_demand, gen_up, line_up)`` where ``gen_up`` is an
    (n, n_gen) boolean array; ``line_up`` is None when ``with_lines`` is
    false (direct sampling of the single-node model draws no line statuses).
    """
    trace = system.demand_trace
    hours = rng.integers(trace.size, size=n) + 1
    total = trace[hours - 1]
    gen_up = rng.random((n, system.gen_availability.size)) < system.gen_availability
    line_up = None
    if with_lines:
        line_up = rng.random((n, system.line_availability.size)) < system.line_availability
    return hours, total, gen_up, line_up


def project_pattern1(upper: SystemStateHL2) -> SystemStateHL1:
    """Project a composite state onto the single-node model (drop line statuses).

    Demand, hour and generator statuses are shared bit-exactly, which is what
    correlates the level pair.
    """
    return SystemStateHL1(
        nodal_demand=upper.nodal_demand,
        gen_status=upper.gen_status,
        hour_index=upper.hour_index,
    )


@dataclass
class ThermalPortfolio:
    """Conventional units modelled as independent two-state Markov chains.

    The hourly chain uses transition probabilities 1 - exp(-1h/MTTF) and
    1 - exp(-1h/MTTR); chains start from the stationary distribution, so the
    hourly marginal of total available capacity equals the stationary
    capacity-outage distribution exactly.
    """

    capacity: np.ndarray  # MW per unit
    mttf: np.ndarray      # hours
    mttr: np.ndarray      # hours

    def __post_init__(self):
        self.capacity = np.asarray(self.capacity, dtype=np.float64)
        self.mttf = np.asarray(self.mttf, dtype=np.float64)
        self.mttr = np.asarray(self.mttr, dtype=np.float64)
        if not (self.capacity.size == self.mttf.size == self.mttr.size):
            raise ValueError("portfolio arrays must have equal length")
        if self.capacity.size == 0:
            raise ValueError("portfolio is empty")
        if np.any(self.capacity < 0) or np.any(self.mttf <= 0) or np.any(self.mttr <= 0):
            raise ValueError("capacities must be >= 0 and MTTF/MTTR > 0")

    @property
    def p_fail(self) -> np.ndarray:
        return -np.expm1(-1.0 / self.mttf)

    @property
    def p_repair(self) -> np.ndarray:
        return -np.expm1(-1.0 / self.mttr)

    @property
    def availability(self) -> np.ndarray:
        """Stationary up-probability of the discretised chain."""
        pf, pr = self.p_fail, self.p_repair
        return pr / (pf + pr)

    @property
    def total_capacity(self) -> float:
        return float(self.capacity.sum())


@maybe_jit
def _trace_kernel(capacity, p_fail, p_repair, init_up, uniforms, total):
    """Per-unit two-state chains by geometric sojourn sampling.

    ``total`` arrives filled with the installed capacity and down segments
    are subtracted, so work is proportional to outage time, not to the
    horizon.  Sojourn lengths invert one uniform each: P(L >= k) = (1-p)^k.
    Returns False if any unit exhausts its uniform budget (caller retries
    with a larger buffer).
    """
    n = capacity.size
    horizon = total.size
    stride = uniforms.shape[1]
    for i in range(n):
        up = init_up[i]
        pf = p_fail[i]
        pr = p_repair[i]
        cap = capacity[i]
        t = 0
        c = 0
        while t < horizon:
            p = pf if up else pr
            if p <= 0.0:
                seg = horizon - t
            else:
                if c >= stride:
                    return False
                u = uniforms[i, c]
                c += 1
                if u <= 0.0:
                    seg = horizon - t
                else:
                    seg = int(np.ceil(np.log(u) / np.log1p(-p)))
                    if seg < 1:
                        seg = 1
            if not up:
                b = t + seg
                if b > horizon:
                    b = horizon
                for h in range(t, b):
                    total[h] -= cap
            t += seg
            up = not up
    return True


def _two_state_trace(capacity, p_fail, p_repair, init_up, rng, horizon):
    """Total available-capacity trace of independent two-state chains."""
    total = np.full(horizon, capacity.sum())
    stride = 64
    while True:
        uniforms = rng.random((capacity.size, stride))
        total[:] = capacity.sum()
        if _trace_kernel(capacity, p_fail, p_repair, init_up, uniforms, total):
            return total
        stride *= 4  # vanishingly rare: a unit saw > stride transitions


def sample_year_state(portfolio: ThermalPortfolio,
                      demand_years: np.ndarray,
                      wind_years: np.ndarray,
                      rng: np.random.Generator) -> YearState:
    """Sample the annual traces for one simulated year.

    Demand and wind years are drawn independently and uniformly (with
    replacement) from their libraries, given as (hours, years) arrays; the
    conventional trace is generated from the thermal portfolio's Markov
    chains started at stationarity.
    """
    if demand_years.ndim != 2 or wind_years.ndim != 2:
        raise ValueError("trace libraries must be (hours, years) arrays")
    if demand_years.shape[1] == 0 or wind_years.shape[1] == 0:
        raise ValueError("empty trace library")
    horizon = demand_years.shape[0]
    d_idx = int(rng.integers(demand_years.shape[1]))
    w_idx = int(rng.integers(wind_years.shape[1]))
    init_up = rng.random(portfolio.capacity.size) < portfolio.availability
    conv = _two_state_trace(portfolio.capacity, portfolio.p_fail,
                            portfolio.p_repair, init_up, rng, horizon)
    return YearState(
        demand=demand_years[:, d_idx],
        wind=wind_years[:, w_idx],
        conventional=conv,
        demand_year=d_idx,
        wind_year=w_idx,
    )


def pattern2_pair(year: YearState,
                  lower_model: Callable[[YearState], np.ndarray],
                  upper_model: Callable[[YearState], np.ndarray]):
    """Evaluate a level pair on the identical sampled year (shared randomness).

    Both models are pure functions of the year, so no randomness is re-drawn
    between levels and the pair is maximally correlated.
    """
    x_lower = lower_model(year)
    x_upper = upper_model(year)
    return x_lower, x_upper
