"""Time-sequential storage dispatch models over annual margin traces.

Four dispatch policies of decreasing fidelity evaluate the same sampled
year, which is what correlates the level pairs of the multilevel estimator:

* ``optimal``  - non-anticipatory shortfall-minimising dispatch: power is
  water-filled across units so the profile of remaining times-to-go stays
  balanced (discharge levels the longest-lasting units down, charging levels
  the shortest up), which preserves the fleet's future shortfall coverage;
* ``greedy``   - one sequential pass per unit, longest rated time-to-go
  first, charging when possible and discharging only to avoid curtailment;
* ``average``  - a single daily pattern from a quadratic peak-shaving
  problem on the mean daily demand profile, repeated all year;
* ``nostore``  - no storage at all.

The two sequential policies run as jit kernels (hour loops dominate);
``average`` and ``nostore`` are pure array arithmetic.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._accel import maybe_jit
from .copt import outage_distribution
from .estimators import MeasureSet
from .sampling import ThermalPortfolio, YearState
from .solvers import BoxQP, solve_qp

__all__ = [
    "STORAGE_MEASURES",
    "StorageFleet",
    "StorageStack",
    "StorageUnit",
    "convolve_level0",
    "curtail_trace",
    "dispatch_average",
    "dispatch_greedy",
    "dispatch_none",
    "dispatch_optimal",
    "measure_outputs_annual",
    "net_margin",
    "peak_shave_profile",
]

STORAGE_MEASURES = MeasureSet(("LOLE", "EENS"))

# kernel residuals carry O(1e-12) float noise; shortfalls below this are zero
CURTAIL_EPS = 1e-6


@dataclass
class StorageUnit:
    """One storage unit: power rating (MW), energy rating (MWh), start SoC."""

    p_bar: float
    e_bar: float
    initial_soc: Optional[float] = None  # None: starts full

    def __post_init__(self):
        if self.p_bar <= 0 or self.e_bar < 0:
            raise ValueError("power rating must be > 0 and energy rating >= 0")
        if self.initial_soc is None:
            self.initial_soc = self.e_bar
        if not 0.0 <= self.initial_soc <= self.e_bar:
            raise ValueError("initial SoC outside [0, energy rating]")


class StorageFleet:
    """Array view of a storage portfolio, ordered as given."""

    def __init__(self, units: Sequence[StorageUnit]):
        units = list(units)
        if not units:
            raise ValueError("fleet is empty")
        self.units = units
        self.p_bar = np.array([u.p_bar for u in units], dtype=np.float64)
        self.e_bar = np.array([u.e_bar for u in units], dtype=np.float64)
        self.soc0 = np.array([u.initial_soc for u in units], dtype=np.float64)
        # decreasing rated time-to-go, unit index breaking ties
        ttg = self.e_bar / self.p_bar
        self.greedy_order = np.lexsort((np.arange(len(units)), -ttg)).astype(np.int64)

    def __len__(self):
        return len(self.units)

    @property
    def total_power(self) -> float:
        return float(self.p_bar.sum())

    @property
    def total_energy(self) -> float:
        return float(self.e_bar.sum())


def net_margin(year: YearState) -> np.ndarray:
    """Hourly net generation margin: conventional + wind - demand."""
    g, w, d = year.conventional, year.wind, year.demand
    if not (g.size == w.size == d.size):
        raise ValueError("traces have mismatched lengths")
    return g + w - d


def curtail_trace(margin: np.ndarray, dispatch: np.ndarray) -> np.ndarray:
    """Curtailment per hour: max(0, -margin + dispatch)."""
    margin = np.asarray(margin, dtype=np.float64)
    dispatch = np.asarray(dispatch, dtype=np.float64)
    if margin.size != dispatch.size:
        raise ValueError("margin and dispatch lengths differ")
    return np.maximum(0.0, dispatch - margin)


def measure_outputs_annual(curtail: np.ndarray) -> np.ndarray:
    """Annual (LOLE hours, EENS MWh) outcomes from a curtailment trace."""
    return np.array([
        float(np.count_nonzero(curtail > CURTAIL_EPS)),
        float(curtail.sum()),  # 1-hour steps: MW sums to MWh
    ])


# ---------------------------------------------------------------------------
# dispatch kernels
# ---------------------------------------------------------------------------

@maybe_jit
def _greedy_kernel(margin, p_bar, e_bar, soc0, order, unit_s):
    """Sequential greedy dispatch, one hourly pass per unit in `order`.

    ``unit_s`` (n_units, T) receives per-unit dispatch (consumption
    positive); the returned array is the residual margin after dispatch,
    so curtailment is max(0, -residual).

    A full unit facing a non-negative residual can take no action until the
    next shortfall hour, and shortfall hours of every residual are a subset
    of the original margin's shortfall hours (charging never drives the
    residual negative), so the pass jumps between precomputed candidates
    instead of visiting idle hours.
    """
    T = margin.size
    n = p_bar.size
    residual = margin.copy()
    nc = 0
    for t in range(T):
        if margin[t] < 0.0:
            nc += 1
    cand = np.empty(nc, dtype=np.int64)
    k = 0
    for t in range(T):
        if margin[t] < 0.0:
            cand[k] = t
            k += 1

    for oi in range(n):
        u = order[oi]
        soc = soc0[u]
        p = p_bar[u]
        eb = e_bar[u]
        ci = 0
        t = 0
        while t < T:
            r = residual[t]
            if r < 0.0:
                if soc > 0.0:
                    take = -r
                    if take > p:
                        take = p
                    if take > soc:
                        take = soc
                    soc -= take
                    residual[t] = r + take
                    unit_s[u, t] = -take
                t += 1
            elif eb - soc <= 1e-9:
                # effectively full: skip ahead to the next possible shortfall
                while ci < nc and cand[ci] <= t:
                    ci += 1
                if ci < nc:
                    t = cand[ci]
                else:
                    break
            else:
                if r > 0.0:
                    room = eb - soc
                    give = r
                    if give > p:
                        give = p
                    if give > room:
                        give = room
                    soc += give
                    residual[t] = r - give
                    unit_s[u, t] = give
                t += 1
    return residual


@maybe_jit
def _balanced_kernel(margin, p_bar, e_bar, soc0, unit_s):
    """Hourly balanced (time-to-go levelling) dispatch across the fleet.

    Shortfall hours discharge by lowering the highest times-to-go to a
    common level; surplus hours charge by raising the lowest.  Per-unit
    hourly energy is capped by min(power rating, available head/room), so
    SoC bounds hold by construction.  Exact water-fill levels come from a
    breakpoint sweep, not iteration.
    """
    T = margin.size
    n = p_bar.size
    residual = margin.copy()
    soc = soc0.copy()
    caps = np.empty(n)
    ev_lam = np.empty(2 * n)
    ev_d = np.empty(2 * n)
    total_soc = 0.0
    total_cap = 0.0
    for i in range(n):
        total_soc += soc[i]
        total_cap += e_bar[i]

    for t in range(T):
        r = residual[t]
        if r < 0.0 and total_soc > 1e-6:
            need = -r
            avail = 0.0
            for i in range(n):
                c = soc[i] if soc[i] < p_bar[i] else p_bar[i]
                caps[i] = c
                avail += c
            if avail <= 0.0:
                continue
            if need >= avail:
                for i in range(n):
                    if caps[i] > 0.0:
                        soc[i] -= caps[i]
                        unit_s[i, t] = -caps[i]
                total_soc -= avail
                residual[t] = r + avail
            else:
                ne = 0
                for i in range(n):
                    if caps[i] > 0.0:
                        ev_lam[ne] = soc[i] / p_bar[i]
                        ev_d[ne] = p_bar[i]
                        ne += 1
                        ev_lam[ne] = (soc[i] - caps[i]) / p_bar[i]
                        ev_d[ne] = -p_bar[i]
                        ne += 1
                idxs = np.argsort(-ev_lam[:ne])
                slope = 0.0
                acc = 0.0
                lam_prev = ev_lam[idxs[0]]
                lam_star = 0.0
                found = False
                for k in range(ne):
                    e = idxs[k]
                    lam_e = ev_lam[e]
                    seg = lam_prev - lam_e
                    if slope > 0.0 and acc + slope * seg >= need:
                        lam_star = lam_prev - (need - acc) / slope
                        found = True
                        break
                    acc += slope * seg
                    slope += ev_d[e]
                    lam_prev = lam_e
                if not found:
                    lam_star = lam_prev
                served = 0.0
                for i in range(n):
                    if caps[i] > 0.0:
                        d = soc[i] - lam_star * p_bar[i]
                        if d < 0.0:
                            d = 0.0
                        if d > caps[i]:
                            d = caps[i]
                        if d > 0.0:
                            soc[i] -= d
                            unit_s[i, t] = -d
                            served += d
                total_soc -= served
                residual[t] = r + served
        elif r > 0.0 and total_cap - total_soc > 1e-6:
            free = 0.0
            for i in range(n):
                room = e_bar[i] - soc[i]
                c = room if room < p_bar[i] else p_bar[i]
                if c < 0.0:
                    c = 0.0
                caps[i] = c
                free += c
            if free <= 0.0:
                continue
            if r >= free:
                for i in range(n):
                    if caps[i] > 0.0:
                        soc[i] += caps[i]
                        unit_s[i, t] = caps[i]
                total_soc += free
                residual[t] = r - free
            else:
                ne = 0
                for i in range(n):
                    if caps[i] > 0.0:
                        ev_lam[ne] = soc[i] / p_bar[i]
                        ev_d[ne] = p_bar[i]
                        ne += 1
                        ev_lam[ne] = (soc[i] + caps[i]) / p_bar[i]
                        ev_d[ne] = -p_bar[i]
                        ne += 1
                idxs = np.argsort(ev_lam[:ne])
                slope = 0.0
                acc = 0.0
                lam_prev = ev_lam[idxs[0]]
                lam_star = lam_prev
                found = False
                for k in range(ne):
                    e = idxs[k]
                    lam_e = ev_lam[e]
                    seg = lam_e - lam_prev
                    if slope > 0.0 and acc + slope * seg >= r:
                        lam_star = lam_prev + (r - acc) / slope
                        found = True
                        break
                    acc += slope * seg
                    slope += ev_d[e]
                    lam_prev = lam_e
                if not found:
                    lam_star = lam_prev
                charged = 0.0
                for i in range(n):
                    if caps[i] > 0.0:
                        d = lam_star * p_bar[i] - soc[i]
                        if d < 0.0:
                            d = 0.0
                        if d > caps[i]:
                            d = caps[i]
                        if d > 0.0:
                            soc[i] += d
                            unit_s[i, t] = d
                            charged += d
                total_soc += charged
                residual[t] = r - charged
    return residual


def _run_kernel(kind: str, margin: np.ndarray, fleet: StorageFleet,
                unit_s: Optional[np.ndarray] = None):
    margin = np.asarray(margin, dtype=np.float64)
    if unit_s is None:
        unit_s = np.zeros((len(fleet), margin.size))
    else:
        unit_s[:] = 0.0
    if kind == "greedy":
        residual = _greedy_kernel(margin, fleet.p_bar, fleet.e_bar, fleet.soc0,
                                  fleet.greedy_order, unit_s)
    else:
        residual = _balanced_kernel(margin, fleet.p_bar, fleet.e_bar,
                                    fleet.soc0, unit_s)
    return residual, unit_s


def dispatch_none(margin: np.ndarray) -> np.ndarray:
    """No storage: zero dispatch."""
    return np.zeros(np.asarray(margin).size)


def dispatch_greedy(margin: np.ndarray, fleet: StorageFleet,
                    return_units: bool = False):
    """Sequential greedy dispatch trace (consumption positive)."""
    residual, unit_s = _run_kernel("greedy", margin, fleet)
    s = np.asarray(margin, dtype=np.float64) - residual
    return (s, unit_s) if return_units else s


def dispatch_optimal(margin: np.ndarray, fleet: StorageFleet,
                     return_units: bool = False):
    """Balanced shortfall-minimising dispatch trace (consumption positive)."""
    residual, unit_s = _run_kernel("balanced", margin, fleet)
    s = np.asarray(margin, dtype=np.float64) - residual
    return (s, unit_s) if return_units else s


def dispatch_average(margin: np.ndarray, s_tilde: np.ndarray) -> np.ndarray:
    """Repeat a 24-hour dispatch pattern over the year, ignoring the margin.

    Hour t (1-based) maps to pattern slot ((t-1) mod 24) + 1, so hour 25
    repeats the first slot.
    """
    s_tilde = np.asarray(s_tilde, dtype=np.float64)
    if s_tilde.size != 24:
        raise ValueError("daily pattern must have 24 entries")
    T = np.asarray(margin).size
    reps = -(-T // 24)
    return np.tile(s_tilde, reps)[:T]


# ---------------------------------------------------------------------------
# daily peak-shaving profile (aggregate-fleet quadratic program)
# ---------------------------------------------------------------------------

def peak_shave_profile(mean_daily_demand: np.ndarray, p_bar_total: float,
                       e_bar_total: float) -> np.ndarray:
    """Daily dispatch pattern flattening the mean demand profile.

    Minimises sum((d_h + s_h)^2) over 24 hourly dispatch values subject to
    the aggregate power rating, the stored-energy window, the hourly SoC
    recursion and SoC periodicity across midnight.  The SoC variables are
    eliminated through the recursion: periodicity becomes sum(s) = 0 and the
    energy window becomes bounds on differences of partial sums of s (the
    free initial-SoC offset drops out).  The reduced problem is strictly
    convex, so the pattern is unique.
    """
    d = np.asarray(mean_daily_demand, dtype=np.float64)
    if d.size != 24:
        raise ValueError("mean daily demand must have 24 entries")
    if p_bar_total <= 0 or e_bar_total <= 0:
        raise ValueError("aggregate ratings must be > 0")

    # cumulative-energy coefficients: K_h = sum_{k<h} s_k
    Kcoef = np.tril(np.ones((24, 24)), k=-1)
    rows = []
    for a in range(24):
        for b in range(24):
            if a != b:
                rows.append(Kcoef[a] - Kcoef[b])
    G = np.array(rows)
    h = np.full(G.shape[0], float(e_bar_total))

    problem = BoxQP(
        Q=2.0 * np.eye(24),
        q=2.0 * d,
        lb=np.full(24, -float(p_bar_total)),
        ub=np.full(24, float(p_bar_total)),
        Aeq=np.ones((1, 24)),
        beq=np.zeros(1),
        G=G,
        h=h,
    )
    res = solve_qp(problem, x0=np.zeros(24))
    if res.status != "optimal":
        raise RuntimeError(f"peak-shave QP returned status {res.status}")
    return res.x


def soc_from_pattern(s_tilde: np.ndarray, e_bar_total: float) -> np.ndarray:
    """A stored-energy trajectory consistent with a daily pattern.

    Picks the lowest feasible initial level; used for verifying the SoC
    window and the periodicity constraint of the pattern.
    """
    K = np.concatenate([[0.0], np.cumsum(s_tilde)[:-1]])
    e1 = -K.min()
    return e1 + K


# ---------------------------------------------------------------------------
# direct expectation of the lowest level by convolution
# ---------------------------------------------------------------------------

def mean_daily_profile(demand_years: np.ndarray) -> np.ndarray:
    """Average 24-hour demand profile over all days of all library years."""
    hours, n_years = demand_years.shape
    days = hours // 24
    prof = demand_years[:days * 24].reshape(days, 24, n_years)
    return prof.mean(axis=(0, 2))


def convolve_level0(portfolio: ThermalPortfolio, demand_years: np.ndarray,
                    wind_years: np.ndarray,
                    s_tilde: Optional[np.ndarray] = None) -> dict:
    """Exact (LOLE, EENS) expectations of a deterministic-dispatch model.

    For every (demand year, wind year) pair the hourly residual demand
    d - w + S is folded against the stationary capacity-outage distribution
    of the conventional portfolio; pairs are averaged uniformly, matching
    independent uniform year sampling.  With ``s_tilde`` given, S repeats the
    daily pattern; otherwise S = 0 (no storage).
    """
    table = outage_distribution(portfolio.capacity, portfolio.availability, step=1.0)
    horizon = demand_years.shape[0]
    if s_tilde is None:
        s_trace = np.zeros(horizon)
    else:
        s_trace = dispatch_average(np.zeros(horizon), s_tilde)
    lole = 0.0
    eens = 0.0
    n_pairs = demand_years.shape[1] * wind_years.shape[1]
    for di in range(demand_years.shape[1]):
        residual_d = demand_years[:, di] + s_trace
        for wi in range(wind_years.shape[1]):
            residual = residual_d - wind_years[:, wi]
            p_short, e_short = table.loss_stats(residual)
            lole += float(p_short.sum())
            eens += float(e_short.sum())
    return {"LOLE": lole / n_pairs, "EENS": eens / n_pairs}


class StorageStack:
    """Level-pair sampler for the storage study (shared-randomness pairing).

    Every model in the stack evaluates the identical sampled year, ordered
    bottom-up from ``("nostore", "average", "greedy", "optimal")``.  The
    daily peak-shave pattern behind ``average`` is computed once at
    construction from the demand library and the aggregate fleet ratings.
    """

    VALID = ("nostore", "average", "greedy", "optimal")

    def __init__(self, portfolio: ThermalPortfolio, demand_years: np.ndarray,
                 wind_years: np.ndarray, fleet: StorageFleet,
                 level_names: Sequence[str]):
        names = tuple(level_names)
        ranks = [self.VALID.index(nm) if nm in self.VALID else -1 for nm in names]
        if -1 in ranks:
            bad = names[ranks.index(-1)]
            raise ValueError(f"unknown storage model {bad!r}")
        if ranks != sorted(set(ranks)):
            raise ValueError("stack must list models bottom-up without repeats")
        self.portfolio = portfolio
        self.demand_years = demand_years
        self.wind_years = wind_years
        self.fleet = fleet
        self.level_names = names
        self.measures = STORAGE_MEASURES
        self.horizon = demand_years.shape[0]
        self.s_tilde = None
        self._s_trace = None
        if "average" in names:
            self.s_tilde = peak_shave_profile(
                mean_daily_profile(demand_years),
                fleet.total_power, fleet.total_energy)
            self._s_trace = dispatch_average(np.zeros(self.horizon), self.s_tilde)
        self._scratch = np.zeros((len(fleet), self.horizon))

    def _eval(self, name: str, margin: np.ndarray) -> np.ndarray:
        if name == "nostore":
            curtail = np.maximum(0.0, -margin)
        elif name == "average":
            curtail = np.maximum(0.0, self._s_trace - margin)
        else:
            kind = "greedy" if name == "greedy" else "balanced"
            residual, _ = _run_kernel(kind, margin, self.fleet, self._scratch)
            curtail = np.maximum(0.0, -residual)
        return measure_outputs_annual(curtail)

    def eval_pair_batch(self, level: int, n: int, rng: np.random.Generator):
        from .sampling import sample_year_state

        upper = self.level_names[level]
        lower = self.level_names[level - 1] if level > 0 else None
        x_lo = np.zeros((n, 2))
        x_up = np.empty((n, 2))
        for i in range(n):
            year = sample_year_state(self.portfolio, self.demand_years,
                                     self.wind_years, rng)
            margin = year.conventional + year.wind - year.demand
            x_up[i] = self._eval(upper, margin)
            if lower is not None:
                x_lo[i] = self._eval(lower, margin)
        return x_lo, x_up

    def analytic_level0(self) -> Optional[dict]:
        base = self.level_names[0]
        if base == "nostore":
            return convolve_level0(self.portfolio, self.demand_years,
                                   self.wind_years, None)
        if base == "average":
            return convolve_level0(self.portfolio, self.demand_years,
                                   self.wind_years, self.s_tilde)
        return None

    def pair_cost_units(self, level: int) -> float:
        # nominal relative work per pair (deterministic-timing mode)
        per_model = {"nostore": 2.0, "average": 2.0, "greedy": 25.0, "optimal": 30.0}
        units = 30.0 + per_model[self.level_names[level]]
        if level > 0:
            units += per_model[self.level_names[level - 1]]
        return units

    def analytic_cost_units(self) -> float:
        return 50_000.0
