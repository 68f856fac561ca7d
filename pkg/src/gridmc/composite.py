"""Composite-system adequacy evaluation on a meshed network.

The detailed model solves a DC-flow load-curtailment LP per electrical
island; the crude model is a single-node capacity check on the same state
with the network dropped.  An exact convolution of the generator
capacity-outage table against the hourly demand distribution provides the
single-node expectations directly, which lets the multilevel estimator skip
sampling of its lowest level.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .copt import outage_distribution
from .estimators import MeasureSet
from .sampling import sample_hl2_batch
from .solvers import BoundedLP, SolverError, solve_lp

__all__ = [
    "COMPOSITE_MEASURES",
    "CompositeStack",
    "CompositeSystem",
    "CurtailmentResult",
    "NetworkDescription",
    "copt_convolve",
    "measure_outputs",
]

COMPOSITE_MEASURES = MeasureSet(("PLC", "EPNS"))

# LP optima carry O(1e-10) float noise; curtailments below this are zero.
CURTAIL_EPS = 1e-6


@dataclass
class NetworkDescription:
    """Static description of the composite system.

    Node ids are 0-based indices internally; loaders translate external
    numbering.  ``nodal_weights`` split the system demand over nodes and must
    sum to one; ``rating_scale`` multiplies thermal line ratings only.
    """

    n_nodes: int
    gen_node: np.ndarray
    gen_capacity: np.ndarray
    gen_availability: np.ndarray
    line_from: np.ndarray
    line_to: np.ndarray
    line_reactance: np.ndarray
    line_rating: np.ndarray
    line_availability: np.ndarray
    nodal_weights: np.ndarray
    demand_trace: np.ndarray
    rating_scale: float = 1.0
    name: str = "network"

    def __post_init__(self):
        self.gen_node = np.asarray(self.gen_node, dtype=np.int64)
        self.gen_capacity = np.asarray(self.gen_capacity, dtype=np.float64)
        self.gen_availability = np.asarray(self.gen_availability, dtype=np.float64)
        self.line_from = np.asarray(self.line_from, dtype=np.int64)
        self.line_to = np.asarray(self.line_to, dtype=np.int64)
        self.line_reactance = np.asarray(self.line_reactance, dtype=np.float64)
        self.line_rating = np.asarray(self.line_rating, dtype=np.float64)
        self.line_availability = np.asarray(self.line_availability, dtype=np.float64)
        self.nodal_weights = np.asarray(self.nodal_weights, dtype=np.float64)
        self.demand_trace = np.asarray(self.demand_trace, dtype=np.float64)
        self.validate()

    def validate(self):
        if self.nodal_weights.size != self.n_nodes:
            raise ValueError("nodal_weights length != n_nodes")
        if abs(self.nodal_weights.sum() - 1.0) > 1e-9:
            raise ValueError("nodal weights must sum to 1")
        if np.any(self.nodal_weights < 0):
            raise ValueError("nodal weights must be >= 0")
        if np.any(self.line_reactance <= 0) or np.any(self.line_rating <= 0):
            raise ValueError("line reactances and ratings must be > 0")
        for arr, name in ((self.gen_availability, "generator"),
                          (self.line_availability, "line")):
            if np.any((arr < 0) | (arr > 1)):
                raise ValueError(f"{name} availabilities outside [0, 1]")
        if np.any((self.gen_node < 0) | (self.gen_node >= self.n_nodes)):
            raise ValueError("generator node index out of range")
        ends = np.concatenate([self.line_from, self.line_to])
        if np.any((ends < 0) | (ends >= self.n_nodes)):
            raise ValueError("line endpoint out of range")
        if self.demand_trace.size == 0 or np.any(self.demand_trace < 0):
            raise ValueError("demand trace missing or negative")
        if not 0 < self.rating_scale <= 10:
            raise ValueError("rating_scale out of range")
        if not self._connected_all_up():
            raise ValueError("network graph is not connected with all lines up")

    def _connected_all_up(self) -> bool:
        return len(island_decomposition(
            self.n_nodes, self.line_from, self.line_to,
            np.ones(self.line_from.size, dtype=bool))) == 1

    @property
    def n_gens(self) -> int:
        return self.gen_node.size

    @property
    def n_lines(self) -> int:
        return self.line_from.size


@dataclass
class CurtailmentResult:
    """Minimal total curtailment of one state, with the per-island split."""

    total: float
    per_island: list
    lp_status: str = "closed-form"


def island_decomposition(n_nodes, line_from, line_to, line_up):
    """Connected components of the graph restricted to in-service lines.

    Returns a list of (node_index_array, line_index_array) pairs; every node
    appears in exactly one island.
    """
    adj = [[] for _ in range(n_nodes)]
    for k in range(line_from.size):
        if line_up[k]:
            a, b = int(line_from[k]), int(line_to[k])
            adj[a].append((b, k))
            adj[b].append((a, k))
    seen = np.zeros(n_nodes, dtype=bool)
    islands = []
    for start in range(n_nodes):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        nodes = []
        lines = set()
        while stack:
            u = stack.pop()
            nodes.append(u)
            for v, k in adj[u]:
                lines.add(k)
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        islands.append((np.array(sorted(nodes), dtype=np.int64),
                        np.array(sorted(lines), dtype=np.int64)))
    return islands


def measure_outputs(curtailment: CurtailmentResult) -> np.ndarray:
    """Map a curtailment to the (PLC, EPNS) performance outcomes."""
    c = curtailment.total
    return np.array([1.0 if c > CURTAIL_EPS else 0.0, max(0.0, c)])


def copt_convolve(network: NetworkDescription, step: float = 1.0) -> dict:
    """Exact single-node expectations by capacity-outage convolution.

    Builds the available-capacity distribution of all generators on a given
    MW grid and folds it against the empirical hourly demand distribution.
    Demand is rounded up to the grid, which biases the loss probability
    conservatively by less than one grid step.
    """
    table = outage_distribution(network.gen_capacity, network.gen_availability, step)
    d_hat = np.ceil(network.demand_trace / step - 1e-9) * step
    plc_h, epns_h = table.loss_stats(d_hat)
    return {"PLC": float(plc_h.mean()), "EPNS": float(epns_h.mean())}


class CompositeSystem:
    """Evaluation engine bound to one network description.

    Pure with respect to sampled states; topology-dependent flow matrices
    are cached per line-outage pattern (the all-up pattern dominates).
    """

    def __init__(self, network: NetworkDescription, topology_cache_size: int = 1024):
        self.network = network
        n = network.n_nodes
        # per-node available capacity = gen_up @ gen_matrix
        self._gen_matrix = np.zeros((network.n_gens, n))
        for j in range(network.n_gens):
            self._gen_matrix[j, network.gen_node[j]] = network.gen_capacity[j]
        self._susceptance = 1.0 / network.line_reactance
        self._limits = network.line_rating * network.rating_scale
        self._topo_cache = {}
        self._topo_cache_size = topology_cache_size
        self._all_up = np.ones(network.n_lines, dtype=bool)

    # -- injection matrices ------------------------------------------------

    def _island_matrix(self, nodes: np.ndarray, lines: np.ndarray) -> np.ndarray:
        """M = D A (A' D A + 1/ns)^-1 on an island sub-network."""
        ns = nodes.size
        nl = lines.size
        local = {int(g): i for i, g in enumerate(nodes)}
        A = np.zeros((nl, ns))
        for r, k in enumerate(lines):
            A[r, local[int(self.network.line_from[k])]] = 1.0
            A[r, local[int(self.network.line_to[k])]] = -1.0
        D = self._susceptance[lines]
        DA = A * D[:, None]
        K = A.T @ DA + 1.0 / ns
        try:
            M = np.linalg.solve(K.T, DA.T).T
        except np.linalg.LinAlgError:  # cannot happen on a connected island
            raise AssertionError("singular island matrix despite regularisation")
        return M

    def build_injection_matrix(self, line_status: np.ndarray,
                               nodes: Optional[np.ndarray] = None) -> np.ndarray:
        """Injection-to-flow matrix for one island under the given line statuses.

        With ``nodes`` omitted the graph must form a single island; the
        matrix rows follow the island's in-service lines in index order.
        """
        up = np.asarray(line_status).astype(bool)
        islands = island_decomposition(
            self.network.n_nodes, self.network.line_from, self.network.line_to, up)
        if nodes is None:
            if len(islands) != 1:
                raise ValueError("network splits into islands; pass the node set")
            nodes, lines = islands[0]
        else:
            nodes = np.asarray(nodes, dtype=np.int64)
            match = [isl for isl in islands if np.array_equal(isl[0], nodes)]
            if not match:
                raise ValueError("node set is not an island of this topology")
            nodes, lines = match[0]
        return self._island_matrix(nodes, lines)

    def _topology(self, line_up: np.ndarray):
        """Cached island structure and flow matrices for one outage pattern."""
        key = line_up.tobytes()
        topo = self._topo_cache.get(key)
        if topo is None:
            islands = island_decomposition(
                self.network.n_nodes, self.network.line_from,
                self.network.line_to, line_up)
            topo = []
            for nodes, lines in islands:
                M = self._island_matrix(nodes, lines) if lines.size else None
                topo.append((nodes, lines, M))
            if len(self._topo_cache) >= self._topo_cache_size:
                self._topo_cache.clear()  # simple bound; the all-up entry rebuilds cheaply
            self._topo_cache[key] = topo
        return topo

    # -- single-node (HL1) evaluation ---------------------------------------

    def evaluate_hl1(self, state) -> CurtailmentResult:
        """Capacity-only curtailment: max(0, total demand - available capacity)."""
        cap = float(self.network.gen_capacity @ (state.gen_status != 0))
        demand = float(state.nodal_demand.sum())
        c = max(0.0, demand - cap)
        return CurtailmentResult(total=c, per_island=[(None, c)])

    # -- composite (HL2) evaluation ------------------------------------------

    def evaluate_hl2(self, state) -> CurtailmentResult:
        """Minimal curtailment under DC-flow limits, summed over islands."""
        gen_up = np.asarray(state.gen_status, dtype=bool)
        line_up = np.asarray(state.line_status, dtype=bool)
        cap_node = gen_up @ self._gen_matrix
        return self._curtail_hl2(np.asarray(state.nodal_demand, dtype=np.float64),
                                 cap_node, line_up)

    def _curtail_hl2(self, d_node: np.ndarray, cap_node: np.ndarray,
                     line_up: np.ndarray) -> CurtailmentResult:
        topo = self._topology(line_up)
        parts = []
        status = "closed-form"
        for nodes, lines, M in topo:
            d_isl = d_node[nodes]
            cap_isl = cap_node[nodes]
            d_sum = float(d_isl.sum())
            cap_sum = float(cap_isl.sum())
            if nodes.size == 1 or lines.size == 0:
                parts.append((nodes, max(0.0, d_sum - cap_sum)))
                continue
            if cap_sum >= d_sum and self._flow_feasible(M, lines, cap_isl, d_isl,
                                                        d_sum, cap_sum):
                parts.append((nodes, 0.0))
                continue
            c_isl = self._island_lp(nodes, lines, M, cap_isl, d_isl)
            status = "lp"
            parts.append((nodes, c_isl))
        total = float(sum(c for _, c in parts))
        return CurtailmentResult(total=total, per_island=parts, lp_status=status)

    def _flow_feasible(self, M, lines, cap_isl, d_isl, d_sum, cap_sum) -> bool:
        """Certify zero curtailment via cheap balanced trial dispatches.

        Tries a proportional dispatch, then a local-first dispatch (each node
        covers its own demand before exporting).  Either being line-feasible
        proves the LP optimum is zero; failure of both proves nothing.
        """
        if cap_sum <= 0.0:
            return d_sum <= 0.0
        lim = self._limits[lines] + 1e-9
        p = cap_isl * (d_sum / cap_sum) - d_isl
        if np.all(np.abs(M @ p) <= lim):
            return True
        g_loc = np.minimum(cap_isl, d_isl)
        rem_c = cap_isl - g_loc
        rem_ct = rem_c.sum()
        rem_d = d_sum - g_loc.sum()
        scale = rem_d / rem_ct if rem_ct > 0 else 0.0
        p = g_loc + rem_c * scale - d_isl
        return bool(np.all(np.abs(M @ p) <= lim))

    def _island_lp(self, nodes, lines, M, cap_isl, d_isl) -> float:
        """Curtailment LP on one island: variables are per-node curtailment
        and per-node dispatched generation."""
        ns = nodes.size
        lim = self._limits[lines]
        shift = M @ d_isl
        A = np.concatenate(
            [np.hstack([M, M]), np.ones((1, 2 * ns))], axis=0)
        row_lo = np.concatenate([-lim + shift, [float(d_isl.sum())]])
        row_hi = np.concatenate([lim + shift, [float(d_isl.sum())]])
        c = np.concatenate([np.ones(ns), np.zeros(ns)])
        lb = np.zeros(2 * ns)
        ub = np.concatenate([d_isl, cap_isl])
        x0 = np.concatenate([d_isl, np.zeros(ns)])  # full curtailment: feasible
        problem = BoundedLP(c=c, A=A, row_lo=row_lo, row_hi=row_hi, lb=lb, ub=ub)
        res = solve_lp(problem, x0=x0)
        if res.status != "optimal":
            raise SolverError(
                f"curtailment LP {res.status} on island {nodes.tolist()} "
                f"(demand {d_isl.sum():.3f}, capacity {cap_isl.sum():.3f})")
        return max(0.0, res.objective)

    # -- batch evaluation (hot path for the estimator) ------------------------

    def hl1_batch(self, total_demand: np.ndarray, gen_up: np.ndarray) -> np.ndarray:
        cap = gen_up @ self.network.gen_capacity
        return np.maximum(0.0, total_demand - cap)

    def hl2_batch(self, total_demand: np.ndarray, gen_up: np.ndarray,
                  line_up: np.ndarray) -> np.ndarray:
        """Curtailment for a batch of states.

        States with all lines up, enough capacity and a feasible balanced
        trial dispatch are certified curtailment-free without an LP; the
        remainder go through the per-island path.
        """
        n = total_demand.size
        out = np.full(n, -1.0)
        cap_node = gen_up @ self._gen_matrix
        cap_tot = cap_node.sum(axis=1)
        allup = line_up.all(axis=1)
        enough = cap_tot >= total_demand
        fast = allup & enough & (cap_tot > 0)
        if fast.any():
            _, lines, M = self._topology(self._all_up)[0]
            lim = self._limits[lines] + 1e-9
            idx = np.nonzero(fast)[0]
            d_nodes = total_demand[idx, None] * self.network.nodal_weights
            scale = total_demand[idx] / cap_tot[idx]
            p = cap_node[idx] * scale[:, None] - d_nodes
            ok = np.all(np.abs(p @ M.T) <= lim, axis=1)
            out[idx[ok]] = 0.0
            fail = idx[~ok]
            if fail.size:
                capf = cap_node[fail]
                df = d_nodes[~ok]
                g_loc = np.minimum(capf, df)
                rem_c = capf - g_loc
                rem_ct = rem_c.sum(axis=1)
                rem_d = total_demand[fail] - g_loc.sum(axis=1)
                scale2 = np.divide(rem_d, rem_ct, out=np.zeros_like(rem_d),
                                   where=rem_ct > 0)
                p2 = g_loc + rem_c * scale2[:, None] - df
                ok2 = np.all(np.abs(p2 @ M.T) <= lim, axis=1)
                out[fail[ok2]] = 0.0
        weights = self.network.nodal_weights
        for i in np.nonzero(out < 0)[0]:
            out[i] = self._curtail_hl2(total_demand[i] * weights, cap_node[i],
                                       line_up[i]).total
        return out


def _outcome_matrix(curtail: np.ndarray) -> np.ndarray:
    """(PLC indicator, EPNS) columns from a batch of curtailments."""
    return np.column_stack([
        (curtail > CURTAIL_EPS).astype(np.float64),
        np.maximum(curtail, 0.0),
    ])


class CompositeStack:
    """Level-pair sampler over the composite system (component-subset pairing).

    Levels are named bottom-up from ``("hl1", "hl2")``; a level pair shares
    the hour, demand and generator draws, with the single-node level simply
    ignoring the line statuses.  Level 0 on its own draws no line statuses
    at all.
    """

    VALID = ("hl1", "hl2")

    def __init__(self, system: CompositeSystem, level_names: Sequence[str] = ("hl1", "hl2")):
        names = tuple(level_names)
        ranks = []
        for nm in names:
            if nm not in self.VALID:
                raise ValueError(f"unknown composite model {nm!r}")
            ranks.append(self.VALID.index(nm))
        if ranks != sorted(set(ranks)):
            raise ValueError("stack must list models bottom-up without repeats")
        self.system = system
        self.level_names = names
        self.measures = COMPOSITE_MEASURES

    def eval_pair_batch(self, level: int, n: int, rng: np.random.Generator):
        upper = self.level_names[level]
        lower = self.level_names[level - 1] if level > 0 else None
        net = self.system.network
        if upper == "hl2":
            _, total, gen_up, line_up = sample_hl2_batch(net, rng, n, with_lines=True)
            x_up = _outcome_matrix(self.system.hl2_batch(total, gen_up, line_up))
            if lower == "hl1":
                x_lo = _outcome_matrix(self.system.hl1_batch(total, gen_up))
            else:
                x_lo = np.zeros_like(x_up)
        else:
            _, total, gen_up, _ = sample_hl2_batch(net, rng, n, with_lines=False)
            x_up = _outcome_matrix(self.system.hl1_batch(total, gen_up))
            x_lo = np.zeros_like(x_up)
        return x_lo, x_up

    def warmup(self):
        """Trigger JIT compilation of the curtailment LP before timing starts."""
        tiny = BoundedLP(c=np.array([1.0]), A=np.ones((1, 1)),
                         row_lo=np.array([0.5]), row_hi=np.array([2.0]),
                         lb=np.array([0.0]), ub=np.array([2.0]))
        solve_lp(tiny)

    def analytic_level0(self) -> Optional[dict]:
        if self.level_names[0] != "hl1":
            return None
        return copt_convolve(self.system.network, step=1.0)

    def pair_cost_units(self, level: int) -> float:
        # nominal relative work per pair (deterministic-timing mode)
        units = 240.0 if self.level_names[level] == "hl2" else 1.0
        if level > 0:
            units += 1.0
        return units

    def analytic_cost_units(self) -> float:
        return 50_000.0
