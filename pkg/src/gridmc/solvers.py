"""Small dense LP and QP solvers.

The linear programs solved here are curtailment problems on a 24-bus network
(tens of variables); the quadratic program is a daily peak-shaving profile.
Both are solved with self-contained dense methods so results are
deterministic across platforms: a bounded-variable primal simplex with
Bland's rule for the LP, and a primal active-set method for the QP.  Every
solution is re-verified by an independent residual computation before it is
returned.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._accel import maybe_jit

__all__ = [
    "BoundedLP",
    "BoxQP",
    "LPResult",
    "QPResult",
    "SolverError",
    "solve_lp",
    "solve_qp",
]

# status codes shared with the simplex kernel
_OPTIMAL = 0
_INFEASIBLE = 1
_UNBOUNDED = 2
_STALLED = 3

_STATUS_NAMES = {
    _OPTIMAL: "optimal",
    _INFEASIBLE: "infeasible",
    _UNBOUNDED: "unbounded",
    _STALLED: "stalled",
}

FEAS_TOL = 1e-9


class SolverError(RuntimeError):
    """Raised when a solver cannot certify its result."""


@dataclass
class BoundedLP:
    """min c'x subject to row_lo <= A x <= row_hi and lb <= x <= ub.

    Equality rows are expressed with ``row_lo == row_hi``.
    """

    c: np.ndarray
    A: np.ndarray
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        self.row_lo = np.asarray(self.row_lo, dtype=np.float64)
        self.row_hi = np.asarray(self.row_hi, dtype=np.float64)
        self.lb = np.asarray(self.lb, dtype=np.float64)
        self.ub = np.asarray(self.ub, dtype=np.float64)
        n = self.c.size
        m = self.row_lo.size
        if self.A.size == 0:
            self.A = self.A.reshape(0, n)
        if self.A.shape != (m, n):
            raise ValueError(f"A has shape {self.A.shape}, expected ({m}, {n})")
        if np.any(self.lb > self.ub) or np.any(self.row_lo > self.row_hi):
            raise ValueError("inconsistent bounds (lo > hi)")


@dataclass
class BoxQP:
    """min 1/2 x'Q x + q'x subject to Aeq x = beq, G x <= h, lb <= x <= ub.

    Q must be positive semidefinite.  The ``G``/``h`` general inequality rows
    are optional; they carry constraints that are not expressible as variable
    boxes (cumulative energy windows, for instance).
    """

    Q: np.ndarray
    q: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    Aeq: Optional[np.ndarray] = None
    beq: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=np.float64)
        self.q = np.asarray(self.q, dtype=np.float64)
        self.lb = np.asarray(self.lb, dtype=np.float64)
        self.ub = np.asarray(self.ub, dtype=np.float64)
        n = self.q.size
        if self.Q.shape != (n, n):
            raise ValueError("Q shape mismatch")
        if self.Aeq is None:
            self.Aeq = np.zeros((0, n))
            self.beq = np.zeros(0)
        else:
            self.Aeq = np.atleast_2d(np.asarray(self.Aeq, dtype=np.float64))
            self.beq = np.asarray(self.beq, dtype=np.float64)
        if self.G is None:
            self.G = np.zeros((0, n))
            self.h = np.zeros(0)
        else:
            self.G = np.atleast_2d(np.asarray(self.G, dtype=np.float64))
            self.h = np.asarray(self.h, dtype=np.float64)
        if np.any(self.lb > self.ub):
            raise ValueError("inconsistent bounds (lb > ub)")


@dataclass
class LPResult:
    status: str
    objective: float
    x: np.ndarray
    iterations: int


@dataclass
class QPResult:
    status: str
    objective: float
    x: np.ndarray
    iterations: int
    kkt_residual: float = 0.0


# ---------------------------------------------------------------------------
# bounded-variable simplex (hot path for HL2 curtailment evaluations)
# ---------------------------------------------------------------------------

@maybe_jit
def _simplex_kernel(c, A, row_lo, row_hi, lb, ub, x_start, max_iter, tol):
    """Two-phase bounded-variable primal simplex with Bland's rule.

    Internal variables z = (x, s) with s = A x, constraint [A | -I] z = 0.
    Phase 1 minimises the sum of bound violations of the basic variables
    (composite objective); phase 2 minimises c'x.  Returns
    (status, x, objective, iterations).
    """
    m, n = A.shape
    nt = n + m

    B = np.empty((m, nt))
    B[:, :n] = A
    B[:, n:] = 0.0
    for i in range(m):
        B[i, n + i] = -1.0

    zlo = np.empty(nt)
    zhi = np.empty(nt)
    zlo[:n] = lb
    zhi[:n] = ub
    zlo[n:] = row_lo
    zhi[n:] = row_hi

    cost = np.zeros(nt)
    cost[:n] = c

    scale = 1.0
    for j in range(nt):
        if np.isfinite(zlo[j]) and abs(zlo[j]) > scale:
            scale = abs(zlo[j])
        if np.isfinite(zhi[j]) and abs(zhi[j]) > scale:
            scale = abs(zhi[j])
    ftol = tol * scale

    # nonbasic status: 0 at lower, 1 at upper, 2 basic, 3 free at zero
    vstat = np.empty(nt, dtype=np.int64)
    z = np.zeros(nt)
    for j in range(n):
        xj = x_start[j]
        lo_fin = np.isfinite(lb[j])
        hi_fin = np.isfinite(ub[j])
        if lo_fin and hi_fin:
            # snap to the nearer bound of the start hint
            if abs(xj - ub[j]) < abs(xj - lb[j]):
                vstat[j] = 1
                z[j] = ub[j]
            else:
                vstat[j] = 0
                z[j] = lb[j]
        elif lo_fin:
            vstat[j] = 0
            z[j] = lb[j]
        elif hi_fin:
            vstat[j] = 1
            z[j] = ub[j]
        else:
            vstat[j] = 3
            z[j] = 0.0

    basis = np.empty(m, dtype=np.int64)
    for i in range(m):
        basis[i] = n + i
        vstat[n + i] = 2

    # basis inverse; the slack basis [-I] is its own inverse
    Binv = np.zeros((m, m))
    for i in range(m):
        Binv[i, i] = -1.0

    iters = 0
    for _phase in range(2):
        phase1 = _phase == 0
        while True:
            # refresh basic values from nonbasic ones: z_B = -Binv (B z_N)
            znb = z.copy()
            for i in range(m):
                znb[basis[i]] = 0.0
            v = B @ znb
            zb = -(Binv @ v)
            for i in range(m):
                z[basis[i]] = zb[i]

            if phase1:
                # infeasibility gradient over basic variables
                d = np.zeros(m)
                infeas = 0.0
                for i in range(m):
                    bi = basis[i]
                    if z[bi] < zlo[bi] - ftol:
                        d[i] = -1.0
                        infeas += zlo[bi] - z[bi]
                    elif z[bi] > zhi[bi] + ftol:
                        d[i] = 1.0
                        infeas += z[bi] - zhi[bi]
                if infeas <= ftol * (m + 1):
                    break  # feasible: move on to phase 2
                y = d @ Binv
                r = -(y @ B)
            else:
                ccb = np.empty(m)
                for i in range(m):
                    ccb[i] = cost[basis[i]]
                y = ccb @ Binv
                r = cost - y @ B

            # Bland: lowest-index eligible entering variable
            enter = -1
            direction = 0.0
            for j in range(nt):
                if vstat[j] == 2 or zlo[j] == zhi[j]:
                    continue
                if vstat[j] == 0 and r[j] < -tol:
                    enter = j
                    direction = 1.0
                    break
                if vstat[j] == 1 and r[j] > tol:
                    enter = j
                    direction = -1.0
                    break
                if vstat[j] == 3 and (r[j] < -tol or r[j] > tol):
                    enter = j
                    direction = 1.0 if r[j] < 0.0 else -1.0
                    break

            if enter < 0:
                if phase1:
                    return _INFEASIBLE, z[:n].copy(), 0.0, iters
                obj = 0.0
                for j in range(n):
                    obj += c[j] * z[j]
                return _OPTIMAL, z[:n].copy(), obj, iters

            w = Binv @ B[:, enter].copy()

            # ratio test: first blocking event as z[enter] moves by direction*t.
            # Feasible basics block at their bounds; an infeasible basic blocks
            # only when it reaches the bound it violates (moving away is free,
            # the composite objective already accounts for it).
            t_limit = np.inf
            leave_pos = -1
            leave_to_upper = False
            if direction > 0.0 and np.isfinite(zhi[enter]):
                t_limit = zhi[enter] - z[enter]
            elif direction < 0.0 and np.isfinite(zlo[enter]):
                t_limit = z[enter] - zlo[enter]

            for i in range(m):
                bi = basis[i]
                delta = -w[i] * direction  # basic movement per unit t
                if delta > tol:
                    if z[bi] < zlo[bi] - ftol:
                        tcand = (zlo[bi] - z[bi]) / delta
                        hit_upper = False
                    elif np.isfinite(zhi[bi]):
                        tcand = (zhi[bi] - z[bi]) / delta
                        hit_upper = True
                    else:
                        continue
                elif delta < -tol:
                    if z[bi] > zhi[bi] + ftol:
                        tcand = (zhi[bi] - z[bi]) / delta
                        hit_upper = True
                    elif np.isfinite(zlo[bi]):
                        tcand = (zlo[bi] - z[bi]) / delta
                        hit_upper = False
                    else:
                        continue
                else:
                    continue
                if tcand < 0.0:
                    tcand = 0.0
                if tcand < t_limit - ftol:
                    t_limit = tcand
                    leave_pos = i
                    leave_to_upper = hit_upper
                elif tcand <= t_limit + ftol and leave_pos >= 0 and bi < basis[leave_pos]:
                    # Bland tie-break: lowest variable index leaves
                    leave_pos = i
                    leave_to_upper = hit_upper

            if not np.isfinite(t_limit):
                if phase1:
                    return _STALLED, z[:n].copy(), 0.0, iters
                return _UNBOUNDED, z[:n].copy(), -np.inf, iters

            z[enter] += direction * t_limit

            if leave_pos < 0:
                # bound flip: entering variable hit its opposite bound
                vstat[enter] = 1 if direction > 0.0 else 0
            else:
                out = basis[leave_pos]
                vstat[out] = 1 if leave_to_upper else 0
                z[out] = zhi[out] if leave_to_upper else zlo[out]
                vstat[enter] = 2
                basis[leave_pos] = enter
                # product-form update of the basis inverse
                piv = w[leave_pos]
                prow = Binv[leave_pos] / piv
                for i in range(m):
                    if i != leave_pos:
                        Binv[i] -= w[i] * prow
                Binv[leave_pos] = prow

            iters += 1
            if iters >= max_iter:
                return _STALLED, z[:n].copy(), 0.0, iters

    return _STALLED, z[:n].copy(), 0.0, iters  # pragma: no cover


def _verify_lp_feasible(p: BoundedLP, x: np.ndarray) -> float:
    hi_fin = p.row_hi[np.isfinite(p.row_hi)]
    scale = 1.0 + max(
        float(np.abs(hi_fin).max(initial=0.0)),
        float(np.abs(x).max(initial=0.0)),
    )
    viol = max(
        float(np.max(p.lb - x, initial=0.0)),
        float(np.max(x - p.ub, initial=0.0)),
    )
    if p.A.shape[0]:
        rows = p.A @ x
        viol = max(viol, float(np.max(p.row_lo - rows, initial=0.0)))
        viol = max(viol, float(np.max(rows - p.row_hi, initial=0.0)))
    return viol / scale


def solve_lp(p: BoundedLP, x0: Optional[np.ndarray] = None,
             max_iter: int = 20000) -> LPResult:
    """Solve a bounded-variable LP to optimality.

    ``x0`` may supply a point known to be feasible (components snapped to the
    nearest bound); it lets the simplex skip phase 1.  Infeasible or
    unbounded problems are reported through ``status``, never clamped.
    """
    if x0 is None:
        x0 = np.where(np.isfinite(p.lb), p.lb, np.where(np.isfinite(p.ub), p.ub, 0.0))
    x0 = np.asarray(x0, dtype=np.float64)
    status, x, obj, iters = _simplex_kernel(
        p.c, p.A, p.row_lo, p.row_hi, p.lb, p.ub, x0, max_iter, 1e-11
    )
    name = _STATUS_NAMES[int(status)]
    if name == "stalled":
        raise SolverError(f"simplex did not converge in {iters} iterations")
    if name == "optimal":
        rel = _verify_lp_feasible(p, x)
        if rel > FEAS_TOL * 10:
            raise SolverError(f"simplex returned infeasible point (residual {rel:.3e})")
        obj = float(p.c @ x)
    return LPResult(status=name, objective=float(obj), x=np.asarray(x),
                    iterations=int(iters))


# ---------------------------------------------------------------------------
# active-set QP (run once per experiment; plain numpy)
# ---------------------------------------------------------------------------

def _qp_rows(p: BoxQP):
    """Collect box bounds and general rows into one G x <= h system."""
    n = p.q.size
    eye = np.eye(n)
    finite_ub = np.isfinite(p.ub)
    finite_lb = np.isfinite(p.lb)
    G = np.vstack([p.G, eye[finite_ub], -eye[finite_lb]])
    h = np.concatenate([p.h, p.ub[finite_ub], -p.lb[finite_lb]])
    return G, h


def _qp_feasible_start(p: BoxQP) -> Optional[np.ndarray]:
    """Find any feasible point via the LP solver's phase 1."""
    n = p.q.size
    if p.Aeq.shape[0] == 0 and p.G.shape[0] == 0:
        return np.clip(np.zeros(n), p.lb, p.ub)
    A = np.vstack([p.Aeq, p.G])
    row_lo = np.concatenate([p.beq, np.full(p.G.shape[0], -np.inf)])
    row_hi = np.concatenate([p.beq, p.h])
    res = solve_lp(BoundedLP(c=np.zeros(n), A=A, row_lo=row_lo, row_hi=row_hi,
                             lb=p.lb, ub=p.ub))
    return res.x if res.status == "optimal" else None


def solve_qp(p: BoxQP, x0: Optional[np.ndarray] = None,
             max_iter: int = 500, tol: float = 1e-10) -> QPResult:
    """Primal active-set solve of a convex box/inequality QP.

    Requires a feasible ``x0`` (defaults to the zero vector, which all
    callers in this package can guarantee feasible).  Rejects non-PSD
    quadratic terms.  The returned point satisfies equality rows to 1e-9 and
    the KKT conditions to better than 1e-8.
    """
    n = p.q.size
    eigs = np.linalg.eigvalsh((p.Q + p.Q.T) / 2.0)
    if eigs.min() < -1e-8 * max(1.0, abs(eigs.max())):
        raise SolverError("quadratic term is not positive semidefinite")

    G, h = _qp_rows(p)
    scale = 1.0 + float(np.abs(h).max(initial=0.0))

    if x0 is None:
        x = _qp_feasible_start(p)
        if x is None:
            return QPResult("infeasible", np.nan, np.zeros(n), 0)
    else:
        x = np.asarray(x0, dtype=np.float64).copy()
    if p.Aeq.shape[0] and np.max(np.abs(p.Aeq @ x - p.beq)) > 1e-9 * scale:
        return QPResult("infeasible", np.nan, x, 0)
    if G.shape[0] and np.max(G @ x - h) > 1e-9 * scale:
        return QPResult("infeasible", np.nan, x, 0)

    neq = p.Aeq.shape[0]
    active: list[int] = []  # indices into G, kept sorted

    lam = np.zeros(0)
    it = 0
    for it in range(1, max_iter + 1):
        Gw = G[active] if active else np.zeros((0, n))
        Acon = np.vstack([p.Aeq, Gw])
        k = Acon.shape[0]
        KKT = np.zeros((n + k, n + k))
        KKT[:n, :n] = p.Q
        KKT[:n, n:] = Acon.T
        KKT[n:, :n] = Acon
        rhs = np.concatenate([-(p.Q @ x + p.q), np.zeros(k)])
        try:
            sol = np.linalg.solve(KKT, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
        pdir = sol[:n]
        lam = sol[n:]

        if float(np.max(np.abs(pdir), initial=0.0)) <= tol * scale:
            mult = lam[neq:]
            if mult.size == 0 or mult.min() >= -1e-9:
                break
            # drop the lowest-index constraint with a negative multiplier
            pos_drop = -1
            for pos in range(len(active)):
                if mult[pos] < -1e-9 and (
                    pos_drop < 0 or active[pos] < active[pos_drop]
                ):
                    pos_drop = pos
            active.pop(pos_drop)
            continue

        # longest step along pdir that keeps all inactive rows satisfied
        alpha = 1.0
        block = -1
        if G.shape[0]:
            gp = G @ pdir
            slackv = h - G @ x
            active_mask = np.zeros(G.shape[0], dtype=bool)
            active_mask[active] = True
            for i in range(G.shape[0]):
                if active_mask[i] or gp[i] <= tol * scale:
                    continue
                a = max(slackv[i], 0.0) / gp[i]
                if a < alpha - 1e-14:
                    alpha = a
                    block = i
                elif block >= 0 and a <= alpha + 1e-14 and i < block:
                    block = i
        x = x + alpha * pdir
        if block >= 0:
            active.append(block)
            active.sort()
    else:
        raise SolverError("active-set QP did not converge")

    # independent KKT verification
    grad = p.Q @ x + p.q
    resid = grad.copy()
    if neq:
        resid += p.Aeq.T @ lam[:neq]
    mult_full = np.zeros(G.shape[0])
    for pos, idx in enumerate(active):
        mult_full[idx] = max(lam[neq + pos], 0.0)
    if G.shape[0]:
        resid += G.T @ mult_full
    kkt = float(np.max(np.abs(resid), initial=0.0)) / (
        1.0 + float(np.max(np.abs(grad), initial=0.0))
    )
    if neq and np.max(np.abs(p.Aeq @ x - p.beq)) > 1e-9 * scale:
        raise SolverError("QP equality residual out of tolerance")

    obj = 0.5 * float(x @ p.Q @ x) + float(p.q @ x)
    return QPResult("optimal", obj, x, it, kkt_residual=kkt)
