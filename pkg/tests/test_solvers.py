import numpy as np
import pytest

from gridmc.solvers import BoundedLP, BoxQP, SolverError, solve_lp, solve_qp

from oracles import lp_vertex_enumeration, qp_projected_gradient


def _no_rows(n):
    return dict(A=np.zeros((0, n)), row_lo=np.zeros(0), row_hi=np.zeros(0))


class TestSolveLP:
    def test_box_only_minimum(self):
        p = BoundedLP(c=[1.0], lb=[1.0], ub=[2.0], **_no_rows(1))
        r = solve_lp(p)
        assert r.status == "optimal"
        assert r.objective == pytest.approx(1.0, abs=1e-12)
        assert r.x[0] == pytest.approx(1.0, abs=1e-12)

    def test_two_bus_curtailment_instance(self):
        # generation 100 MW behind a 30 MW line, 50 MW demand: shed 20 MW
        p = BoundedLP(
            c=[1.0, 0.0],
            A=np.array([[-0.5, 0.5], [1.0, 1.0]]),
            row_lo=[-55.0, 50.0],
            row_hi=[5.0, 50.0],
            lb=[0.0, 0.0],
            ub=[50.0, 100.0],
        )
        r = solve_lp(p, x0=np.array([50.0, 0.0]))
        assert r.status == "optimal"
        assert r.objective == pytest.approx(20.0, abs=1e-9)

    def test_degenerate_zero_demand(self):
        p = BoundedLP(
            c=[1.0, 1.0],
            A=np.array([[1.0, 1.0]]),
            row_lo=[0.0], row_hi=[0.0],
            lb=[0.0, 0.0], ub=[0.0, 10.0],
        )
        r = solve_lp(p)
        assert r.status == "optimal"
        assert r.objective == pytest.approx(0.0, abs=1e-12)

    def test_unbounded_reported(self):
        p = BoundedLP(c=[-1.0], lb=[0.0], ub=[np.inf], **_no_rows(1))
        assert solve_lp(p).status == "unbounded"

    def test_infeasible_reported(self):
        p = BoundedLP(c=[1.0], A=np.array([[1.0]]), row_lo=[2.0],
                      row_hi=[np.inf], lb=[0.0], ub=[1.0])
        assert solve_lp(p).status == "infeasible"

    def test_inconsistent_bounds_rejected(self):
        with pytest.raises(ValueError):
            BoundedLP(c=[1.0], lb=[2.0], ub=[1.0], **_no_rows(1))

    def test_matches_vertex_enumeration_on_random_instances(self):
        rng = np.random.default_rng(2024)
        for trial in range(50):
            n = int(rng.integers(1, 7))
            m = int(rng.integers(0, 4))
            lb = rng.uniform(-2.0, 0.0, n)
            ub = lb + rng.uniform(0.5, 3.0, n)
            A = rng.normal(size=(m, n))
            x_int = rng.uniform(lb, ub)
            mid = A @ x_int if m else np.zeros(0)
            row_lo = mid - rng.uniform(0.1, 2.0, m)
            row_hi = mid + rng.uniform(0.1, 2.0, m)
            c = rng.normal(size=n)
            p = BoundedLP(c=c, A=A, row_lo=row_lo, row_hi=row_hi, lb=lb, ub=ub)
            r = solve_lp(p)
            assert r.status == "optimal", f"trial {trial}"
            ref, _ = lp_vertex_enumeration(c, A, row_lo, row_hi, lb, ub)
            assert r.objective == pytest.approx(ref, abs=1e-8), f"trial {trial}"

    def test_row_scaling_invariance(self):
        rng = np.random.default_rng(5)
        n, m = 4, 3
        lb = np.full(n, -1.0)
        ub = np.full(n, 2.0)
        A = rng.normal(size=(m, n))
        row_lo = A @ np.zeros(n) - 1.0
        row_hi = A @ np.zeros(n) + 1.0
        c = rng.normal(size=n)
        base = solve_lp(BoundedLP(c=c, A=A, row_lo=row_lo, row_hi=row_hi,
                                  lb=lb, ub=ub))
        scale = np.array([0.1, 10.0, 3.0])
        scaled = solve_lp(BoundedLP(c=c, A=A * scale[:, None],
                                    row_lo=row_lo * scale, row_hi=row_hi * scale,
                                    lb=lb, ub=ub))
        assert scaled.objective == pytest.approx(base.objective, rel=1e-9)

    def test_feasibility_of_returned_point(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            lb = rng.uniform(-1, 0, n)
            ub = lb + rng.uniform(1, 2, n)
            A = rng.normal(size=(2, n))
            x_int = rng.uniform(lb, ub)
            row_lo = A @ x_int - 0.5
            row_hi = A @ x_int + 0.5
            p = BoundedLP(c=rng.normal(size=n), A=A, row_lo=row_lo,
                          row_hi=row_hi, lb=lb, ub=ub)
            r = solve_lp(p)
            assert r.status == "optimal"
            assert np.all(r.x >= lb - 1e-9) and np.all(r.x <= ub + 1e-9)
            rows = A @ r.x
            assert np.all(rows >= row_lo - 1e-8) and np.all(rows <= row_hi + 1e-8)


class TestSolveQP:
    def test_interior_minimum(self):
        p = BoxQP(Q=[[2.0]], q=[-2.0], lb=[0.0], ub=[2.0])
        r = solve_qp(p)
        assert r.status == "optimal"
        assert r.x[0] == pytest.approx(1.0, abs=1e-10)
        assert r.kkt_residual < 1e-8

    def test_active_bound(self):
        p = BoxQP(Q=[[2.0]], q=[-6.0], lb=[0.0], ub=[2.0])
        r = solve_qp(p)
        assert r.x[0] == pytest.approx(2.0, abs=1e-10)
        assert r.kkt_residual < 1e-8

    def test_non_psd_rejected(self):
        with pytest.raises(SolverError):
            solve_qp(BoxQP(Q=[[-1.0]], q=[0.0], lb=[-1.0], ub=[1.0]))

    def test_equality_and_inequality_rows(self):
        # min (x1-1)^2 + (x2-1)^2 s.t. x1 + x2 = 1, x1 - x2 <= 0
        p = BoxQP(
            Q=2.0 * np.eye(2), q=[-2.0, -2.0],
            lb=[-5.0, -5.0], ub=[5.0, 5.0],
            Aeq=np.array([[1.0, 1.0]]), beq=[1.0],
            G=np.array([[1.0, -1.0]]), h=[0.0],
        )
        r = solve_qp(p)
        assert r.status == "optimal"
        assert r.x == pytest.approx([0.5, 0.5], abs=1e-9)

    def test_repeated_solves_bit_identical(self):
        rng = np.random.default_rng(3)
        n = 6
        B = rng.normal(size=(n, n))
        p = BoxQP(Q=B @ B.T + np.eye(n), q=rng.normal(size=n),
                  lb=np.full(n, -1.0), ub=np.full(n, 1.0))
        r1 = solve_qp(p)
        r2 = solve_qp(p)
        assert np.array_equal(r1.x, r2.x)
        assert r1.objective == r2.objective

    def test_matches_projected_gradient_on_random_box_qps(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(2, 6))
            B = rng.normal(size=(n, n))
            Q = B @ B.T + 0.5 * np.eye(n)
            q = rng.normal(size=n)
            lb = np.full(n, -0.8)
            ub = np.full(n, 0.8)
            p = BoxQP(Q=Q, q=q, lb=lb, ub=ub)
            r = solve_qp(p)
            ref = qp_projected_gradient(Q, q, lb, ub, np.zeros((0, n)),
                                        np.zeros(0), x0=np.zeros(n))
            assert r.x == pytest.approx(ref, abs=1e-6)
