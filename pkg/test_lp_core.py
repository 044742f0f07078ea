#!/usr/bin/env python3
"""
Tests for the standard-form LP solver
"""

import unittest

import numpy as np

from dense_linalg import rng_from_seed
from errors import ConfigError, MalformedLPError
from lp_core import LpStatus, StandardFormLP, presolve, solve_lp

FEAS_TOL = 1e-8
GAP_TOL = 1e-8


def planted_lp(seed: int):
    """Feasible, bounded LP with a known feasible point x_star"""
    rng = rng_from_seed(seed)
    k = int(rng.integers(2, 12))
    n = int(rng.integers(k + 1, 3 * k + 2))
    A = rng.standard_normal((k, n))
    x_star = np.abs(rng.standard_normal(n))
    x_star[rng.random(n) < 0.4] = 0.0
    b = A @ x_star
    c = np.abs(rng.standard_normal(n)) + A.T @ rng.standard_normal(k)
    return StandardFormLP(c=c, A=A, b=b), x_star


class TestSolveLpExamples(unittest.TestCase):
    """Small LPs with known outcomes"""

    def test_forced_optimum(self):
        """min x1 + x2 s.t. x1 + x2 = 1"""
        lp = StandardFormLP(c=[1.0, 1.0], A=[[1.0, 1.0]], b=[1.0])
        solution = solve_lp(lp)
        self.assertEqual(solution.status, LpStatus.OPTIMAL)
        self.assertAlmostEqual(solution.objective, 1.0, places=7)
        self.assertLessEqual(solution.primal_residual, FEAS_TOL * 2)
        self.assertTrue(np.all(solution.x >= -1e-9))

    def test_unique_vertex(self):
        """min x1 + 2 x2 s.t. x1 + x2 = 3 puts everything on x1"""
        lp = StandardFormLP(c=[1.0, 2.0], A=[[1.0, 1.0]], b=[3.0])
        solution = solve_lp(lp)
        self.assertTrue(solution.optimal)
        np.testing.assert_allclose(solution.x, [3.0, 0.0], atol=1e-6)
        self.assertAlmostEqual(solution.dual[0], 1.0, places=6)

    def test_unbounded_without_constraints(self):
        """min -x1 s.t. 0 x1 = 0"""
        solution = solve_lp(StandardFormLP(c=[-1.0], A=[[0.0]], b=[0.0]))
        self.assertEqual(solution.status, LpStatus.UNBOUNDED)
        self.assertIsNone(solution.x)

    def test_zero_cost_without_constraints(self):
        solution = solve_lp(StandardFormLP(c=[0.0, 1.0], A=[[0.0, 0.0]], b=[0.0]))
        self.assertTrue(solution.optimal)
        np.testing.assert_array_equal(solution.x, [0.0, 0.0])

    def test_infeasible(self):
        """min x1 s.t. x1 = -1, x >= 0"""
        solution = solve_lp(StandardFormLP(c=[1.0], A=[[1.0]], b=[-1.0]))
        self.assertEqual(solution.status, LpStatus.INFEASIBLE)
        self.assertTrue(solution.message)

    def test_unbounded_with_constraints(self):
        """min -x1 s.t. x1 - x2 = 0 has a ray along (1, 1)"""
        solution = solve_lp(StandardFormLP(c=[-1.0, 0.0], A=[[1.0, -1.0]], b=[0.0]))
        self.assertEqual(solution.status, LpStatus.UNBOUNDED)

    def test_iteration_limit(self):
        lp, _ = planted_lp(3)
        solution = solve_lp(lp, max_iter=1)
        self.assertEqual(solution.status, LpStatus.ITERATION_LIMIT)
        self.assertEqual(solution.iterations, 1)


class TestPresolve(unittest.TestCase):
    """Dependent row handling"""

    def test_redundant_row_removed(self):
        lp = StandardFormLP(c=[1.0, 1.0, 0.0], A=[[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]], b=[1.0, 2.0])
        kept, removed, reason = presolve(lp, FEAS_TOL)
        self.assertEqual(len(kept), 1)
        self.assertEqual(len(removed), 1)
        self.assertIsNone(reason)

        solution = solve_lp(lp)
        self.assertTrue(solution.optimal)
        self.assertEqual(len(solution.removed_rows), 1)
        self.assertEqual(solution.dual.shape, (2,))
        self.assertAlmostEqual(solution.objective, 0.0, places=7)

    def test_inconsistent_row_is_infeasible(self):
        lp = StandardFormLP(c=[1.0, 1.0], A=[[1.0, 1.0], [2.0, 2.0]], b=[1.0, 3.0])
        solution = solve_lp(lp)
        self.assertEqual(solution.status, LpStatus.INFEASIBLE)
        self.assertIn('inconsistent', solution.message)

    def test_full_rank_untouched(self):
        lp, _ = planted_lp(1)
        kept, removed, reason = presolve(lp, FEAS_TOL)
        self.assertEqual(removed, [])
        self.assertEqual(len(kept), lp.n_rows)


class TestValidation(unittest.TestCase):

    def test_shape_mismatch(self):
        with self.assertRaises(MalformedLPError):
            StandardFormLP(c=[1.0, 1.0], A=[[1.0, 1.0, 1.0]], b=[1.0])

    def test_non_finite(self):
        with self.assertRaises(MalformedLPError):
            StandardFormLP(c=[np.inf], A=[[1.0]], b=[1.0])

    def test_bad_tolerance(self):
        lp = StandardFormLP(c=[1.0], A=[[1.0]], b=[1.0])
        with self.assertRaises(ConfigError):
            solve_lp(lp, feas_tol=0.0)
        with self.assertRaises(ConfigError):
            solve_lp(lp, gap_tol=0.5)
        with self.assertRaises(ConfigError):
            solve_lp(lp, max_iter=0)

    def test_not_an_lp(self):
        with self.assertRaises(MalformedLPError):
            solve_lp({'c': [1.0]})


class TestPlantedLps(unittest.TestCase):
    """Solver contract on random feasible, bounded LPs"""

    def test_contract_on_random_lps(self):
        for seed in range(200):
            lp, x_star = planted_lp(seed)
            solution = solve_lp(lp, FEAS_TOL, GAP_TOL)
            with self.subTest(seed=seed):
                self.assertEqual(solution.status, LpStatus.OPTIMAL, solution.message)
                b_scale = 1 + np.max(np.abs(lp.b))
                self.assertLessEqual(solution.primal_residual, FEAS_TOL * b_scale)
                self.assertLessEqual(solution.duality_gap, GAP_TOL * (1 + abs(solution.objective)))
                self.assertTrue(np.all(solution.x >= -1e-9))

                # b^T y can exceed c^T x_star only through the dual residual
                planted = float(lp.c @ x_star)
                slack = (GAP_TOL * (1 + abs(solution.objective))
                         + FEAS_TOL * (1 + np.max(np.abs(lp.c))) * np.sum(x_star))
                self.assertLessEqual(solution.objective, planted + slack)

    def test_deterministic(self):
        lp, _ = planted_lp(17)
        first = solve_lp(lp)
        second = solve_lp(lp)
        self.assertEqual(first.x.tobytes(), second.x.tobytes())
        self.assertEqual(first.iterations, second.iterations)


if __name__ == '__main__':
    unittest.main()
