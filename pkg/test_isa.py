#!/usr/bin/env python3
"""
Tests for the instanton search
"""

import os
import unittest

import numpy as np

from basp import Verdict, basp_decode, l0_norm
from data_store import DataStore
from dense_linalg import gaussian_matrix, null_space_sample, orthonormalize_rows, rng_from_seed
from errors import ConfigError, ContractViolationError, InitNotFailingError, InvalidKError, ZeroVectorError
from isa import Instanton, NextVector, StepCase, isa_run, isa_step, median, random_init, verify_instanton
from settings import Tolerances
from test_dense_linalg import check_fixture

RUN_SLOW = os.environ.get('RUN_SLOW_TESTS') == '1'
TAU = 1e-6


def orthonormal(rows, cols, seed):
    return orthonormalize_rows(gaussian_matrix(rows, cols, seed))


def failing_run(F, k, seed):
    """isa_run from the first seed >= seed whose initialization BasP fails on"""
    for s in range(seed, seed + 50):
        try:
            return isa_run(F, random_init(F.shape[1], k, s), seed=s, init_k=k)
        except InitNotFailingError:
            continue
    raise AssertionError(f"no failing initialization near seed {seed}")


def assert_valid_trace(test, record, init_l0):
    l0s = record.trace.l0_sequence
    test.assertEqual(l0s[0], init_l0)
    test.assertTrue(all(a > b for a, b in zip(l0s, l0s[1:])), l0s)
    test.assertLessEqual(len(record.trace.steps), init_l0)
    test.assertEqual(record.trace.steps[-1].case, StepCase.HALT)
    test.assertEqual(l0s[-1], record.length)
    for step in record.trace.steps:
        test.assertEqual(step.basp_verdict, Verdict.FAILURE)
    test.assertTrue(all(record.leave_one_out_verdicts))
    test.assertEqual(len(record.leave_one_out_verdicts), record.length)


class TestMedian(unittest.TestCase):
    """Median operator"""

    def test_dominant_entry(self):
        result = median(np.array([3.0, 1.0, 1.0, 1.0]))
        self.assertEqual(result.t, 1)
        np.testing.assert_array_equal(result.median, [3.0, 0.0, 0.0, 0.0])

    def test_ties_go_to_lower_index(self):
        result = median(np.array([1.0, 1.0, 1.0, 1.0]))
        self.assertEqual(result.t, 2)
        np.testing.assert_array_equal(result.median, [1.0, 1.0, 0.0, 0.0])
        self.assertEqual(result.support.tolist(), [0, 1])

    def test_sign_preserved(self):
        result = median(np.array([-5.0, 2.0, 1.0]))
        self.assertEqual(result.t, 1)
        np.testing.assert_array_equal(result.median, [-5.0, 0.0, 0.0])

    def test_zero_vector(self):
        with self.assertRaises(ZeroVectorError):
            median(np.zeros(5))

    def test_laws_on_random_vectors(self):
        rng = rng_from_seed(2024)
        for _ in range(1000):
            n = int(rng.integers(1, 30))
            v = rng.standard_normal(n)
            v[rng.random(n) < 0.3] = 0.0
            if not np.any(v):
                continue
            result = median(v)
            total = np.sum(np.abs(v))
            mags = np.sort(np.abs(v))[::-1]

            self.assertGreaterEqual(np.sum(np.abs(result.median)), total / 2)
            self.assertLess(np.sum(mags[:result.t - 1]), total / 2)
            self.assertEqual(len(result.support), result.t)
            np.testing.assert_array_equal(result.median[result.support], v[result.support])
            off = np.setdiff1d(np.arange(n), result.support)
            self.assertTrue(np.all(result.median[off] == 0))


class TestRandomInit(unittest.TestCase):

    def test_exact_sparsity(self):
        e = random_init(64, 15, 3)
        self.assertEqual(np.count_nonzero(e), 15)
        self.assertEqual(l0_norm(e, TAU), 15)

    def test_deterministic(self):
        np.testing.assert_array_equal(random_init(64, 15, 8), random_init(64, 15, 8))

    def test_k_exceeds_m(self):
        with self.assertRaises(InvalidKError):
            random_init(5, 6, 0)

    def test_k_zero(self):
        with self.assertRaises(InvalidKError):
            random_init(5, 0, 0)


class TestMedianStepProperties(unittest.TestCase):
    """Support bound of the median step and failure on null-space medians"""

    def test_median_never_grows_support(self):
        violations = 0
        checked = 0
        for rows, cols in ((15, 64), (40, 160)):
            F = orthonormal(rows, cols, rows)
            for trial in range(250):
                e = random_init(cols, rows, trial)
                result = basp_decode(F, e)
                if not result.failed:
                    continue
                diff = e - result.d
                diff[np.abs(diff) <= TAU] = 0.0
                checked += 1
                if l0_norm(median(diff).median, TAU) > l0_norm(e, TAU):
                    violations += 1
        self.assertGreater(checked, 100)
        self.assertEqual(violations, 0)

    def test_basp_fails_on_null_space_median(self):
        for rows, cols in ((15, 64), (40, 160)):
            F = orthonormal(rows, cols, rows + 1)
            for seed in range(200):
                e = null_space_sample(F, seed)
                e_hat = median(e).median
                with self.subTest(size=(rows, cols), seed=seed):
                    self.assertTrue(basp_decode(F, e_hat).failed)


class TestIsaStep(unittest.TestCase):

    def setUp(self):
        self.F = orthonormal(15, 64, 0)

    def test_requires_failing_input(self):
        j = int(np.argmax(np.linalg.norm(self.F, axis=0)))
        e = np.zeros(64)
        e[j] = 1.0
        with self.assertRaises(ContractViolationError):
            isa_step(self.F, e)

    def test_next_vector_is_sparser(self):
        for seed in range(10):
            e = random_init(64, 15, seed)
            decoded = basp_decode(self.F, e)
            if not decoded.failed:
                continue
            outcome = isa_step(self.F, e, decoded=decoded)
            if isinstance(outcome, NextVector):
                self.assertLess(l0_norm(outcome.e, TAU), l0_norm(e, TAU))
                self.assertTrue(outcome.decoded.failed)
            else:
                self.assertIsInstance(outcome, Instanton)

    def test_unknown_selection(self):
        e = null_space_sample(self.F, 0)
        with self.assertRaises(ConfigError):
            isa_step(self.F, median(e).median, selection='best')


class TestIsaRun(unittest.TestCase):
    """End-to-end runs on seeded matrices"""

    @classmethod
    def setUpClass(cls):
        cls.F = orthonormal(15, 64, 0)
        cls.record = failing_run(cls.F, 15, 0)

    def test_certified_instanton(self):
        record = self.record
        assert_valid_trace(self, record, 15)
        report = verify_instanton(self.F, record.instanton)
        self.assertTrue(report.certified, report.to_dict())
        self.assertEqual(report.support, record.support.tolist())

    def test_deterministic(self):
        again = failing_run(self.F, 15, 0)
        self.assertEqual(again.instanton.tobytes(), self.record.instanton.tobytes())
        self.assertEqual(again.trace.l0_sequence, self.record.trace.l0_sequence)

    def test_threaded_reductions_match(self):
        seed = self.record.trace.seed
        threaded = isa_run(self.F, random_init(64, 15, seed), seed=seed, init_k=15, workers=4)
        np.testing.assert_array_equal(threaded.instanton, self.record.instanton)
        self.assertEqual(threaded.basp_calls, self.record.basp_calls)
        self.assertEqual(threaded.trace.l0_sequence, self.record.trace.l0_sequence)

    def test_threaded_records_identical(self):
        """Serialized records do not depend on the worker count"""
        for seed in range(8):
            try:
                single = isa_run(self.F, random_init(64, 15, seed), seed=seed, init_k=15, workers=1)
            except InitNotFailingError:
                continue
            pooled = isa_run(self.F, random_init(64, 15, seed), seed=seed, init_k=15, workers=4)
            with self.subTest(seed=seed):
                self.assertEqual(DataStore.record_to_dict(single, self.F.shape, Tolerances()),
                                 DataStore.record_to_dict(pooled, self.F.shape, Tolerances()))

    def test_trace_fixture(self):
        """Seeded 15x64 run pinned at first build"""
        record = self.record
        check_fixture(self, 'isa_trace_15x64', {
            'seed': record.trace.seed,
            'l0_sequence': record.trace.l0_sequence,
            'cases': [step.case.value for step in record.trace.steps],
            'support': record.support.tolist(),
            'instanton': record.instanton[record.support].tolist(),
            'basp_calls': record.basp_calls,
        }, atol=1e-9)

    def test_random_selection_certified(self):
        seed = self.record.trace.seed
        record = isa_run(self.F, random_init(64, 15, seed), seed=seed, init_k=15, selection='random')
        assert_valid_trace(self, record, 15)
        self.assertTrue(verify_instanton(self.F, record.instanton).certified)

    def test_decodable_init_rejected(self):
        j = int(np.argmax(np.linalg.norm(self.F, axis=0)))
        e = np.zeros(64)
        e[j] = 1.0
        with self.assertRaises(InitNotFailingError):
            isa_run(self.F, e)

    def test_step_budget_below_l0(self):
        with self.assertRaises(ConfigError):
            isa_run(self.F, random_init(64, 15, 0), max_steps=3)

    def test_extra_entry_breaks_certification(self):
        """Adding an entry leaves a failing reduction at the added index"""
        e = self.record.instanton.copy()
        extra = int(np.setdiff1d(np.arange(64), self.record.support)[0])
        e[extra] = 0.7
        report = verify_instanton(self.F, e)
        self.assertFalse(report.certified)
        self.assertIn(extra, report.reduction_verdicts)
        if report.basp_verdict is Verdict.FAILURE:
            self.assertIn(extra, report.failing_reductions)

    def test_decodable_vector_not_certified(self):
        j = int(np.argmax(np.linalg.norm(self.F, axis=0)))
        e = np.zeros(64)
        e[j] = 2.0
        report = verify_instanton(self.F, e)
        self.assertEqual(report.basp_verdict, Verdict.SUCCESS)
        self.assertFalse(report.certified)

    def test_verify_needs_support(self):
        with self.assertRaises(ZeroVectorError):
            verify_instanton(self.F, np.zeros(64))

    def test_record_round_trip_still_certified(self):
        data = DataStore.record_to_dict(self.record, self.F.shape, Tolerances())
        restored, meta = DataStore.record_from_dict(data)
        np.testing.assert_array_equal(restored.instanton, self.record.instanton)
        self.assertEqual(restored.trace.l0_sequence, self.record.trace.l0_sequence)
        self.assertEqual(meta['cols'], 64)
        self.assertTrue(verify_instanton(self.F, restored.instanton).certified)

    def test_runs_terminate_with_certified_instantons(self):
        for seed in range(1, 11):
            try:
                record = isa_run(self.F, random_init(64, 15, seed), seed=seed, init_k=15)
            except InitNotFailingError:
                continue
            with self.subTest(seed=seed):
                assert_valid_trace(self, record, 15)
                self.assertTrue(verify_instanton(self.F, record.instanton).certified)


@unittest.skipUnless(RUN_SLOW, "set RUN_SLOW_TESTS=1 for the full termination suite")
class TestIsaTerminationFull(unittest.TestCase):
    """1000 seeded runs with init_k equal to the row count"""

    def test_thousand_runs(self):
        sizes = ((15, 64), (40, 160))
        matrices = {size: orthonormal(size[0], size[1], size[0]) for size in sizes}
        failures = []
        for index in range(1000):
            rows, cols = sizes[index % 2]
            F = matrices[(rows, cols)]
            try:
                record = isa_run(F, random_init(cols, rows, index), seed=index, init_k=rows)
            except InitNotFailingError:
                continue
            l0s = record.trace.l0_sequence
            ok = (all(a > b for a, b in zip(l0s, l0s[1:])) and len(l0s) <= rows
                  and verify_instanton(F, record.instanton).certified)
            if not ok:
                failures.append(index)
        self.assertEqual(failures, [])


if __name__ == '__main__':
    unittest.main()
