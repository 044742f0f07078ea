#!/usr/bin/env python3
"""
Tests for persisted formats: matrices, vectors, records and histogram CSVs
"""

import json
import os
import shutil
import tempfile
import unittest

import numpy as np

from basp import Verdict
from data_store import DataStore
from dense_linalg import gaussian_matrix, orthonormalize_rows
from errors import DataStoreError, InvalidDimensionsError, MalformedCSVError
from histogram_exporter import HistogramExporter
from isa import InstantonRecord, IsaTrace, StepCase, TraceStep
from settings import Tolerances


def small_record():
    e0 = np.zeros(6)
    e0[[0, 2, 5]] = [1.0, -0.25, 0.5]
    instanton = np.zeros(6)
    instanton[[2, 5]] = [-0.125, 0.75]
    trace = IsaTrace(
        steps=[TraceStep(e=e0, l0=3, case=StepCase.MEDIAN_STEP, basp_verdict=Verdict.FAILURE),
               TraceStep(e=instanton, l0=2, case=StepCase.HALT, basp_verdict=Verdict.FAILURE)],
        seed=11,
        init_k=3
    )
    return InstantonRecord(instanton=instanton, length=2, trace=trace,
                           leave_one_out_verdicts=[True, True], matrix_id='sha256:abc', basp_calls=5)


class TestMatrixFiles(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.F = orthonormalize_rows(gaussian_matrix(4, 9, 7))

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def test_text_values_exact(self):
        path = os.path.join(self.tmp, 'F.txt')
        matrix_id = DataStore.save_matrix(self.F, path)
        loaded = DataStore.load_matrix(path)
        self.assertEqual(loaded.tobytes(), self.F.tobytes())
        self.assertEqual(DataStore.matrix_hash(loaded), matrix_id)

    def test_json_values_exact(self):
        path = os.path.join(self.tmp, 'F.json')
        DataStore.save_matrix(self.F, path)
        self.assertEqual(DataStore.load_matrix(path).tobytes(), self.F.tobytes())

    def test_hash_depends_on_shape(self):
        flat = np.arange(12.0)
        self.assertNotEqual(DataStore.matrix_hash(flat.reshape(3, 4)), DataStore.matrix_hash(flat.reshape(4, 3)))
        self.assertTrue(DataStore.matrix_hash(self.F).startswith('sha256:'))

    def test_header_mismatch(self):
        path = os.path.join(self.tmp, 'bad.txt')
        with open(path, 'w') as f:
            f.write("3 2\n1 2\n3 4\n")
        with self.assertRaises(InvalidDimensionsError):
            DataStore.load_matrix(path)

    def test_missing_file(self):
        with self.assertRaises(DataStoreError):
            DataStore.load_matrix(os.path.join(self.tmp, 'missing.txt'))

    def test_vector_round_trip(self):
        path = os.path.join(self.tmp, 'v.txt')
        v = np.array([0.1, -2.0, 1e-300])
        DataStore.save_vector(v, path)
        self.assertEqual(DataStore.load_vector(path).tobytes(), v.tobytes())


class TestRecords(unittest.TestCase):

    def test_key_order(self):
        data = DataStore.record_to_dict(small_record(), (3, 6), Tolerances())
        self.assertEqual(list(data), ['format', 'matrix_id', 'rows', 'cols', 'seed', 'init_k', 'selection',
                                      'length', 'instanton', 'leave_one_out', 'basp_calls', 'trace',
                                      'tolerances'])
        self.assertEqual(data['instanton'], [[2, -0.125], [5, 0.75]])
        self.assertEqual(data['leave_one_out'], [[2, True], [5, True]])
        self.assertEqual([step['case'] for step in data['trace']], ['median-step', 'halt'])

    def test_restore(self):
        tolerances = Tolerances(tau=1e-7)
        data = json.loads(json.dumps(DataStore.record_to_dict(small_record(), (3, 6), tolerances, 'random')))
        record, meta = DataStore.record_from_dict(data)
        self.assertEqual(record.trace.l0_sequence, [3, 2])
        self.assertEqual(record.trace.steps[0].case, StepCase.MEDIAN_STEP)
        self.assertEqual(record.basp_calls, 5)
        self.assertEqual(meta['selection'], 'random')
        self.assertEqual(meta['tolerances'], tolerances)

    def test_wrong_format(self):
        with self.assertRaises(DataStoreError):
            DataStore.record_from_dict({'format': 'something-else'})

    def test_index_out_of_range(self):
        data = DataStore.record_to_dict(small_record(), (3, 6), Tolerances())
        data['instanton'].append([6, 1.0])
        with self.assertRaises(DataStoreError):
            DataStore.record_from_dict(data)

    def test_missing_key(self):
        data = DataStore.record_to_dict(small_record(), (3, 6), Tolerances())
        del data['trace']
        with self.assertRaises(DataStoreError):
            DataStore.record_from_dict(data)


class TestHistogramExporter(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.exporter = HistogramExporter(bar_width=10)

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def write(self, text):
        path = os.path.join(self.tmp, 'h.csv')
        with open(path, 'w') as f:
            f.write(text)
        return path

    def test_csv_layout(self):
        path = os.path.join(self.tmp, 'out', 'h.csv')
        self.exporter.write_csv({9: 1, 4: 3}, path)
        with open(path) as f:
            self.assertEqual(f.read(), "length,count\n4,3\n9,1\n")
        self.assertEqual(self.exporter.read_csv(path), {4: 3, 9: 1})

    def test_empty_histogram_is_header(self):
        path = os.path.join(self.tmp, 'h.csv')
        self.exporter.write_csv({}, path)
        with open(path) as f:
            self.assertEqual(f.read().strip(), "length,count")
        self.assertEqual(self.exporter.read_csv(path), {})

    def test_empty_file(self):
        self.assertEqual(self.exporter.read_csv(self.write('')), {})

    def test_render_scaling(self):
        lines = self.exporter.render({3: 10, 4: 5, 5: 0}).splitlines()
        self.assertEqual(lines[0], "3 | 10 ##########")
        self.assertEqual(lines[1], "4 |  5 #####")
        self.assertEqual(lines[2], "5 |  0 ")

    def test_small_counts_get_a_bar(self):
        lines = self.exporter.render({1: 1000, 2: 1}).splitlines()
        self.assertTrue(lines[1].endswith(' #'))

    def test_render_empty(self):
        self.assertEqual(self.exporter.render({}), "no data")
        self.assertEqual(self.exporter.render({3: 0}), "no data")

    def test_rejects_bad_rows(self):
        for text in ('length,count\n3,-1\n', 'length,count\n3,1.5\n', 'length,count\n3,1\n3,2\n',
                     'length,count\n3,\n', 'count,length\n1,3\n'):
            with self.subTest(text=text), self.assertRaises(MalformedCSVError):
                self.exporter.read_csv(self.write(text))


if __name__ == '__main__':
    unittest.main()
