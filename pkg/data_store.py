#!/usr/bin/env python3
"""
File formats for matrices, vectors, LPs and instanton records
Plain text and JSON only, so results diff cleanly between runs
"""

import hashlib
import json
import os
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from basp import Verdict
from dense_linalg import as_matrix, as_vector
from errors import DataStoreError, InvalidDimensionsError
from isa import InstantonRecord, IsaTrace, StepCase, TraceStep
from lp_core import StandardFormLP
from settings import Tolerances

logger = logging.getLogger(__name__)

RECORD_FORMAT = 'instanton-record/1'
MATRIX_FORMAT = 'matrix/1'
FLOAT_FORMAT = '%.17g'


def _sparse(v: np.ndarray) -> List[List]:
    return [[int(i), float(v[i])] for i in np.flatnonzero(v)]


def _dense(pairs: List[List], length: int) -> np.ndarray:
    v = np.zeros(length)
    for i, value in pairs:
        if not 0 <= int(i) < length:
            raise DataStoreError(f"index {i} out of range for length {length}")
        v[int(i)] = float(value)
    return v


def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


class DataStore:
    """Reads and writes everything the toolkit persists"""

    @staticmethod
    def matrix_hash(F) -> str:
        """Content hash of a matrix: shape plus raw float64 bytes"""
        F = np.ascontiguousarray(F, dtype='<f8')
        digest = hashlib.sha256()
        digest.update(f"{F.shape[0]} {F.shape[1]}\n".encode('ascii'))
        digest.update(F.tobytes())
        return 'sha256:' + digest.hexdigest()

    @staticmethod
    def matrix_to_dict(F) -> Dict:
        F = as_matrix(F)
        return {
            'format': MATRIX_FORMAT,
            'rows': int(F.shape[0]),
            'cols': int(F.shape[1]),
            'matrix_id': DataStore.matrix_hash(F),
            'entries': [[float(x) for x in row] for row in F]
        }

    @staticmethod
    def matrix_from_dict(data: Dict) -> np.ndarray:
        try:
            if data.get('format') != MATRIX_FORMAT:
                raise DataStoreError(f"not a matrix envelope: format={data.get('format')!r}")
            F = as_matrix(data['entries'])
            if F.shape != (data['rows'], data['cols']):
                raise InvalidDimensionsError(
                    f"header says {data['rows']}x{data['cols']}, entries are {F.shape[0]}x{F.shape[1]}"
                )
            return F
        except (KeyError, TypeError, ValueError) as e:
            raise DataStoreError(f"Malformed matrix envelope: {e}")

    @staticmethod
    def save_matrix(F, path: str) -> str:
        """Write F to path (text, or the JSON envelope for .json paths); returns its hash"""
        F = as_matrix(F)
        try:
            _ensure_parent(path)
            if path.endswith('.json'):
                DataStore.save_json(DataStore.matrix_to_dict(F), path)
            else:
                np.savetxt(path, F, fmt=FLOAT_FORMAT, header=f"{F.shape[0]} {F.shape[1]}", comments='')
        except OSError as e:
            logger.error(f"Failed to save matrix: {e}")
            raise DataStoreError(f"Cannot write matrix to {path}: {e}")

        matrix_id = DataStore.matrix_hash(F)
        logger.info(f"Matrix {F.shape[0]}x{F.shape[1]} saved to {path} ({matrix_id})")
        return matrix_id

    @staticmethod
    def load_matrix(path: str) -> np.ndarray:
        if path.endswith('.json'):
            return DataStore.matrix_from_dict(DataStore.load_json(path))
        try:
            with open(path, 'r') as f:
                header = f.readline().split()
                rows, cols = int(header[0]), int(header[1])
                F = np.loadtxt(f, dtype=np.float64, ndmin=2)
        except (OSError, ValueError, IndexError) as e:
            raise DataStoreError(f"Cannot read matrix from {path}: {e}")

        if F.shape != (rows, cols):
            raise InvalidDimensionsError(
                f"{path}: header says {rows}x{cols}, found {F.shape[0]}x{F.shape[1]} values"
            )
        return as_matrix(F)

    @staticmethod
    def save_vector(v, path: str):
        v = as_vector(v)
        try:
            _ensure_parent(path)
            np.savetxt(path, v, fmt=FLOAT_FORMAT, header=f"{v.shape[0]}", comments='')
        except OSError as e:
            raise DataStoreError(f"Cannot write vector to {path}: {e}")

    @staticmethod
    def load_vector(path: str) -> np.ndarray:
        try:
            with open(path, 'r') as f:
                length = int(f.readline().split()[0])
                v = np.loadtxt(f, dtype=np.float64, ndmin=1)
        except (OSError, ValueError, IndexError) as e:
            raise DataStoreError(f"Cannot read vector from {path}: {e}")

        if v.shape != (length,):
            raise InvalidDimensionsError(f"{path}: header says {length} values, found {v.shape[0]}")
        return as_vector(v)

    @staticmethod
    def dump_lp(lp: StandardFormLP, directory: str):
        """c.txt, A.txt and b.txt in the vector/matrix text formats"""
        DataStore.save_vector(lp.c, os.path.join(directory, 'c.txt'))
        DataStore.save_matrix(lp.A, os.path.join(directory, 'A.txt'))
        DataStore.save_vector(lp.b, os.path.join(directory, 'b.txt'))
        logger.info(f"LP with {lp.n_rows} rows and {lp.n_vars} variables dumped to {directory}")

    @staticmethod
    def record_to_dict(record: InstantonRecord, shape: Tuple[int, int],
                       tolerances: Tolerances, selection: str = 'first') -> Dict:
        """JSON envelope with a fixed key order"""
        support = np.flatnonzero(record.instanton)
        return {
            'format': RECORD_FORMAT,
            'matrix_id': record.matrix_id,
            'rows': int(shape[0]),
            'cols': int(shape[1]),
            'seed': record.trace.seed,
            'init_k': record.trace.init_k,
            'selection': selection,
            'length': int(record.length),
            'instanton': _sparse(record.instanton),
            'leave_one_out': [[int(i), bool(ok)] for i, ok in zip(support, record.leave_one_out_verdicts)],
            'basp_calls': int(record.basp_calls),
            'trace': [
                {
                    'step': index,
                    'case': step.case.value,
                    'l0': int(step.l0),
                    'basp_verdict': step.basp_verdict.value,
                    'e': _sparse(step.e)
                }
                for index, step in enumerate(record.trace.steps)
            ],
            'tolerances': tolerances.to_dict()
        }

    @staticmethod
    def record_from_dict(data: Dict) -> Tuple[InstantonRecord, Dict]:
        """The record plus its metadata (rows, cols, selection, tolerances)"""
        try:
            if data.get('format') != RECORD_FORMAT:
                raise DataStoreError(f"not an instanton record: format={data.get('format')!r}")
            cols = int(data['cols'])
            trace = IsaTrace(
                steps=[
                    TraceStep(e=_dense(step['e'], cols), l0=int(step['l0']),
                              case=StepCase(step['case']), basp_verdict=Verdict(step['basp_verdict']))
                    for step in data['trace']
                ],
                seed=data['seed'],
                init_k=data['init_k']
            )
            record = InstantonRecord(
                instanton=_dense(data['instanton'], cols),
                length=int(data['length']),
                trace=trace,
                leave_one_out_verdicts=[bool(ok) for _, ok in data['leave_one_out']],
                matrix_id=data['matrix_id'],
                basp_calls=int(data.get('basp_calls', 0))
            )
            meta = {
                'rows': int(data['rows']),
                'cols': cols,
                'selection': data.get('selection', 'first'),
                'tolerances': Tolerances(**data['tolerances'])
            }
        except (KeyError, TypeError, ValueError) as e:
            raise DataStoreError(f"Malformed instanton record: {e}")
        return record, meta

    @staticmethod
    def save_record(record: InstantonRecord, path: str, shape: Tuple[int, int],
                    tolerances: Tolerances, selection: str = 'first'):
        DataStore.save_json(DataStore.record_to_dict(record, shape, tolerances, selection), path)

    @staticmethod
    def load_record(path: str) -> Tuple[InstantonRecord, Dict]:
        return DataStore.record_from_dict(DataStore.load_json(path))

    @staticmethod
    def save_json(data: Dict, path: str):
        try:
            _ensure_parent(path)
            with open(path, 'w') as f:
                json.dump(data, f, indent=2)
                f.write('\n')
        except (OSError, TypeError) as e:
            logger.error(f"Failed to save {path}: {e}")
            raise DataStoreError(f"Cannot write {path}: {e}")

    @staticmethod
    def load_json(path: str) -> Optional[Dict]:
        try:
            with open(path, 'r') as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DataStoreError(f"Cannot read {path}: {e}")
