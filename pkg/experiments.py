#!/usr/bin/env python3
"""
Batched instanton sampling

Runs independent ISA trials against one shared matrix, one seed per trial
(base_seed + trial index), optionally across a process pool. Results are
sorted by trial index before aggregation so every output byte is independent
of the worker count.
"""

import os
import time
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from basp import Verdict, l0_norm
from data_store import DataStore
from dense_linalg import gaussian_matrix, orthonormalize_rows
from errors import ConfigError, HashMismatchError, InitNotFailingError, InstantonSearchError
from histogram_exporter import histogram_exporter
from isa import InstantonRecord, isa_run, random_init, verify_instanton
from oracle import confirm_failure
from settings import ORACLE_BUDGET, ExperimentConfig, Tolerances

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64
ISA_REPLAY_TOL = 1e-9


class TrialStatus(Enum):
    FOUND = "found"
    DISCARDED = "discarded"
    ERRORED = "errored"


@dataclass
class TrialOutcome:
    index: int
    seed: int
    status: TrialStatus
    record: Optional[InstantonRecord] = None
    error: Optional[Dict] = None
    seconds: float = 0.0

    @property
    def isa_steps(self) -> int:
        return len(self.record.trace.steps) if self.record else 0


@dataclass
class Histogram:
    """Instanton length counts for a batch"""
    bins: Dict[int, int] = field(default_factory=dict)
    trials_attempted: int = 0
    trials_discarded: int = 0
    trials_errored: int = 0

    @property
    def min_length(self) -> Optional[int]:
        return min(self.bins) if self.bins else None

    @property
    def reconciles(self) -> bool:
        return sum(self.bins.values()) + self.trials_discarded + self.trials_errored == self.trials_attempted

    @classmethod
    def from_outcomes(cls, outcomes: List[TrialOutcome]) -> 'Histogram':
        bins: Dict[int, int] = {}
        for outcome in outcomes:
            if outcome.status is TrialStatus.FOUND:
                bins[outcome.record.length] = bins.get(outcome.record.length, 0) + 1
        return cls(
            bins=dict(sorted(bins.items())),
            trials_attempted=len(outcomes),
            trials_discarded=sum(1 for o in outcomes if o.status is TrialStatus.DISCARDED),
            trials_errored=sum(1 for o in outcomes if o.status is TrialStatus.ERRORED)
        )


@dataclass
class BatchResult:
    histogram: Histogram
    outcomes: List[TrialOutcome]
    matrix_id: str
    init_k: int

    @property
    def errored_indices(self) -> List[int]:
        return [o.index for o in self.outcomes if o.status is TrialStatus.ERRORED]

    @property
    def found(self) -> List[TrialOutcome]:
        return [o for o in self.outcomes if o.status is TrialStatus.FOUND]

    def summary(self) -> Dict:
        """Deterministic batch statistics (no timing)"""
        histogram = self.histogram
        found = self.found
        first_min = None
        if histogram.min_length is not None:
            first_min = next(o.index for o in found if o.record.length == histogram.min_length)
        return {
            'matrix_id': self.matrix_id,
            'init_k': self.init_k,
            'trials_attempted': histogram.trials_attempted,
            'trials_discarded': histogram.trials_discarded,
            'trials_errored': histogram.trials_errored,
            'errored_trials': self.errored_indices,
            'instantons_found': len(found),
            'min_length': histogram.min_length,
            'first_min_trial': first_min,
            'mean_isa_steps': float(np.mean([o.isa_steps for o in found])) if found else None,
            'mean_basp_calls': float(np.mean([o.record.basp_calls for o in found])) if found else None,
            'histogram': {str(length): count for length, count in histogram.bins.items()}
        }

    def timing(self) -> Dict:
        found = self.found
        if not found:
            return {'mean_isa_seconds': None, 'mean_basp_seconds': None}
        seconds = sum(o.seconds for o in found)
        calls = sum(o.record.basp_calls for o in found)
        return {
            'mean_isa_seconds': seconds / len(found),
            'mean_basp_seconds': seconds / calls if calls else None
        }


def trial_seed(base_seed: int, index: int) -> int:
    seed = base_seed + index
    if not 0 <= seed < MAX_SEED:
        raise ConfigError(f"trial seed {seed} leaves the 64-bit unsigned range")
    return seed


def build_matrix(rows: int, cols: int, seed: int) -> np.ndarray:
    """Gaussian matrix with orthonormalized rows"""
    return orthonormalize_rows(gaussian_matrix(rows, cols, seed))


def resolve_matrix(config: ExperimentConfig) -> Tuple[np.ndarray, bool]:
    """The batch matrix, and whether it was generated rather than loaded"""
    if config.matrix_path:
        logger.info(f"Loading matrix from {config.matrix_path}")
        return DataStore.load_matrix(config.matrix_path), False
    logger.info(f"Generating {config.rows}x{config.cols} matrix with seed {config.matrix_seed}")
    return build_matrix(config.rows, config.cols, config.matrix_seed), True


def run_trial(F: np.ndarray, index: int, seed: int, init_k: int, tolerances: Tolerances,
              selection: str = 'first', matrix_id: Optional[str] = None,
              workers: int = 1) -> TrialOutcome:
    """One ISA run from a random init_k-sparse start"""
    start = time.perf_counter()
    try:
        e0 = random_init(F.shape[1], init_k, seed)
        record = isa_run(F, e0, tolerances=tolerances, seed=seed, init_k=init_k,
                         selection=selection, workers=workers, matrix_id=matrix_id)
    except InitNotFailingError:
        logger.info(f"Trial {index} (seed {seed}): BasP decodes the initialization, discarded")
        return TrialOutcome(index=index, seed=seed, status=TrialStatus.DISCARDED,
                            seconds=time.perf_counter() - start)
    except InstantonSearchError as e:
        logger.error(f"Trial {index} (seed {seed}) failed: {e.kind}: {e}")
        return TrialOutcome(index=index, seed=seed, status=TrialStatus.ERRORED, error=e.to_dict(),
                            seconds=time.perf_counter() - start)

    logger.debug(f"Trial {index} (seed {seed}): instanton of length {record.length}")
    return TrialOutcome(index=index, seed=seed, status=TrialStatus.FOUND, record=record,
                        seconds=time.perf_counter() - start)


# Per-process state for pool workers; the matrix is shipped once per process
_worker_state: Dict = {}


def _init_worker(F: np.ndarray, params: Dict):
    _worker_state['F'] = F
    _worker_state['params'] = params


def _run_in_worker(job: Tuple[int, int]) -> TrialOutcome:
    index, seed = job
    return run_trial(_worker_state['F'], index, seed, **_worker_state['params'])


def sample(config: ExperimentConfig, F: Optional[np.ndarray] = None) -> BatchResult:
    """Run config.trials ISA trials and aggregate them"""
    if F is None:
        F, _ = resolve_matrix(config)
    rows, cols = F.shape
    init_k = config.resolved_init_k(rows)
    if init_k > cols:
        raise ConfigError(f"init_k ({init_k}) cannot exceed cols ({cols})")

    matrix_id = DataStore.matrix_hash(F)
    jobs = [(index, trial_seed(config.base_seed, index)) for index in range(config.trials)]
    params = {
        'init_k': init_k,
        'tolerances': config.tolerances,
        'selection': config.selection,
        'matrix_id': matrix_id
    }

    logger.info(f"Sampling {config.trials} trials on {rows}x{cols} matrix "
                f"(init_k={init_k}, base_seed={config.base_seed}, workers={config.workers})")
    start = time.perf_counter()
    if config.workers == 1:
        outcomes = [run_trial(F, index, seed, **params) for index, seed in jobs]
    else:
        chunksize = max(1, len(jobs) // (config.workers * 4))
        with ProcessPoolExecutor(max_workers=config.workers, initializer=_init_worker,
                                 initargs=(F, params)) as pool:
            outcomes = list(pool.map(_run_in_worker, jobs, chunksize=chunksize))
    outcomes.sort(key=lambda outcome: outcome.index)
    elapsed = time.perf_counter() - start

    result = BatchResult(histogram=Histogram.from_outcomes(outcomes), outcomes=outcomes,
                         matrix_id=matrix_id, init_k=init_k)
    histogram = result.histogram
    if not histogram.reconciles:
        logger.warning(f"Trial accounting does not add up: {histogram}")
    logger.info(f"Batch done in {elapsed:.2f}s: {sum(histogram.bins.values())} instantons, "
                f"{histogram.trials_discarded} discarded, {histogram.trials_errored} errored, "
                f"min length {histogram.min_length}")
    return result


def write_outputs(result: BatchResult, config: ExperimentConfig, F: np.ndarray,
                  write_matrix: bool = False) -> str:
    """histogram.csv, summary.json, records/ and optionally matrix.txt under output_dir"""
    out = config.output_dir
    histogram_exporter.write_csv(result.histogram.bins, os.path.join(out, 'histogram.csv'))
    DataStore.save_json(result.summary(), os.path.join(out, 'summary.json'))

    if config.write_records:
        for outcome in result.found:
            path = os.path.join(out, 'records', f"trial_{outcome.index:06d}.json")
            DataStore.save_record(outcome.record, path, F.shape, config.tolerances, config.selection)
    if write_matrix:
        DataStore.save_matrix(F, os.path.join(out, 'matrix.txt'))

    logger.info(f"Batch outputs written to {out}")
    return out


@dataclass
class CheckResult:
    name: str
    passed: Optional[bool]
    detail: str = ''

    @property
    def label(self) -> str:
        if self.passed is None:
            return 'skipped'
        return 'pass' if self.passed else 'FAIL'


def certify_record(F: np.ndarray, record: InstantonRecord, tolerances: Tolerances,
                   selection: str = 'first', oracle_budget: int = ORACLE_BUDGET) -> List[CheckResult]:
    """
    Re-establish an instanton record against its matrix from scratch.

    A hash mismatch raises; every other check is reported by name.
    """
    matrix_id = DataStore.matrix_hash(F)
    if record.matrix_id != matrix_id:
        raise HashMismatchError(
            f"record was produced for {record.matrix_id}, loaded matrix is {matrix_id}",
            {'record': record.matrix_id, 'matrix': matrix_id}
        )
    checks = [CheckResult('matrix-hash', True, matrix_id)]

    length = l0_norm(record.instanton, tolerances.tau)
    consistent = (length == record.length == len(record.leave_one_out_verdicts)
                  and bool(record.trace.steps) and record.trace.steps[-1].l0 == length)
    checks.append(CheckResult('length-consistent', consistent,
                              f"recorded {record.length}, measured {length}"))

    e0 = record.trace.steps[0].e if record.trace.steps else None
    if record.trace.seed is not None and record.trace.init_k is not None and e0 is not None:
        replayed = random_init(F.shape[1], record.trace.init_k, record.trace.seed)
        checks.append(CheckResult('init-replay', bool(np.array_equal(replayed, e0)),
                                  f"seed {record.trace.seed}, init_k {record.trace.init_k}"))
    else:
        checks.append(CheckResult('init-replay', None, 'no seed recorded'))

    if e0 is not None:
        try:
            rerun = isa_run(F, e0, tolerances=tolerances, seed=record.trace.seed,
                            init_k=record.trace.init_k, selection=selection)
            drift = float(np.max(np.abs(rerun.instanton - record.instanton)))
            checks.append(CheckResult('isa-replay', drift <= ISA_REPLAY_TOL, f"max drift {drift:.3e}"))
        except InstantonSearchError as e:
            checks.append(CheckResult('isa-replay', False, f"{e.kind}: {e}"))
    else:
        checks.append(CheckResult('isa-replay', False, 'empty trace'))

    report = verify_instanton(F, record.instanton, tolerances)
    checks.append(CheckResult('basp-fails-on-instanton', report.basp_verdict is Verdict.FAILURE,
                              f"deviation {report.deviation:.3e}"))
    for i, verdict in report.reduction_verdicts.items():
        checks.append(CheckResult(f"reduction-{i}-succeeds", verdict is Verdict.SUCCESS, verdict.value))

    confirmation = confirm_failure(F, record.instanton, tolerances, budget=oracle_budget)
    checks.append(CheckResult('dual-certificate-not-strict', not confirmation.certificate_strict,
                              f"max off-support {confirmation.diagnostics.get('max_off_support', 'n/a')}"))
    if confirmation.l0_checked:
        checks.append(CheckResult('l0-oracle', confirmation.basp_differs or confirmation.l0_alternative,
                                  f"alternative found: {confirmation.l0_alternative}"))
    else:
        checks.append(CheckResult('l0-oracle', None, f"enumeration exceeds budget {oracle_budget}"))

    return checks
