#!/usr/bin/env python3
"""
Instanton search for Basis Pursuit

Starting from a dense error vector that BasP fails on, alternate BasP decoding
with the median operator to shrink the support while keeping the failure,
until every single-entry removal decodes correctly. The resulting vector is an
instanton: a minimal failing configuration of the measurement matrix.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Union

import numpy as np

from basp import BaspResult, Verdict, basp_decode, l0_norm, threshold_support
from dense_linalg import Stream, as_matrix, as_vector, random_permutation, rng_from_seed, standard_normal
from errors import (
    ConfigError,
    ContractViolationError,
    InitNotFailingError,
    InvalidKError,
    StepBudgetExceededError,
    ZeroVectorError,
)
from settings import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)


class StepCase(Enum):
    MEDIAN_STEP = "median-step"
    LEAVE_ONE_OUT_STEP = "leave-one-out-step"
    HALT = "halt"


@dataclass
class MedianResult:
    median: np.ndarray
    t: int
    support: np.ndarray


@dataclass
class TraceStep:
    """One ISA iterate; case records what the step did with it"""
    e: np.ndarray
    l0: int
    case: StepCase
    basp_verdict: Verdict


@dataclass
class IsaTrace:
    steps: List[TraceStep] = field(default_factory=list)
    seed: Optional[int] = None
    init_k: Optional[int] = None

    @property
    def l0_sequence(self) -> List[int]:
        return [step.l0 for step in self.steps]


@dataclass
class InstantonRecord:
    instanton: np.ndarray
    length: int
    trace: IsaTrace
    leave_one_out_verdicts: List[bool]
    matrix_id: Optional[str] = None
    basp_calls: int = 0

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.instanton)


@dataclass
class NextVector:
    e: np.ndarray
    case: StepCase
    decoded: BaspResult
    removed_index: Optional[int] = None
    basp_calls: int = 1


@dataclass
class Instanton:
    e: np.ndarray
    leave_one_out_verdicts: List[bool]
    basp_calls: int = 0


@dataclass
class CertificationReport:
    support: List[int]
    basp_verdict: Verdict
    reduction_verdicts: Dict[int, Verdict]
    deviation: float

    @property
    def failing_reductions(self) -> List[int]:
        return [i for i, verdict in self.reduction_verdicts.items() if verdict is Verdict.FAILURE]

    @property
    def certified(self) -> bool:
        return self.basp_verdict is Verdict.FAILURE and not self.failing_reductions

    def to_dict(self) -> Dict:
        return {
            'certified': self.certified,
            'support': list(self.support),
            'basp_verdict': self.basp_verdict.value,
            'deviation': self.deviation,
            'reduction_verdicts': [[i, v.value] for i, v in self.reduction_verdicts.items()],
            'failing_reductions': self.failing_reductions
        }


def median(v) -> MedianResult:
    """
    Restriction of v to its fewest largest-magnitude entries whose absolute
    sum reaches half of ||v||_1. Magnitude ties go to the lower index.
    """
    v = np.asarray(v, dtype=np.float64)
    magnitudes = np.abs(v)
    total = float(np.sum(magnitudes))
    if total == 0:
        raise ZeroVectorError("median of the zero vector is undefined")

    order = np.lexsort((np.arange(v.size), -magnitudes))
    partial = np.cumsum(magnitudes[order])
    reached = np.flatnonzero(partial >= total / 2)
    t = int(reached[0]) + 1 if reached.size else v.size

    support = np.sort(order[:t])
    result = np.zeros_like(v)
    result[support] = v[support]
    return MedianResult(median=result, t=t, support=support)


def random_init(m: int, k: int, seed: int) -> np.ndarray:
    """k-sparse vector: uniform support without replacement, standard normal values"""
    if not (1 <= k <= m):
        raise InvalidKError(f"need 1 <= k <= m, got k={k}, m={m}")
    rng = rng_from_seed(seed, Stream.INIT)
    support = random_permutation(rng, m)[:k]
    e = np.zeros(m)
    e[support] = standard_normal(rng, k)
    return e


def _reduction(e: np.ndarray, index: int) -> np.ndarray:
    r = e.copy()
    r[index] = 0.0
    return r


def _decode_reductions(F, e_hat, order, tolerances, workers):
    """
    Decode single-removal reductions in the given order.

    Sequentially this stops at the first failure; with workers > 1 every
    reduction is decoded and the first failure in order is reported, which
    gives the same answer. The returned call count is always the sequential
    one, so records do not depend on the worker count.
    """
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: basp_decode(F, _reduction(e_hat, i), tolerances=tolerances), order))
        decoded = dict(zip(order, results))
        for position, i in enumerate(order):
            if decoded[i].failed:
                return decoded, i, position + 1
        return decoded, None, len(order)

    decoded = {}
    for i in order:
        decoded[i] = basp_decode(F, _reduction(e_hat, i), tolerances=tolerances)
        if decoded[i].failed:
            return decoded, i, len(decoded)
    return decoded, None, len(decoded)


def isa_step(F, e_prev, tolerances: Tolerances = DEFAULT_TOLERANCES,
             decoded: Optional[BaspResult] = None, selection: str = 'first',
             rng: Optional[np.random.Generator] = None,
             workers: int = 1) -> Union[NextVector, Instanton]:
    """
    One ISA iteration from a vector BasP fails on.

    Median of e_prev - d; a strictly sparser median becomes the next iterate.
    A median of equal sparsity is an instanton if every single-removal
    reduction decodes, otherwise the first failing reduction continues.
    """
    if selection not in ('first', 'random'):
        raise ConfigError(f"selection must be 'first' or 'random', got {selection!r}")
    if selection == 'random' and rng is None:
        raise ConfigError("random selection needs a generator")
    F = as_matrix(F)
    e_prev = as_vector(e_prev)
    if decoded is None:
        decoded = basp_decode(F, e_prev, tolerances=tolerances)
    if not decoded.failed:
        raise ContractViolationError("isa_step requires a vector BasP fails on")

    diff = e_prev - decoded.d
    diff[np.abs(diff) <= tolerances.tau] = 0.0
    try:
        e_hat = median(diff).median
    except ZeroVectorError:
        raise ContractViolationError(
            "BasP output matches the input within tau although the verdict is failure",
            {'deviation': decoded.deviation, 'tau': tolerances.tau}
        )

    l0_prev = l0_norm(e_prev, tolerances.tau)
    l0_hat = l0_norm(e_hat, tolerances.tau)

    if l0_hat > l0_prev:
        logger.error(f"Median support grew from {l0_prev} to {l0_hat}; check tolerances")
        raise ContractViolationError(
            f"median l0 {l0_hat} exceeds iterate l0 {l0_prev}",
            {'l0_prev': l0_prev, 'l0_hat': l0_hat, 'tau': tolerances.tau}
        )

    next_decoded = basp_decode(F, e_hat, tolerances=tolerances)
    if not next_decoded.failed:
        logger.error(f"BasP decoded the median of a null-space vector (l0={l0_hat})")
        raise ContractViolationError(
            "BasP succeeded on the median of a null-space vector",
            {'l0': l0_hat, 'deviation': next_decoded.deviation}
        )

    if l0_hat < l0_prev:
        logger.debug(f"Median step: l0 {l0_prev} -> {l0_hat}")
        return NextVector(e=e_hat, case=StepCase.MEDIAN_STEP, decoded=next_decoded)

    order = [int(i) for i in threshold_support(e_hat, tolerances.tau)]
    if selection == 'random':
        order = [order[i] for i in random_permutation(rng, len(order))]

    decoded_reductions, failing, calls = _decode_reductions(F, e_hat, order, tolerances, workers)
    if failing is None:
        verdicts = [decoded_reductions[i].succeeded for i in sorted(decoded_reductions)]
        logger.debug(f"Instanton found with l0 = {l0_hat}")
        return Instanton(e=e_hat, leave_one_out_verdicts=verdicts, basp_calls=1 + calls)

    logger.debug(f"Leave-one-out step: removed index {failing}, l0 {l0_prev} -> {l0_hat - 1}")
    return NextVector(e=_reduction(e_hat, failing), case=StepCase.LEAVE_ONE_OUT_STEP,
                      decoded=decoded_reductions[failing], removed_index=failing,
                      basp_calls=1 + calls)


def isa_run(F, e0, max_steps: Optional[int] = None,
            tolerances: Tolerances = DEFAULT_TOLERANCES,
            seed: Optional[int] = None, init_k: Optional[int] = None,
            selection: str = 'first', workers: int = 1,
            matrix_id: Optional[str] = None) -> InstantonRecord:
    """Iterate isa_step from e0 until an instanton is certified"""
    F = as_matrix(F)
    e = as_vector(e0)
    l0_init = l0_norm(e, tolerances.tau)
    if max_steps is None:
        max_steps = l0_init
    if max_steps < l0_init:
        raise ConfigError(f"max_steps ({max_steps}) must be at least l0(e0) = {l0_init}")

    decoded = basp_decode(F, e, tolerances=tolerances)
    basp_calls = 1
    if not decoded.failed:
        raise InitNotFailingError(
            f"BasP decodes the initial vector (l0={l0_init}) correctly",
            {'l0': l0_init, 'deviation': decoded.deviation}
        )

    rng = rng_from_seed(seed if seed is not None else 0, Stream.SELECTION) if selection == 'random' else None
    trace = IsaTrace(seed=seed, init_k=init_k if init_k is not None else l0_init)

    for _ in range(max_steps):
        l0 = l0_norm(e, tolerances.tau)
        outcome = isa_step(F, e, tolerances, decoded=decoded, selection=selection, rng=rng, workers=workers)

        if isinstance(outcome, Instanton):
            basp_calls += outcome.basp_calls
            trace.steps.append(TraceStep(e=e, l0=l0, case=StepCase.HALT, basp_verdict=decoded.verdict))
            instanton = outcome.e
            return InstantonRecord(
                instanton=instanton,
                length=l0_norm(instanton, tolerances.tau),
                trace=trace,
                leave_one_out_verdicts=outcome.leave_one_out_verdicts,
                matrix_id=matrix_id,
                basp_calls=basp_calls
            )

        basp_calls += outcome.basp_calls
        trace.steps.append(TraceStep(e=e, l0=l0, case=outcome.case, basp_verdict=decoded.verdict))
        e, decoded = outcome.e, outcome.decoded

    raise StepBudgetExceededError(
        f"no instanton after {max_steps} steps",
        {'l0_sequence': trace.l0_sequence}
    )


def verify_instanton(F, e, tolerances: Tolerances = DEFAULT_TOLERANCES) -> CertificationReport:
    """Check the instanton definition directly: e fails, every single removal succeeds"""
    F = as_matrix(F)
    e = as_vector(e)
    support = [int(i) for i in threshold_support(e, tolerances.tau)]
    if not support:
        raise ZeroVectorError("an instanton needs at least one nonzero entry")

    decoded = basp_decode(F, e, tolerances=tolerances)
    reductions = {i: basp_decode(F, _reduction(e, i), tolerances=tolerances).verdict for i in support}
    return CertificationReport(support=support, basp_verdict=decoded.verdict,
                               reduction_verdicts=reductions, deviation=float(decoded.deviation))
