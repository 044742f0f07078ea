#!/usr/bin/env python3
"""
Basis Pursuit decoding

Recovers d = argmin ||d||_1 subject to F d = F e through the split-variable
LP (d = d+ - d-, both non-negative) and decides whether the decoder
reproduced the error vector it was given.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from dense_linalg import as_matrix, as_vector, matvec
from errors import ConfigError, DecodeFailedError, DimensionMismatchError
from lp_core import LpSolution, StandardFormLP, solve_lp
from settings import BASP_RESIDUAL_FACTOR, DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)


class Verdict(Enum):
    SUCCESS = "success"
    FAILURE = "failure"


@dataclass
class BaspResult:
    d: np.ndarray
    verdict: Verdict
    l1_norm: float
    deviation: Optional[float]
    lp_diag: Dict
    tie: bool = False

    @property
    def failed(self) -> bool:
        return self.verdict is Verdict.FAILURE

    @property
    def succeeded(self) -> bool:
        return self.verdict is Verdict.SUCCESS


def threshold_support(v, tau: float) -> np.ndarray:
    """Indices i with |v_i| > tau, ascending"""
    if tau < 0:
        raise ConfigError(f"support threshold must be non-negative, got {tau}")
    return np.flatnonzero(np.abs(np.asarray(v, dtype=np.float64)) > tau)


def l0_norm(v, tau: float) -> int:
    """Numerical l0 norm: size of the thresholded support"""
    return int(threshold_support(v, tau).size)


def encode_basp(F, y_tilde) -> StandardFormLP:
    """Standard-form LP with 2m variables (d+, d-) and one row per measurement"""
    F = as_matrix(F)
    y_tilde = np.asarray(y_tilde, dtype=np.float64)
    if y_tilde.ndim != 1 or y_tilde.shape[0] != F.shape[0]:
        raise DimensionMismatchError(
            f"measurements of shape {y_tilde.shape} do not match {F.shape[0]} matrix rows"
        )
    m = F.shape[1]
    return StandardFormLP(c=np.ones(2 * m), A=np.hstack([F, -F]), b=y_tilde)


def basp_solve(F, y_tilde, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Tuple[np.ndarray, LpSolution]:
    """The l1 minimizer for the given measurements, plus the LP solution behind it"""
    F = as_matrix(F)
    lp = encode_basp(F, y_tilde)
    solution = solve_lp(lp, tolerances.feas_tol, tolerances.gap_tol, tolerances.max_iter)
    if not solution.optimal:
        raise DecodeFailedError(
            f"BasP LP ended with status {solution.status.value}: {solution.message}",
            solution.summary()
        )

    m = F.shape[1]
    d = solution.x[:m] - solution.x[m:]

    residual = float(np.max(np.abs(F @ d - lp.b)))
    bound = BASP_RESIDUAL_FACTOR * (1 + float(np.max(np.abs(lp.b))))
    if residual > bound:
        raise DecodeFailedError(
            f"decoded vector violates the measurements (residual {residual:.3e} > {bound:.3e})",
            solution.summary()
        )
    return d, solution


def basp_decode(F, e, eps_fail: Optional[float] = None,
                tolerances: Tolerances = DEFAULT_TOLERANCES) -> BaspResult:
    """
    Decode the measurements of a known error vector e and judge the outcome.

    Success means ||d - e||_inf <= eps_fail. An alternate optimum with the
    same l1 norm as e is still a failure; such ties are flagged on the result.
    """
    F = as_matrix(F)
    e = as_vector(e)
    eps_fail = tolerances.eps_fail if eps_fail is None else eps_fail
    if not (0 < eps_fail <= 1e-2):
        raise ConfigError(f"eps_fail must lie in (0, 1e-2], got {eps_fail}")

    y_tilde = matvec(F, e)
    d, solution = basp_solve(F, y_tilde, tolerances)

    deviation = float(np.max(np.abs(d - e)))
    l1 = float(np.sum(np.abs(d)))
    e_l1 = float(np.sum(np.abs(e)))
    verdict = Verdict.SUCCESS if deviation <= eps_fail else Verdict.FAILURE

    slack = tolerances.gap_tol * (1 + e_l1)
    tie = verdict is Verdict.FAILURE and abs(l1 - e_l1) <= slack
    if tie:
        logger.info(f"BasP tie: ||d||_1 = {l1:.12g} matches ||e||_1 = {e_l1:.12g}; counted as failure")

    return BaspResult(d=d, verdict=verdict, l1_norm=l1, deviation=deviation,
                      lp_diag=solution.summary(), tie=tie)
