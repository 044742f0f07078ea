#!/usr/bin/env python3
"""
Ground-truth checks for Basis Pursuit at desk scale

- l0_oracle: brute-force sparsest solution of F d = y by support enumeration
- dual_certificate: l1 optimality certificate for a candidate d
- confirm_failure: cross-checks that a BasP failure is genuine and not solver noise
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from math import comb
from typing import Dict, Optional

import numpy as np
from scipy.optimize import linprog

from basp import basp_decode, threshold_support
from dense_linalg import as_matrix, as_vector
from errors import (
    CombinatorialBudgetExceededError,
    DimensionMismatchError,
    InvalidKError,
    RankDeficientSupportError,
)
from settings import (
    DEFAULT_TOLERANCES,
    L0_ORACLE_MAX_SUPPORTS,
    ORACLE_RESIDUAL_TOL,
    ORACLE_STRICT_MARGIN,
    Tolerances,
)

logger = logging.getLogger(__name__)


class OracleKind(Enum):
    L0_SPARSEST = "l0-sparsest"
    DUAL_CERTIFICATE = "dual-certificate"


@dataclass
class OracleVerdict:
    kind: OracleKind
    value: np.ndarray
    strict: bool = False
    supporting: Dict = field(default_factory=dict)


@dataclass
class FailureConfirmation:
    """Evidence that BasP genuinely fails on a vector"""
    certificate_strict: bool
    basp_differs: bool
    l0_checked: bool
    l0_alternative: bool
    diagnostics: Dict = field(default_factory=dict)

    @property
    def confirmed(self) -> bool:
        return not self.certificate_strict and (self.basp_differs or self.l0_alternative)


def support_count(m: int, k_max: int) -> int:
    """Number of supports of size 1..k_max out of m columns"""
    return sum(comb(m, k) for k in range(1, min(k_max, m) + 1))


def l0_oracle(F, y_tilde, k_max: int,
              budget: int = L0_ORACLE_MAX_SUPPORTS) -> Optional[OracleVerdict]:
    """
    Sparsest d with F d = y_tilde among supports of size at most k_max.

    Supports are enumerated by size, lexicographically within a size; the
    first exact least-squares fit wins. Returns None if nothing fits.
    """
    F = as_matrix(F)
    y_tilde = np.asarray(y_tilde, dtype=np.float64)
    p, m = F.shape
    if y_tilde.shape != (p,):
        raise DimensionMismatchError(f"measurements of shape {y_tilde.shape} do not match {p} rows")
    if k_max < 0:
        raise InvalidKError(f"k_max must be non-negative, got {k_max}")

    if np.max(np.abs(y_tilde)) <= ORACLE_RESIDUAL_TOL:
        return OracleVerdict(kind=OracleKind.L0_SPARSEST, value=np.zeros(m),
                             supporting={'k': 0, 'enumerated': 0, 'residual': float(np.max(np.abs(y_tilde))),
                                         'unique': True})

    total = support_count(m, k_max)
    if total > budget:
        raise CombinatorialBudgetExceededError(
            f"{total} supports up to size {k_max} exceed the budget of {budget}",
            {'supports': total, 'budget': budget, 'cols': m, 'k_max': k_max}
        )

    enumerated = 0
    for k in range(1, min(k_max, m) + 1):
        found = None
        fits = 0
        for support in combinations(range(m), k):
            enumerated += 1
            columns = F[:, support]
            x = np.linalg.lstsq(columns, y_tilde, rcond=None)[0]
            residual = float(np.max(np.abs(columns @ x - y_tilde)))
            if residual > ORACLE_RESIDUAL_TOL:
                continue
            fits += 1
            if found is None:
                found = (support, x, residual)

        if found is not None:
            support, x, residual = found
            d = np.zeros(m)
            d[list(support)] = x
            logger.debug(f"l0 oracle: fit at k={k} on support {list(support)} ({fits} fitting supports)")
            return OracleVerdict(kind=OracleKind.L0_SPARSEST, value=d,
                                 supporting={'k': k, 'enumerated': enumerated, 'residual': residual,
                                             'support': list(support), 'unique': fits == 1})

    logger.debug(f"l0 oracle: no support up to size {k_max} fits ({enumerated} enumerated)")
    return None


def _optimal_certificate(F_S: np.ndarray, F_off: np.ndarray, signs: np.ndarray) -> Optional[np.ndarray]:
    """w minimising max |F_off^T w| subject to F_S^T w = signs, via HiGHS"""
    p = F_S.shape[0]
    n_off = F_off.shape[1]
    # variables (w, t); minimise t
    c = np.zeros(p + 1)
    c[-1] = 1.0
    ones = np.ones((n_off, 1))
    A_ub = np.vstack([np.hstack([F_off.T, -ones]), np.hstack([-F_off.T, -ones])])
    b_ub = np.zeros(2 * n_off)
    A_eq = np.hstack([F_S.T, np.zeros((F_S.shape[1], 1))])
    bounds = [(None, None)] * p + [(0, None)]

    result = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=signs, bounds=bounds, method='highs')
    if not result.success:
        logger.warning(f"Optimal certificate LP did not solve: {result.message}")
        return None

    w = result.x[:p]
    # back onto the equality set exactly
    correction = np.linalg.lstsq(F_S.T, signs - F_S.T @ w, rcond=None)[0]
    return w + correction


def dual_certificate(F, d, tau: Optional[float] = None) -> Optional[OracleVerdict]:
    """
    l1 optimality certificate w for d: F_S^T w = sign(d_S) on the support S
    and |F^T w| <= 1 off it. Strict (< 1 - margin off the support) together with
    full column rank of F_S means d is the unique l1 minimizer for F d.

    Returns None when no w satisfies the support equations.
    """
    F = as_matrix(F)
    d = as_vector(d)
    tau = DEFAULT_TOLERANCES.tau if tau is None else tau
    p, m = F.shape
    if d.shape[0] != m:
        raise DimensionMismatchError(f"vector of length {d.shape[0]} does not match {m} columns")

    support = threshold_support(d, tau)
    if support.size == 0:
        raise RankDeficientSupportError("certificate needs a non-empty support")
    F_S = F[:, support]
    rank = int(np.linalg.matrix_rank(F_S))
    if rank < support.size:
        raise RankDeficientSupportError(
            f"support submatrix has rank {rank} < {support.size} columns",
            {'rank': rank, 'support': support.tolist()}
        )

    signs = np.sign(d[support])
    off = np.setdiff1d(np.arange(m), support)
    F_off = F[:, off]

    w = np.linalg.lstsq(F_S.T, signs, rcond=None)[0]
    residual = float(np.max(np.abs(F_S.T @ w - signs)))
    if residual > ORACLE_RESIDUAL_TOL:
        logger.debug(f"No certificate: support equations residual {residual:.3e}")
        return None

    def off_max(vec):
        return float(np.max(np.abs(F_off.T @ vec))) if off.size else 0.0

    max_off = off_max(w)
    method = 'least-squares'
    if max_off >= 1 - ORACLE_STRICT_MARGIN and off.size:
        refined = _optimal_certificate(F_S, F_off, signs)
        if refined is not None:
            refined_residual = float(np.max(np.abs(F_S.T @ refined - signs)))
            refined_max = off_max(refined)
            if refined_residual <= ORACLE_RESIDUAL_TOL and refined_max < max_off:
                w, max_off, residual, method = refined, refined_max, refined_residual, 'optimal'

    strict = max_off < 1 - ORACLE_STRICT_MARGIN
    if not strict and abs(1 - max_off) < 1e-4:
        logger.warning(f"Boundary certificate: max off-support correlation {max_off:.12g}")

    return OracleVerdict(kind=OracleKind.DUAL_CERTIFICATE, value=w, strict=strict,
                         supporting={'max_off_support': max_off, 'residual': residual,
                                     'support': support.tolist(), 'method': method})


def confirm_failure(F, e, tolerances: Tolerances = DEFAULT_TOLERANCES,
                    budget: int = L0_ORACLE_MAX_SUPPORTS) -> FailureConfirmation:
    """
    Check that BasP failing on e is real: no strict certificate exists, and
    either the BasP output differs from e or a sparser-or-equal vector with no
    larger l1 norm explains the same measurements.
    """
    F = as_matrix(F)
    e = as_vector(e)
    diagnostics = {}

    try:
        certificate = dual_certificate(F, e, tolerances.tau)
        certificate_strict = bool(certificate is not None and certificate.strict)
        if certificate is not None:
            diagnostics['max_off_support'] = certificate.supporting['max_off_support']
    except RankDeficientSupportError as err:
        # a dependent support can never be uniquely recovered
        certificate_strict = False
        diagnostics['certificate'] = err.kind

    decoded = basp_decode(F, e, tolerances=tolerances)
    basp_differs = decoded.failed
    diagnostics['deviation'] = decoded.deviation

    k = int(threshold_support(e, tolerances.tau).size)
    l0_checked = support_count(F.shape[1], k) <= budget
    l0_alternative = False
    if l0_checked:
        verdict = l0_oracle(F, F @ e, k, budget=budget)
        if verdict is not None:
            d = verdict.value
            e_l1 = float(np.sum(np.abs(e)))
            different = float(np.max(np.abs(d - e))) > tolerances.eps_fail
            l0_alternative = different and float(np.sum(np.abs(d))) <= e_l1 + tolerances.gap_tol * (1 + e_l1)
            diagnostics['l0_oracle_k'] = verdict.supporting['k']
            diagnostics['l0_oracle_unique'] = verdict.supporting['unique']
    else:
        diagnostics['l0_oracle'] = 'skipped'

    return FailureConfirmation(certificate_strict=certificate_strict, basp_differs=basp_differs,
                               l0_checked=l0_checked, l0_alternative=l0_alternative,
                               diagnostics=diagnostics)
