#!/usr/bin/env python3
"""
Dense linear programming in standard form

    minimize    c @ x
    subject to  A @ x == b,  x >= 0

Solved with the homogeneous self-dual primal-dual interior-point method and
Mehrotra's predictor-corrector, using dense normal equations. The homogeneous
embedding lets the same iteration certify infeasibility and unboundedness.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from errors import ConfigError, MalformedLPError
from settings import FEAS_TOL, GAP_TOL, MAX_ITER, ORTHO_RANK_THRESHOLD

logger = logging.getLogger(__name__)

# Maximal step fraction toward the boundary and corrector centering cap
STEP_FRACTION = 0.99995
CENTERING_CAP = 0.1

# Normal-equation solvers, tried in order when factorization fails
SOLVER_MODES = ('cholesky', 'sym_pos', 'general', 'lstsq')


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"
    NUMERICAL_BREAKDOWN = "numerical-breakdown"


@dataclass
class StandardFormLP:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        self.A = np.asarray(self.A, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)

        if self.c.ndim != 1 or self.c.shape[0] < 1:
            raise MalformedLPError(f"cost must be a non-empty vector, got shape {self.c.shape}")
        if self.b.ndim != 1:
            raise MalformedLPError(f"right-hand side must be a vector, got shape {self.b.shape}")
        if self.A.ndim != 2 or self.A.shape != (self.b.shape[0], self.c.shape[0]):
            raise MalformedLPError(
                f"constraint matrix shape {self.A.shape} does not match "
                f"b ({self.b.shape[0]}) and c ({self.c.shape[0]})"
            )
        for name in ('c', 'A', 'b'):
            if not np.all(np.isfinite(getattr(self, name))):
                raise MalformedLPError(f"{name} contains non-finite entries")

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]


@dataclass
class LpSolution:
    status: LpStatus
    x: Optional[np.ndarray]
    objective: float
    dual: Optional[np.ndarray]
    iterations: int
    primal_residual: float
    duality_gap: float
    dual_residual: float = float('nan')
    message: str = ""
    removed_rows: List[int] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def summary(self) -> Dict:
        """Diagnostics without the (large) primal and dual vectors"""
        return {
            'status': self.status.value,
            'objective': float(self.objective),
            'iterations': self.iterations,
            'primal_residual': float(self.primal_residual),
            'dual_residual': float(self.dual_residual),
            'duality_gap': float(self.duality_gap),
            'removed_rows': list(self.removed_rows),
            'message': self.message
        }


def presolve(lp: StandardFormLP, feas_tol: float) -> Tuple[np.ndarray, List[int], Optional[str]]:
    """
    Drop numerically dependent rows.

    Returns the kept row indices (ascending), the removed ones, and a reason
    string when a dependent row contradicts the rows it depends on.
    """
    if lp.n_rows == 0:
        return np.arange(0), [], None

    _, R, P = scipy.linalg.qr(lp.A.T, mode='economic', pivoting=True)
    pivots = np.abs(np.diag(R))
    if pivots.size == 0 or pivots[0] == 0:
        rank = 0
    else:
        rank = int(np.sum(pivots >= ORTHO_RANK_THRESHOLD * pivots[0]))

    kept = np.sort(P[:rank])
    removed = sorted(int(i) for i in P[rank:])
    if not removed:
        return kept, [], None

    scale = feas_tol * (1 + np.max(np.abs(lp.b)))
    if rank == 0:
        bad = [i for i in removed if abs(lp.b[i]) > scale]
    else:
        A_kept, b_kept = lp.A[kept], lp.b[kept]
        A_dep, b_dep = lp.A[removed], lp.b[removed]
        weights = scipy.linalg.lstsq(A_kept.T, A_dep.T)[0]
        predicted = weights.T @ b_kept
        bad = [removed[j] for j in np.flatnonzero(np.abs(predicted - b_dep) > scale)]

    logger.debug(f"Presolve removed {len(removed)} dependent rows: {removed}")
    if bad:
        return kept, removed, f"dependent rows {bad} are inconsistent with the remaining constraints"
    return kept, removed, None


def _get_solver(M: np.ndarray, mode: str) -> Optional[Callable]:
    """Solver for M r = rhs in the given mode; None if M cannot be factorized"""
    try:
        if mode == 'cholesky':
            factor = scipy.linalg.cho_factor(M)
            return lambda r: scipy.linalg.cho_solve(factor, r)
        if mode == 'sym_pos':
            return lambda r: scipy.linalg.solve(M, r, assume_a='pos')
        if mode == 'general':
            return lambda r: scipy.linalg.solve(M, r)
        return lambda r: scipy.linalg.lstsq(M, r)[0]
    except KeyboardInterrupt:
        raise
    except Exception:
        return None


def _sym_solve(Dinv, A, r1, r2, solve):
    """Reduce the Newton system to normal equations and back-substitute"""
    r = r2 + A @ (Dinv * r1)
    v = solve(r)
    u = Dinv * (A.T @ v - r1)
    return u, v


def _get_step(x, d_x, z, d_z, tau, d_tau, kappa, d_kappa, alpha0):
    """Largest step keeping x, z, tau, kappa non-negative, scaled by alpha0"""
    i_x = d_x < 0
    i_z = d_z < 0
    alpha_x = alpha0 * np.min(x[i_x] / -d_x[i_x]) if np.any(i_x) else 1
    alpha_tau = alpha0 * tau / -d_tau if d_tau < 0 else 1
    alpha_z = alpha0 * np.min(z[i_z] / -d_z[i_z]) if np.any(i_z) else 1
    alpha_kappa = alpha0 * kappa / -d_kappa if d_kappa < 0 else 1
    return min(1, alpha_x, alpha_tau, alpha_z, alpha_kappa)


def _get_delta(A, b, c, x, y, z, tau, kappa, state):
    """Predictor-corrector search direction of the homogeneous algorithm"""
    n_x = len(x)
    r_P = b * tau - A @ x
    r_D = c * tau - A.T @ y - z
    r_G = c @ x - b @ y + kappa
    mu = (x @ z + tau * kappa) / (n_x + 1)

    Dinv = x / z
    M = A @ (Dinv.reshape(-1, 1) * A.T)
    solve = _get_solver(M, state['mode'])

    gamma = 0.0
    alpha, d_x, d_z, d_tau, d_kappa = 0, 0, 0, 0, 0
    for correction in range(2):
        eta = 1 - gamma
        rhatp = eta * r_P
        rhatd = eta * r_D
        rhatg = eta * r_G
        rhatxs = gamma * mu - x * z
        rhattk = gamma * mu - tau * kappa
        if correction == 1:
            rhatxs = rhatxs - d_x * d_z
            rhattk = rhattk - d_tau * d_kappa

        while True:
            try:
                if solve is None:
                    raise np.linalg.LinAlgError(f"{state['mode']} factorization failed")
                p, q = _sym_solve(Dinv, A, c, b, solve)
                u, v = _sym_solve(Dinv, A, rhatd - (1 / x) * rhatxs, rhatp, solve)
                if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))
                        and np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                    raise np.linalg.LinAlgError("non-finite search direction")
                break
            except (np.linalg.LinAlgError, ValueError) as e:
                position = SOLVER_MODES.index(state['mode'])
                if position + 1 >= len(SOLVER_MODES):
                    raise
                state['mode'] = SOLVER_MODES[position + 1]
                logger.debug(f"Normal equations failed ({e}); switching to {state['mode']}")
                solve = _get_solver(M, state['mode'])

        d_tau = ((rhatg + 1 / tau * rhattk - (-c @ u + b @ v)) /
                 (1 / tau * kappa + (-c @ p + b @ q)))
        d_x = u + p * d_tau
        d_y = v + q * d_tau
        d_z = (1 / x) * (rhatxs - z * d_x)
        d_kappa = 1 / tau * (rhattk - kappa * d_tau)

        alpha = _get_step(x, d_x, z, d_z, tau, d_tau, kappa, d_kappa, 1)
        gamma = (1 - alpha) ** 2 * min(CENTERING_CAP, (1 - alpha))

    return d_x, d_y, d_z, d_tau, d_kappa


def _certificates(A, b, c, x, y, z, tau):
    """Absolute residuals of the de-homogenized iterate"""
    x_hat, y_hat, z_hat = x / tau, y / tau, z / tau
    objective = float(c @ x_hat)
    primal = float(np.max(np.abs(A @ x_hat - b))) if len(b) else 0.0
    dual = float(np.max(np.abs(A.T @ y_hat + z_hat - c)))
    gap = abs(objective - float(b @ y_hat))
    return objective, primal, dual, gap


def _ip_hsd(A, b, c, feas_tol, gap_tol, max_iter):
    """Run the interior-point iteration on a presolved, full-row-rank problem"""
    n, k = len(c), len(b)
    x, y, z, tau, kappa = np.ones(n), np.zeros(k), np.ones(n), 1.0, 1.0

    # residual norms at the starting point, for the relative stopping tests
    r_p0 = max(1.0, np.linalg.norm(b - A @ x))
    r_d0 = max(1.0, np.linalg.norm(c - z))
    r_g0 = max(1.0, abs(c @ x + kappa))
    mu0 = 1.0

    b_scale = 1 + (np.max(np.abs(b)) if k else 0.0)
    c_scale = 1 + np.max(np.abs(c))
    state = {'mode': SOLVER_MODES[0]}
    iteration = 0

    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        while True:
            objective, primal, dual, gap = _certificates(A, b, c, x, y, z, tau)
            if (primal <= feas_tol * b_scale and dual <= feas_tol * c_scale
                    and gap <= gap_tol * (1 + abs(objective))):
                return LpStatus.OPTIMAL, x / tau, y / tau, iteration, "converged"

            rho_p = np.linalg.norm(b * tau - A @ x) / r_p0
            rho_d = np.linalg.norm(c * tau - A.T @ y - z) / r_d0
            rho_g = abs(kappa + c @ x - b @ y) / r_g0
            rho_mu = (x @ z + tau * kappa) / (n + 1) / mu0
            inf1 = rho_p < feas_tol and rho_d < feas_tol and rho_g < feas_tol and tau < feas_tol * max(1, kappa)
            inf2 = rho_mu < feas_tol and tau < feas_tol * min(1, kappa)
            if inf1 or inf2:
                if b @ y > feas_tol:
                    return LpStatus.INFEASIBLE, None, y, iteration, "dual ray certifies primal infeasibility"
                return LpStatus.UNBOUNDED, None, None, iteration, "primal ray certifies unboundedness"

            if iteration >= max_iter:
                return LpStatus.ITERATION_LIMIT, None, None, iteration, f"no convergence in {max_iter} iterations"

            iteration += 1
            try:
                d_x, d_y, d_z, d_tau, d_kappa = _get_delta(A, b, c, x, y, z, tau, kappa, state)
                alpha = _get_step(x, d_x, z, d_z, tau, d_tau, kappa, d_kappa, STEP_FRACTION)
            except (np.linalg.LinAlgError, ValueError, ZeroDivisionError) as e:
                return LpStatus.NUMERICAL_BREAKDOWN, None, None, iteration, f"factorization failed: {e}"

            x = x + alpha * d_x
            y = y + alpha * d_y
            z = z + alpha * d_z
            tau = tau + alpha * d_tau
            kappa = kappa + alpha * d_kappa

            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z)) and np.isfinite(tau)
                    and np.isfinite(kappa) and tau > 0):
                return LpStatus.NUMERICAL_BREAKDOWN, None, None, iteration, "iterate left the finite positive orthant"


def solve_lp(lp: StandardFormLP, feas_tol: float = FEAS_TOL, gap_tol: float = GAP_TOL,
             max_iter: int = MAX_ITER) -> LpSolution:
    """Solve a standard-form LP; non-optimal outcomes are statuses, not errors"""
    if not isinstance(lp, StandardFormLP):
        raise MalformedLPError(f"expected StandardFormLP, got {type(lp).__name__}")
    for name, value in (('feas_tol', feas_tol), ('gap_tol', gap_tol)):
        if not (0 < value <= 1e-2):
            raise ConfigError(f"{name} must lie in (0, 1e-2], got {value}")
    if max_iter < 1:
        raise ConfigError(f"max_iter must be at least 1, got {max_iter}")

    kept, removed, reason = presolve(lp, feas_tol)
    if reason is not None:
        logger.debug(f"LP infeasible at presolve: {reason}")
        return LpSolution(LpStatus.INFEASIBLE, None, float('nan'), None, 0,
                          float('nan'), float('nan'), message=reason, removed_rows=removed)

    A, b, c = lp.A[kept], lp.b[kept], lp.c

    if len(kept) == 0:
        # no constraints left: x = 0 is optimal unless some cost is negative
        negative = np.flatnonzero(c < 0)
        if negative.size:
            return LpSolution(LpStatus.UNBOUNDED, None, float('-inf'), None, 0,
                              float('nan'), float('nan'),
                              message=f"variable {int(negative[0])} has negative cost and no constraint",
                              removed_rows=removed)
        x = np.zeros(lp.n_vars)
        residual = float(np.max(np.abs(lp.b))) if lp.n_rows else 0.0
        return LpSolution(LpStatus.OPTIMAL, x, 0.0, np.zeros(lp.n_rows), 0, residual, 0.0,
                          dual_residual=float(np.max(np.abs(np.minimum(c, 0)))),
                          message="no constraints after presolve", removed_rows=removed)

    status, x, y, iterations, message = _ip_hsd(A, b, c, feas_tol, gap_tol, max_iter)
    if status is not LpStatus.OPTIMAL:
        logger.debug(f"LP ended with status {status.value} after {iterations} iterations: {message}")
        return LpSolution(status, None, float('nan'), None, iterations,
                          float('nan'), float('nan'), message=message, removed_rows=removed)

    dual = np.zeros(lp.n_rows)
    dual[kept] = y
    objective = float(c @ x)
    primal_residual = float(np.max(np.abs(lp.A @ x - lp.b)))
    z = c - A.T @ y
    dual_residual = float(np.max(np.abs(np.minimum(z, 0))))
    duality_gap = abs(objective - float(lp.b @ dual))

    return LpSolution(LpStatus.OPTIMAL, x, objective, dual, iterations,
                      primal_residual, duality_gap, dual_residual=dual_residual,
                      message=message, removed_rows=removed)
