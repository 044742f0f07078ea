#!/usr/bin/env python3
"""
Dense real linear algebra for measurement matrices and error vectors

Matrices and vectors are plain float64 numpy arrays. Every random draw comes
from a counter-based Philox generator keyed by (seed, stream), so matrices,
null-space samples, initializations and selection orders never share
numbers even when their seeds are equal. Normals use the Box-Muller
transform over 53-bit uniforms taken directly from the raw Philox output,
which keeps streams independent of numpy's own sampler implementations.
"""

import logging
from enum import IntEnum

import numpy as np

from errors import (
    ConfigError,
    DegenerateSampleError,
    DimensionMismatchError,
    InvalidDimensionsError,
    RankDeficientError,
)
from settings import NULL_SPACE_RESIDUAL, NULL_SPACE_RETRIES, ORTHO_RANK_THRESHOLD

logger = logging.getLogger(__name__)

UNIT_53 = 2.0 ** -53


class Stream(IntEnum):
    """Independent random streams derived from one seed"""
    GENERAL = 0
    MATRIX = 1
    NULL_SPACE = 2
    INIT = 3
    SELECTION = 4


def rng_from_seed(seed: int, stream: Stream = Stream.GENERAL) -> np.random.Generator:
    """Deterministic generator for a 64-bit unsigned seed and a stream tag"""
    if seed < 0 or seed >= 2 ** 64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(sequence))


def uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform doubles in [0, 1) from the top 53 bits of raw 64-bit draws"""
    raw = np.asarray(rng.bit_generator.random_raw(size), dtype=np.uint64)
    return (raw >> np.uint64(11)).astype(np.float64) * UNIT_53


def box_muller(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Interleaved normal pairs r cos(theta), r sin(theta) from uniform pairs"""
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * u1.size)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z


def standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals in row-major order, two per pair of uniforms"""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    n = int(np.prod(shape))
    pairs = (n + 1) // 2
    u = uniform(rng, 2 * pairs)
    return box_muller(u[0::2], u[1::2])[:n].reshape(shape)


def random_permutation(rng: np.random.Generator, n: int) -> np.ndarray:
    """Permutation of range(n) by stable sort of uniform keys"""
    return np.argsort(uniform(rng, n), kind='stable')

def as_matrix(data) -> np.ndarray:
    """Validate and convert to a finite float64 matrix"""
    M = np.ascontiguousarray(data, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise InvalidDimensionsError(f"expected a non-empty 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidDimensionsError("matrix entries must be finite")
    return M


def as_vector(data) -> np.ndarray:
    """Validate and convert to a finite float64 vector"""
    v = np.ascontiguousarray(data, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 1:
        raise InvalidDimensionsError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidDimensionsError("vector entries must be finite")
    return v


def gaussian_matrix(rows: int, cols: int, seed: int) -> np.ndarray:
    """rows x cols matrix of i.i.d. standard normal entries"""
    if rows < 1 or cols < 1 or rows > cols:
        raise InvalidDimensionsError(
            f"need 1 <= rows <= cols, got rows={rows}, cols={cols}"
        )
    return standard_normal(rng_from_seed(seed, Stream.MATRIX), (rows, cols))


def orthonormalize_rows(M) -> np.ndarray:
    """
    Orthonormal basis of the row space of M, same shape as M.

    Householder QR of M^T; the rows of Q^T span the row space. Each row is
    signed so its first nonzero entry is positive.
    """
    M = as_matrix(M)
    rows, cols = M.shape
    if rows > cols:
        raise InvalidDimensionsError(f"rows ({rows}) exceed cols ({cols}); rows cannot be independent")

    Q, R = np.linalg.qr(M.T, mode='reduced')
    pivots = np.abs(np.diag(R))
    max_pivot = pivots.max()
    if max_pivot == 0 or pivots.min() < ORTHO_RANK_THRESHOLD * max_pivot:
        rank = int(np.sum(pivots >= ORTHO_RANK_THRESHOLD * max_pivot)) if max_pivot > 0 else 0
        raise RankDeficientError(
            f"numerical rank {rank} < {rows} rows",
            {'rank': rank, 'rows': rows, 'min_pivot': float(pivots.min()), 'max_pivot': float(max_pivot)}
        )

    Q = Q.T.copy()
    for i in range(rows):
        nonzero = np.flatnonzero(np.abs(Q[i]) > 1e-14)
        if nonzero.size and Q[i, nonzero[0]] < 0:
            Q[i] = -Q[i]
    return Q


def matvec(M, v) -> np.ndarray:
    """Standard matrix-vector product"""
    M = np.asarray(M, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or M.ndim != 2 or v.shape[0] != M.shape[1]:
        raise DimensionMismatchError(
            f"cannot multiply {M.shape} matrix by vector of shape {v.shape}"
        )
    return M @ v


def null_space_sample(F, seed: int) -> np.ndarray:
    """
    Random vector e with Fe = 0, for F with orthonormal rows.

    Projects a Gaussian vector v with e = v - F^T (F v). The projection is
    applied twice so the residual stays at rounding level.
    """
    F = as_matrix(F)
    rows, cols = F.shape
    if rows >= cols:
        raise InvalidDimensionsError(f"null space is trivial for a {rows}x{cols} matrix")

    rng = rng_from_seed(seed, Stream.NULL_SPACE)
    for attempt in range(NULL_SPACE_RETRIES):
        v = standard_normal(rng, cols)
        e = v - F.T @ (F @ v)
        e = e - F.T @ (F @ e)
        residual = np.max(np.abs(F @ e))
        norm = np.linalg.norm(e)
        if norm > 1e-12 * np.linalg.norm(v) and residual <= NULL_SPACE_RESIDUAL:
            return e
        logger.debug(f"Null-space sample {attempt + 1} rejected (norm={norm:.3e}, residual={residual:.3e})")

    raise DegenerateSampleError(
        f"projection was numerically zero after {NULL_SPACE_RETRIES} attempts",
        {'seed': seed, 'shape': [rows, cols]}
    )
