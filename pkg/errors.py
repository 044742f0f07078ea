#!/usr/bin/env python3
"""
Error taxonomy for the instanton search toolkit
Every error carries a short kind string and the CLI exit code it maps to
"""

from typing import Dict, Optional

EXIT_SUCCESS = 0
EXIT_DISCARDED = 2
EXIT_VERIFICATION_FAILURE = 3
EXIT_USAGE = 4
EXIT_NUMERICAL = 5


class InstantonSearchError(Exception):
    """Base class for all toolkit errors"""

    kind = 'error'
    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, diagnostics: Optional[Dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def to_dict(self) -> Dict:
        return {
            'kind': self.kind,
            'message': str(self),
            'diagnostics': self.diagnostics
        }


# dense-linalg

class InvalidDimensionsError(InstantonSearchError):
    kind = 'invalid-dimensions'
    exit_code = EXIT_USAGE


class DimensionMismatchError(InstantonSearchError):
    kind = 'dimension-mismatch'
    exit_code = EXIT_USAGE


class RankDeficientError(InstantonSearchError):
    kind = 'rank-deficient'
    exit_code = EXIT_NUMERICAL


class DegenerateSampleError(InstantonSearchError):
    kind = 'degenerate-sample'
    exit_code = EXIT_NUMERICAL


# lp-core / basp

class MalformedLPError(InstantonSearchError):
    kind = 'malformed-lp'
    exit_code = EXIT_USAGE


class DecodeFailedError(InstantonSearchError):
    kind = 'decode-failed'
    exit_code = EXIT_NUMERICAL


# isa

class ZeroVectorError(InstantonSearchError):
    kind = 'zero-vector'
    exit_code = EXIT_USAGE


class ContractViolationError(InstantonSearchError):
    kind = 'contract-violation'
    exit_code = EXIT_NUMERICAL


class InitNotFailingError(InstantonSearchError):
    kind = 'init-not-failing'
    exit_code = EXIT_DISCARDED


class StepBudgetExceededError(InstantonSearchError):
    kind = 'step-budget-exceeded'
    exit_code = EXIT_NUMERICAL


class InvalidKError(InstantonSearchError):
    kind = 'invalid-k'
    exit_code = EXIT_USAGE


# oracle

class CombinatorialBudgetExceededError(InstantonSearchError):
    kind = 'combinatorial-budget-exceeded'
    exit_code = EXIT_USAGE


class RankDeficientSupportError(InstantonSearchError):
    kind = 'rank-deficient-support'
    exit_code = EXIT_NUMERICAL


# harness

class HashMismatchError(InstantonSearchError):
    kind = 'hash-mismatch'
    exit_code = EXIT_VERIFICATION_FAILURE


class MalformedCSVError(InstantonSearchError):
    kind = 'malformed-csv'
    exit_code = EXIT_USAGE


class DataStoreError(InstantonSearchError):
    kind = 'io-error'
    exit_code = EXIT_USAGE


class ConfigError(InstantonSearchError):
    kind = 'config-error'
    exit_code = EXIT_USAGE


class PartialFailureError(InstantonSearchError):
    kind = 'partial-failure'
    exit_code = EXIT_NUMERICAL
