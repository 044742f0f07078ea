#!/usr/bin/env python3
"""
Configuration for instanton search runs
Defaults come from the environment (or a .env file), can be overridden by a
JSON config file, and finally by command-line flags
"""

import json
import os
import logging
from dataclasses import dataclass, asdict, field, fields
from typing import Dict, Optional

from dotenv import load_dotenv

from errors import ConfigError

load_dotenv()
logger = logging.getLogger(__name__)

# Tolerance defaults (see DESIGN.md for the reasoning behind each value)
EPS_FAIL = float(os.environ.get('ISA_EPS_FAIL', 1e-6))
TAU = float(os.environ.get('ISA_TAU', 1e-6))
FEAS_TOL = float(os.environ.get('ISA_FEAS_TOL', 1e-8))
GAP_TOL = float(os.environ.get('ISA_GAP_TOL', 1e-8))
MAX_ITER = int(os.environ.get('ISA_MAX_ITER', 200))

WORKERS = int(os.environ.get('ISA_WORKERS', 1))
OUTPUT_DIR = os.environ.get('ISA_OUTPUT_DIR', 'results')
LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
ORACLE_BUDGET = int(os.environ.get('ISA_ORACLE_BUDGET', 100_000))

# Fixed numerical thresholds shared across modules
ORTHO_RANK_THRESHOLD = 1e-10
NULL_SPACE_RESIDUAL = 1e-9
NULL_SPACE_RETRIES = 16
BASP_RESIDUAL_FACTOR = 1e-7
ORACLE_RESIDUAL_TOL = 1e-8
ORACLE_STRICT_MARGIN = 1e-8
L0_ORACLE_MAX_SUPPORTS = 10 ** 7


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances for BasP decoding and support measurement"""
    eps_fail: float = EPS_FAIL
    tau: float = TAU
    feas_tol: float = FEAS_TOL
    gap_tol: float = GAP_TOL
    max_iter: int = MAX_ITER

    def __post_init__(self):
        for name in ('eps_fail', 'feas_tol', 'gap_tol'):
            value = getattr(self, name)
            if not (0 < value <= 1e-2):
                raise ConfigError(f"{name} must lie in (0, 1e-2], got {value}")
        if self.tau < 0:
            raise ConfigError(f"tau must be non-negative, got {self.tau}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be at least 1, got {self.max_iter}")

    def to_dict(self) -> Dict:
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()


@dataclass
class ExperimentConfig:
    """Everything that determines a batch of ISA trials"""
    rows: Optional[int] = None
    cols: Optional[int] = None
    matrix_seed: int = 0
    matrix_path: Optional[str] = None
    trials: int = 1
    init_k: Optional[int] = None
    base_seed: int = 0
    workers: int = WORKERS
    selection: str = 'first'
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_dir: str = OUTPUT_DIR
    write_records: bool = True

    def __post_init__(self):
        if isinstance(self.tolerances, dict):
            self.tolerances = Tolerances(**self.tolerances)
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.selection not in ('first', 'random'):
            raise ConfigError(f"selection must be 'first' or 'random', got {self.selection!r}")
        if self.matrix_path is None and (self.rows is None or self.cols is None):
            raise ConfigError("either a matrix path or rows and cols are required")
        if self.init_k is not None and self.init_k < 1:
            raise ConfigError(f"init_k must be at least 1, got {self.init_k}")
        if self.init_k is not None and self.cols is not None and self.init_k > self.cols:
            raise ConfigError(f"init_k ({self.init_k}) cannot exceed cols ({self.cols})")

    def resolved_init_k(self, rows: int) -> int:
        """init_k, defaulting to about a third of the measurement count"""
        if self.init_k is not None:
            return self.init_k
        return max(1, int(round(rows / 3)))


def load_config_file(path: str) -> Dict:
    """Read a JSON config file into a flat dict of overrides"""
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")

    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")

    known = {f.name for f in fields(ExperimentConfig)} | {f.name for f in fields(Tolerances)}
    known |= {'log_level', 'oracle_budget'}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown config keys in {path}: {unknown}")

    logger.info(f"Loaded config overrides from {path}")
    return data


def defaults_table() -> Dict:
    """All resolved defaults, for --show-config"""
    return {
        'eps_fail': EPS_FAIL,
        'tau': TAU,
        'feas_tol': FEAS_TOL,
        'gap_tol': GAP_TOL,
        'max_iter': MAX_ITER,
        'workers': WORKERS,
        'output_dir': OUTPUT_DIR,
        'log_level': LOG_LEVEL,
        'oracle_budget': ORACLE_BUDGET,
        'ortho_rank_threshold': ORTHO_RANK_THRESHOLD,
        'null_space_residual': NULL_SPACE_RESIDUAL,
        'null_space_retries': NULL_SPACE_RETRIES,
        'basp_residual_factor': BASP_RESIDUAL_FACTOR,
        'oracle_residual_tol': ORACLE_RESIDUAL_TOL,
        'oracle_strict_margin': ORACLE_STRICT_MARGIN,
        'l0_oracle_max_supports': L0_ORACLE_MAX_SUPPORTS,
    }
