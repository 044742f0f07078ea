#!/usr/bin/env python3
"""
Instanton search CLI
Generates measurement matrices, runs the instanton search once or in batches,
verifies instanton records and renders length histograms
"""

import argparse
import json
import logging
import sys
import time
from typing import Dict, List, Optional

import numpy as np

from basp import encode_basp
from data_store import DataStore
from errors import (
    EXIT_DISCARDED,
    EXIT_SUCCESS,
    EXIT_VERIFICATION_FAILURE,
    ConfigError,
    InitNotFailingError,
    InstantonSearchError,
    PartialFailureError,
)
from experiments import build_matrix, certify_record, resolve_matrix, sample, trial_seed, write_outputs
from histogram_exporter import histogram_exporter
from isa import InstantonRecord, isa_run, random_init
from settings import (
    LOG_LEVEL,
    ORACLE_BUDGET,
    OUTPUT_DIR,
    ExperimentConfig,
    Tolerances,
    defaults_table,
    load_config_file,
)

logger = logging.getLogger(__name__)

TOLERANCE_FLAGS = ('eps_fail', 'tau', 'feas_tol', 'gap_tol', 'max_iter')
NON_EXPERIMENT_KEYS = ('tolerances', 'log_level', 'oracle_budget')


def configure_logging(level: str):
    """Logs go to stderr so stdout stays machine-readable"""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True
    )
    logging.captureWarnings(True)


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with the toolkit's usage code instead of argparse's 2"""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> CliParser:
    parser = CliParser(prog='isa', description='Instanton search for Basis Pursuit')
    parser.add_argument('--config', help='JSON file with config overrides')
    parser.add_argument('--log-level', default=None, help=f'logging level (default {LOG_LEVEL})')
    parser.add_argument('--show-config', action='store_true', help='print resolved defaults and exit')

    tolerances = CliParser(add_help=False)
    tolerances.add_argument('--eps-fail', type=float, help='decoding failure threshold (l-inf)')
    tolerances.add_argument('--tau', type=float, help='support threshold')
    tolerances.add_argument('--feas-tol', type=float, help='LP feasibility tolerance')
    tolerances.add_argument('--gap-tol', type=float, help='LP duality gap tolerance')
    tolerances.add_argument('--max-iter', type=int, help='LP iteration limit')

    matrix = CliParser(add_help=False)
    matrix.add_argument('--matrix', help='matrix file (text or .json envelope)')
    matrix.add_argument('--rows', type=int, help='rows of a generated matrix')
    matrix.add_argument('--cols', type=int, help='columns of a generated matrix')
    matrix.add_argument('--seed', type=int, help='seed of a generated matrix')

    search = CliParser(add_help=False)
    search.add_argument('--init-k', type=int, help='nonzeros of the random initialization')
    search.add_argument('--base-seed', type=int, help='initialization seed (trial i uses base seed + i)')
    search.add_argument('--workers', type=int, help='worker count')
    search.add_argument('--selection', choices=['first', 'random'], help='failing reduction choice')

    commands = parser.add_subparsers(dest='command', parser_class=CliParser)

    gen = commands.add_parser('gen-matrix', help='generate an orthonormal-row Gaussian matrix')
    gen.add_argument('--rows', type=int, required=True)
    gen.add_argument('--cols', type=int, required=True)
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--out', required=True, help='output path')

    run = commands.add_parser('run-isa', parents=[matrix, search, tolerances],
                              help='run one instanton search and print its trace')
    run.add_argument('--out', help='write the instanton record JSON here (default: print it after the trace)')
    run.add_argument('--dump-lp', metavar='DIR', help='dump the initial BasP LP to DIR')

    batch = commands.add_parser('sample', parents=[matrix, search, tolerances],
                                help='run a batch of instanton searches')
    batch.add_argument('--trials', type=int)
    batch.add_argument('--out', help=f'output directory (default {OUTPUT_DIR})')
    batch.add_argument('--no-records', action='store_true', help='skip per-trial record files')

    verify = commands.add_parser('verify', parents=[tolerances], help='re-certify an instanton record')
    verify.add_argument('--matrix', required=True)
    verify.add_argument('--record', required=True)
    verify.add_argument('--oracle-budget', type=int, default=None,
                        help=f'max supports for the l0 oracle (default {ORACLE_BUDGET})')

    hist = commands.add_parser('histogram', help='render a histogram CSV as text')
    hist.add_argument('csv_path')

    return parser


def _flag(args: argparse.Namespace, name: str):
    return getattr(args, name, None)


def resolve_tolerances(args: argparse.Namespace, overrides: Dict, base: Optional[Tolerances] = None) -> Tolerances:
    """Flag > config file > base (environment defaults unless given)"""
    values = (base or Tolerances()).to_dict()
    values.update({k: overrides[k] for k in TOLERANCE_FLAGS if k in overrides})
    values.update({k: _flag(args, k) for k in TOLERANCE_FLAGS if _flag(args, k) is not None})
    return Tolerances(**values)


def build_config(args: argparse.Namespace, overrides: Dict) -> ExperimentConfig:
    """ExperimentConfig from config file overrides and command-line flags"""
    values = {k: v for k, v in overrides.items() if k not in TOLERANCE_FLAGS + NON_EXPERIMENT_KEYS}
    flag_map = {
        'rows': 'rows', 'cols': 'cols', 'seed': 'matrix_seed', 'matrix': 'matrix_path',
        'trials': 'trials', 'init_k': 'init_k', 'base_seed': 'base_seed', 'workers': 'workers',
        'selection': 'selection', 'out': 'output_dir'
    }
    for flag, key in flag_map.items():
        value = _flag(args, flag)
        if value is not None:
            values[key] = value
    if _flag(args, 'no_records'):
        values['write_records'] = False

    base = Tolerances(**overrides['tolerances']) if isinstance(overrides.get('tolerances'), dict) else None
    values['tolerances'] = resolve_tolerances(args, overrides, base)
    if values.get('matrix_path'):
        values.pop('rows', None)
        values.pop('cols', None)
    return ExperimentConfig(**values)


def format_trace(record: InstantonRecord) -> str:
    """Per-step support, values, l0, case label and verdict"""
    lines = []
    for index, step in enumerate(record.trace.steps):
        support = np.flatnonzero(step.e)
        values = ', '.join(f"{step.e[i]:+.6f}" for i in support)
        lines.append(f"step {index}: l0={step.l0} case={step.case.value} verdict={step.basp_verdict.value}")
        lines.append(f"  support: {support.tolist()}")
        lines.append(f"  values:  [{values}]")
    support = record.support
    values = ', '.join(f"{record.instanton[i]:+.6f}" for i in support)
    lines.append(f"instanton: length={record.length} basp_calls={record.basp_calls}")
    lines.append(f"  support: {support.tolist()}")
    lines.append(f"  values:  [{values}]")
    return '\n'.join(lines)


def cmd_gen_matrix(args: argparse.Namespace, overrides: Dict) -> int:
    F = build_matrix(args.rows, args.cols, args.seed)
    matrix_id = DataStore.save_matrix(F, args.out)
    print(matrix_id)
    return EXIT_SUCCESS


def cmd_run_isa(args: argparse.Namespace, overrides: Dict) -> int:
    config = build_config(args, overrides)
    F, _ = resolve_matrix(config)
    rows, cols = F.shape
    init_k = config.resolved_init_k(rows)
    seed = trial_seed(config.base_seed, 0)
    matrix_id = DataStore.matrix_hash(F)

    e0 = random_init(cols, init_k, seed)
    if args.dump_lp:
        DataStore.dump_lp(encode_basp(F, F @ e0), args.dump_lp)

    start = time.perf_counter()
    try:
        record = isa_run(F, e0, tolerances=config.tolerances, seed=seed, init_k=init_k,
                         selection=config.selection, workers=config.workers, matrix_id=matrix_id)
    except InitNotFailingError as e:
        logger.info(f"Initialization discarded: {e}")
        print(f"discarded: BasP decodes the initialization (seed {seed}, init_k {init_k})")
        return EXIT_DISCARDED
    elapsed = time.perf_counter() - start

    print(f"matrix: {rows}x{cols} {matrix_id}")
    print(format_trace(record))
    logger.info(f"ISA finished in {elapsed:.3f}s with {record.basp_calls} BasP calls")

    if args.out:
        DataStore.save_record(record, args.out, F.shape, config.tolerances, config.selection)
        print(f"record: {args.out}")
    else:
        print("record:")
        print(json.dumps(DataStore.record_to_dict(record, F.shape, config.tolerances, config.selection), indent=2))
    return EXIT_SUCCESS


def cmd_sample(args: argparse.Namespace, overrides: Dict) -> int:
    config = build_config(args, overrides)
    F, generated = resolve_matrix(config)
    result = sample(config, F)
    write_outputs(result, config, F, write_matrix=generated)

    summary = result.summary()
    timing = result.timing()
    print(histogram_exporter.render(result.histogram.bins))
    print(f"attempted={summary['trials_attempted']} discarded={summary['trials_discarded']} "
          f"errored={summary['trials_errored']} min_length={summary['min_length']}")
    if timing['mean_isa_seconds'] is not None:
        print(f"mean ISA time {timing['mean_isa_seconds']:.3f}s, "
              f"mean BasP time {timing['mean_basp_seconds']:.4f}s")
        logger.info(f"Timing: {timing}")
    print(f"outputs: {config.output_dir}")

    if result.errored_indices:
        raise PartialFailureError(
            f"{len(result.errored_indices)} trials errored",
            {'errored_trials': result.errored_indices}
        )
    return EXIT_SUCCESS


def cmd_verify(args: argparse.Namespace, overrides: Dict) -> int:
    F = DataStore.load_matrix(args.matrix)
    record, meta = DataStore.load_record(args.record)
    tolerances = resolve_tolerances(args, overrides, meta['tolerances'])
    budget = args.oracle_budget if args.oracle_budget is not None else overrides.get('oracle_budget', ORACLE_BUDGET)

    checks = certify_record(F, record, tolerances, meta['selection'], budget)
    for check in checks:
        print(f"{check.label:7s} {check.name}  {check.detail}")

    failed = [check.name for check in checks if check.passed is False]
    if failed:
        logger.warning(f"Verification failed: {failed}")
        print(f"verification failed: {', '.join(failed)}")
        return EXIT_VERIFICATION_FAILURE
    print("verified")
    return EXIT_SUCCESS


def cmd_histogram(args: argparse.Namespace, overrides: Dict) -> int:
    bins = histogram_exporter.read_csv(args.csv_path)
    print(histogram_exporter.render(bins))
    return EXIT_SUCCESS


COMMANDS = {
    'gen-matrix': cmd_gen_matrix,
    'run-isa': cmd_run_isa,
    'sample': cmd_sample,
    'verify': cmd_verify,
    'histogram': cmd_histogram,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = load_config_file(args.config) if args.config else {}
        configure_logging(args.log_level or overrides.get('log_level', LOG_LEVEL))

        if args.show_config:
            table = defaults_table()
            table.update(overrides)
            print(json.dumps(table, indent=2))
            return EXIT_SUCCESS
        if not args.command:
            raise ConfigError("a subcommand is required (gen-matrix, run-isa, sample, verify, histogram)")

        return COMMANDS[args.command](args, overrides)
    except InstantonSearchError as e:
        logger.error(f"{e.kind}: {e}")
        print(f"error: {e.kind}: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == '__main__':
    sys.exit(main())
