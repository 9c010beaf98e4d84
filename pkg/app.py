"""
OptConn Command Line
Batch front-end: read a scenario, evaluate Christoffel and curvature tables at
the requested points, run the verification suite and emit a report.

Exit status: 0 all checks pass, 1 a check failed, 2 configuration error,
3 evaluation error.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from geometry.connection import PATHS
from geometry.errors import EvaluationError, GeometryError
from geometry.fields import DERIVATIVE_MODES
from geometry.oracle import CHECKS
from services import config_service, report_service, run_orchestrator
from services.config_service import DEFAULT_SCENARIO, OUTPUT_FORMATS, ConfigError
from services.orchestrator import EXIT_CONFIG_ERROR, EXIT_EVALUATION_ERROR

logger = logging.getLogger(__name__)


def _csv(text: str) -> List[str]:
    return [item.strip() for item in text.split(',') if item.strip()]


def _point(text: str) -> List[float]:
    try:
        return [float(v) for v in _csv(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"point must be comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='optconn',
        description='Christoffel tables and verification of compatible metrics on shearfree manifolds',
    )
    parser.add_argument('--config', help='scenario file (YAML); the flat D0 scenario when omitted')
    parser.add_argument('--check', action='append', type=_csv, metavar='NAME[,NAME...]',
                        help=f"checks to run, or 'all' (known: {', '.join(CHECKS)})")
    parser.add_argument('--point', action='append', type=_point, metavar='X1,...,S,T',
                        help='evaluate at this point instead of the configured ones (repeatable)')
    parser.add_argument('--table', action='append', type=_csv, metavar='PATH',
                        help=f"dump Christoffel tables ({', '.join(PATHS)})")
    parser.add_argument('--fd-step', type=float, help='finite-difference step')
    parser.add_argument('--tolerance', action='append', type=_csv, metavar='CHECK=VALUE[,...]',
                        help='override check tolerances')
    parser.add_argument('--seed', type=int, help='seed for the random points')
    parser.add_argument('--output', help='write the report here instead of stdout')
    parser.add_argument('--format', choices=OUTPUT_FORMATS, help='report format')
    parser.add_argument('--fault', help="corrupt the table under test: sign-flip, flip:A,B,C or flip:<block>")
    parser.add_argument('--mode', choices=DERIVATIVE_MODES, help='derivative mode of the scalar fields')
    parser.add_argument('--richardson', action='store_true', default=None,
                        help='Richardson-extrapolate finite differences')
    parser.add_argument('--curvature', action='store_true', default=None,
                        help='report Ricci components and curvature summaries')
    parser.add_argument('--workers', type=int, help='size of the per-point worker pool')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    return parser


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted-path overrides for the scenario document; CLI beats YAML"""
    overrides: Dict[str, Any] = {
        'fd_step': args.fd_step,
        'output.path': args.output,
        'output.format': args.format,
        'fault': args.fault,
        'derivative_mode': args.mode,
        'richardson': args.richardson,
        'curvature': args.curvature,
        'workers': args.workers,
        'points.random.seed': args.seed,
    }
    if args.check:
        overrides['checks'] = [name for group in args.check for name in group]
    if args.table:
        overrides['tables'] = [name for group in args.table for name in group]
    if args.point:
        overrides['points'] = {'explicit': args.point}
        overrides.pop('points.random.seed')
    for group in args.tolerance or []:
        for item in group:
            check, sep, value = item.partition('=')
            if not sep:
                raise ConfigError('tolerances', item, "expected CHECK=VALUE")
            overrides[f'tolerances.{check.strip()}'] = value.strip()
    return overrides


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config_service.configure_logging(verbose=args.verbose)

    try:
        overrides = overrides_from(args)
        if args.config:
            config = config_service.load(args.config, overrides)
        else:
            config = config_service.parse_config(DEFAULT_SCENARIO, overrides)
    except ConfigError as e:
        logger.error(f"❌ configuration error: {e}")
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        run = run_orchestrator.run(config)
    except (EvaluationError, GeometryError) as e:
        logger.error(f"❌ evaluation error: {e}")
        print(f"evaluation error: {e}", file=sys.stderr)
        return EXIT_EVALUATION_ERROR

    try:
        report_service.write(report_service.records(run), config.output_path, config.output_format)
    except OSError as e:
        logger.error(f"❌ cannot write report: {e}")
        print(f"configuration error: cannot write report to {config.output_path}: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    return run.exit_code


if __name__ == '__main__':
    raise SystemExit(main())
