"""Command line front end.

    gass ingest --log log.tsv --intents p_t_d.json --relevance rel.json --out model.json
    gass eval --model model.json --ranker gmpc --beta 1 --out report
    gass sweep --model model.json --out sweep
    gass correlate --sweep sweep.csv --out tau

Exit codes: 0 ok, 1 usage, 2 parse, 3 validation, 4 capacity.
"""

import argparse
import logging
import sys
from fractions import Fraction
from typing import List, Optional, Sequence

from gass import __version__
from gass.analysis import (EvalConfig, case_study, correlation_matrix,
                           motivating_cases, plot_data, sweep, toy_table)
from gass.config import (DEFAULT_BETAS, DEFAULT_EPSILON, DEFAULT_GAMMA,
                         DEFAULT_RANKERS, DEFAULT_SAMPLES, DEFAULT_SEED,
                         Settings)
from gass.core import renormalize, require_valid
from gass.estimate import SynthConfig, build_model, gen_synthetic
from gass.exceptions import GassError
from gass.formats import (read_bundle, read_intents, read_log,
                          read_relevance, read_sweep, report_columns,
                          write_bundle, write_csv, write_frame, write_log,
                          write_report)
from gass.metrics import STATIC, run
from gass.rankers import RANKERS
from utils import load_columns

logger = logging.getLogger('gass')


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with 1 instead of argparse's 2, which means parse."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f'{self.prog}: error: {message}\n')


def beta_arg(value: str):
    if value == STATIC:
        return STATIC
    try:
        beta = float(Fraction(value))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(
            f'beta must be a positive number or {STATIC!r}, got {value!r}')
    if beta <= 0:
        raise argparse.ArgumentTypeError(f'beta must be > 0, got {value!r}')
    return beta


def betas_arg(value: str) -> List[float]:
    betas = [beta_arg(v.strip()) for v in value.split(',') if v.strip()]
    if not betas or STATIC in betas:
        raise argparse.ArgumentTypeError(
            'betas must be a comma separated list of positive numbers')
    return betas


def rankers_arg(value: str) -> List[str]:
    rankers = [r.strip().lower() for r in value.split(',') if r.strip()]
    unknown = [r for r in rankers if r not in RANKERS]
    if not rankers or unknown:
        raise argparse.ArgumentTypeError(
            f'unknown ranker(s) {", ".join(unknown) or value!r}, '
            f'choose from {", ".join(RANKERS)}')
    return rankers


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f'{value!r} is not an integer')
    if number < 1:
        raise argparse.ArgumentTypeError(f'{value!r} must be >= 1')
    return number


def non_negative_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f'{value!r} is not an integer')
    if number < 0:
        raise argparse.ArgumentTypeError(f'{value!r} must be >= 0')
    return number


def flags(args: argparse.Namespace) -> dict:
    """The command's flags for provenance, without output paths."""
    skip = {'func', 'verbose', 'out', 'plot_data'}
    return {
        k: (list(v) if isinstance(v, (list, tuple)) else v)
        for k, v in sorted(vars(args).items()) if k not in skip
    }


def eval_config(args: argparse.Namespace) -> EvalConfig:
    return EvalConfig(samples=args.samples,
                      gamma=args.gamma,
                      epsilon=args.epsilon,
                      seed=args.seed,
                      depth=args.depth,
                      normalize_scores=not args.raw_scores,
                      weighting='uniform' if args.uniform_average else 'pq')


def emit(frame, path: Optional[str], metadata: Optional[dict] = None):
    """CSV to stdout, or PATH.json and PATH.csv."""
    if path is None or path == '-':
        write_csv(frame, None)
    else:
        write_frame(frame, path, metadata)


def cmd_ingest(args: argparse.Namespace):
    log = read_log(args.log)
    model = build_model(log, read_intents(args.intents),
                        read_relevance(args.relevance))
    if args.renormalize:
        model = renormalize(model)
    require_valid(model)
    write_bundle(model, args.out, {
        'tool': 'gass',
        'version': __version__,
        'command': 'ingest',
        'flags': flags(args),
    })


def cmd_synth(args: argparse.Namespace):
    config = SynthConfig(queries=args.queries,
                         items=args.items,
                         intents=args.intents,
                         groups=args.groups,
                         candidates=args.candidates,
                         sense_items=args.sense_items,
                         bridge_items=args.bridge_items,
                         group_concentration=args.group_concentration,
                         item_concentration=args.item_concentration,
                         bridge_share=args.bridge_share,
                         majority=args.majority,
                         noise=args.noise,
                         interactions=args.interactions,
                         seed=args.seed)
    data = gen_synthetic(config)
    model = require_valid(data.to_model())
    write_bundle(model, args.out, {
        'tool': 'gass',
        'version': __version__,
        'command': 'synth',
        'seed': args.seed,
    })
    if args.log:
        write_log(data.log, args.log)


def cmd_eval(args: argparse.Namespace):
    model = require_valid(read_bundle(args.model))
    config = eval_config(args)
    report = run(model,
                 ranker=args.ranker,
                 beta=args.beta,
                 samples=config.samples,
                 gamma=config.gamma,
                 epsilon=config.epsilon,
                 seed=config.seed,
                 depth=config.depth,
                 normalize_scores=config.normalize_scores,
                 weighting=config.weighting)
    report.metadata['flags'] = flags(args)
    if args.out == '-':
        write_csv(report_columns(report.to_frame()), None)
    else:
        write_report(report, args.out)


def cmd_sweep(args: argparse.Namespace):
    model = require_valid(read_bundle(args.model))
    result = sweep(model,
                   args.rankers,
                   args.betas,
                   eval_config(args),
                   include_static=args.static)
    metadata = {'tool': 'gass', 'version': __version__}
    metadata.update(result.metadata)
    metadata['flags'] = flags(args)
    emit(report_columns(result.frame), args.out, metadata)
    if args.plot_data:
        emit(plot_data(result), args.plot_data, metadata)


def cmd_correlate(args: argparse.Namespace):
    matrix = correlation_matrix(read_sweep(args.sweep))
    columns, _ = load_columns()
    matrix = matrix.rename(index=columns, columns=columns)
    frame = matrix.rename_axis('metric').reset_index()
    emit(frame, args.out, {'tool': 'gass', 'version': __version__})


def cmd_toy(args: argparse.Namespace):
    emit(report_columns(toy_table()), args.out)


def cmd_cases(args: argparse.Namespace):
    emit(motivating_cases(), args.out)


def cmd_case_study(args: argparse.Namespace):
    model = require_valid(read_bundle(args.model))
    frame = case_study(model, args.query, args.rankers, args.betas,
                       args.top, eval_config(args))
    emit(frame, args.out, {'tool': 'gass', 'version': __version__,
                           'flags': flags(args)})


def _add_eval_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--samples', type=positive_int,
                        default=DEFAULT_SAMPLES,
                        help='rankings sampled per query')
    parser.add_argument('--gamma', type=float, default=DEFAULT_GAMMA,
                        help='RBP patience')
    parser.add_argument('--epsilon', type=float, default=DEFAULT_EPSILON,
                        help='smoothing inside group products')
    parser.add_argument('--seed', type=int, default=DEFAULT_SEED)
    parser.add_argument('--depth', type=positive_int, default=None,
                        help='truncate rankings to this many positions')
    parser.add_argument('--uniform-average', action='store_true',
                        help='average within-query metrics uniformly over '
                        'queries instead of by p(q)')
    parser.add_argument('--raw-scores', action='store_true',
                        help='use raw ranker scores instead of '
                        'max-relative log scores when sampling')


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for info, -vv for debug logging')

    parser = ArgumentParser(
        prog='gass',
        description='Group-aware search success for static and stochastic '
        'ranking policies.')
    parser.add_argument('--version', action='version',
                        version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    ingest = commands.add_parser('ingest', parents=[common],
                                 help='estimate a model bundle from a log')
    ingest.add_argument('--log', required=True, help='TSV interaction log')
    ingest.add_argument('--intents', required=True,
                        help='p(t|d) JSON, {item: {intent: p}}')
    ingest.add_argument('--relevance', required=True,
                        help='p(r|t) JSON, {item: {intent: p}}')
    ingest.add_argument('--out', required=True, help='model bundle path')
    ingest.add_argument('--renormalize', action='store_true',
                        help='rescale distributions that do not sum to 1')
    ingest.set_defaults(func=cmd_ingest)

    synth = commands.add_parser('synth', parents=[common],
                                help='generate a synthetic model bundle')
    defaults = SynthConfig()
    synth.add_argument('--out', required=True, help='model bundle path')
    synth.add_argument('--log', default=None,
                       help='also write the generated log as TSV')
    for name in ('queries', 'items', 'intents', 'groups', 'candidates',
                 'interactions'):
        synth.add_argument(f'--{name}', type=positive_int,
                           default=getattr(defaults, name))
    synth.add_argument('--sense-items', type=non_negative_int,
                       default=defaults.sense_items,
                       help='candidates per reading of a query')
    synth.add_argument('--bridge-items', type=non_negative_int,
                       default=defaults.bridge_items,
                       help='candidates covering every reading of a query')
    synth.add_argument('--group-concentration', type=float,
                       default=defaults.group_concentration,
                       help='Dirichlet mass of a group on other groups\' '
                       'intents, near 0 for disjoint tastes')
    synth.add_argument('--item-concentration', type=float,
                       default=defaults.item_concentration)
    synth.add_argument('--bridge-share', type=float,
                       default=defaults.bridge_share,
                       help='fraction of items spread over two intents')
    synth.add_argument('--majority', type=float, default=defaults.majority,
                       help='share of each query\'s traffic issued by g0')
    synth.add_argument('--noise', type=float, default=defaults.noise,
                       help='click weight every candidate gets')
    synth.add_argument('--seed', type=int, default=defaults.seed)
    synth.set_defaults(func=cmd_synth)

    evaluate = commands.add_parser('eval', parents=[common],
                                   help='evaluate one ranker and beta')
    evaluate.add_argument('--model', required=True, help='model bundle')
    evaluate.add_argument('--ranker', choices=list(RANKERS), default='mpc')
    evaluate.add_argument('--beta', type=beta_arg, default=STATIC,
                          help=f'PL temperature or {STATIC!r}')
    _add_eval_flags(evaluate)
    evaluate.add_argument('--out', required=True,
                          help='writes OUT.json and OUT.csv, - for stdout')
    evaluate.set_defaults(func=cmd_eval)

    sweep_ = commands.add_parser('sweep', parents=[common],
                                 help='evaluate a grid of rankers and betas')
    sweep_.add_argument('--model', required=True, help='model bundle')
    sweep_.add_argument('--rankers', type=rankers_arg,
                        default=list(DEFAULT_RANKERS))
    sweep_.add_argument('--betas', type=betas_arg,
                        default=list(DEFAULT_BETAS),
                        help='comma separated, fractions allowed (1/8)')
    sweep_.add_argument('--static', action='store_true',
                        help='add the static ranking as a reference cell')
    _add_eval_flags(sweep_)
    sweep_.add_argument('--out', default=None,
                        help='writes OUT.json and OUT.csv, - for stdout')
    sweep_.add_argument('--plot-data', default=None,
                        help='normalized metric-vs-beta series')
    sweep_.set_defaults(func=cmd_sweep)

    correlate = commands.add_parser('correlate', parents=[common],
                                    help='Kendall tau between metrics')
    correlate.add_argument('--sweep', required=True, help='sweep CSV')
    correlate.add_argument('--out', default=None)
    correlate.set_defaults(func=cmd_correlate)

    toy = commands.add_parser('toy', parents=[common],
                              help='the two-query toy table')
    toy.add_argument('--out', default=None)
    toy.set_defaults(func=cmd_toy)

    cases = commands.add_parser('cases', parents=[common],
                                help='the single-query motivating cases')
    cases.add_argument('--out', default=None)
    cases.set_defaults(func=cmd_cases)

    study = commands.add_parser('case-study', parents=[common],
                                help='top-K of one query per ranker and beta')
    study.add_argument('--model', required=True, help='model bundle')
    study.add_argument('--query', required=True)
    study.add_argument('--rankers', type=rankers_arg,
                       default=list(DEFAULT_RANKERS))
    study.add_argument('--betas', type=betas_arg, default=list(DEFAULT_BETAS))
    study.add_argument('--top', type=positive_int, default=10,
                       help='positions to list')
    _add_eval_flags(study)
    study.add_argument('--out', default=None)
    study.set_defaults(func=cmd_case_study)
    return parser


def configure_logging(verbose: int):
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = Settings.log_level()
    logging.basicConfig(
        level=level,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    logger.debug('running %s with %s', args.command, flags(args))
    try:
        args.func(args)
    except GassError as exc:
        logger.debug('%s failed', args.command, exc_info=True)
        print(f'gass {args.command}: error: {exc}', file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == '__main__':
    sys.exit(main())
