import inspect
import logging
from functools import reduce
from pathlib import Path

import click
import tomlkit
from tomlkit.items import Comment, Trivia
from tqdm import tqdm

from .errors import ConfigError, SdpError
from .experiment import compare, default_maxcap, make_schedule, partition, report
from .graph import FORMATS, load_manifest
from .io import load_dataset, params_from_file
from .stream import read_trace, write_trace

__all__ = ()

log = logging.getLogger(__name__)


def collect_kwarg_defaults(func):
    kwargs = tomlkit.table()
    for p in inspect.signature(func).parameters.values():
        if p.kind is not inspect.Parameter.KEYWORD_ONLY:
            continue
        if p.default is None:
            kwargs.add(Comment(Trivia(comment=f'#: {p.name} = ...')))
        else:
            kwargs[p.name] = p.default
    return kwargs


class TqdmStream:
    def write(self, msg):
        tqdm.write(msg, end='')


class CLI(click.Group):
    def list_commands(self, ctx):
        return self.commands.keys()

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ConfigError as e:
            raise click.UsageError(str(e), ctx) from e
        except (SdpError, ValueError) as e:
            raise click.ClickException(f'{type(e).__name__}: {e}') from e


@click.group(cls=CLI)
@click.option('-v', '--verbose', count=True, help='Increase verbosity.')
@click.option('-q', '--quiet', is_flag=True, help='Suppres all output.')
def cli(verbose, quiet):  # noqa: D403
    """sdpart partitions dynamic graph streams onto an elastic set of machines."""
    assert not (quiet and verbose)
    logging.basicConfig(
        style='{',
        format='[{asctime}.{msecs:03.0f}] {levelname}:{name}: {message}',
        datefmt='%H:%M:%S',
        stream=TqdmStream(),
    )
    if quiet:
        level = logging.ERROR
    else:
        level = [logging.WARNING, logging.INFO, logging.DEBUG][min(verbose, 2)]
    logging.getLogger('sdpart').setLevel(level)


@cli.command()
@click.option(
    '--commented', '-c', is_flag=True, help='Comment out all hyperparameters.'
)
def defaults(commented):
    """Print all hyperparameters and their default values.

    The hyperparameters are printed in the TOML format that is expected by the
    --params option of other sdpart commands.
    """
    table = tomlkit.table()
    table['scenario_kwargs'] = collect_kwarg_defaults(make_schedule)
    table['partition_kwargs'] = collect_kwarg_defaults(partition)
    lines = tomlkit.dumps(table).split('\n')
    if commented:
        lines = ['# ' + l if ' = ' in l and l[0] != '#' else l for l in lines]
    click.echo('\n'.join(lines), nl=False)


SCENARIO_OPTIONS = [
    click.option('--intervals', type=int, help='Number of intervals. [4]'),
    click.option(
        '--add',
        'add_percent',
        type=float,
        help='Percent of vertices added per interval. [25]',
    ),
    click.option(
        '--delete',
        'delete_vertex_percent',
        type=float,
        help='Percent of vertices deleted per interval. [5]',
    ),
    click.option(
        '--delete-edges',
        'delete_edge_percent',
        type=float,
        help='Percent of edges deleted per interval. [0]',
    ),
    click.option(
        '--delete-stable-only/--delete-any',
        'delete_stable_only',
        default=None,
        help='Never delete vertices added in the same interval.',
    ),
    click.option(
        '--shuffle/--file-order',
        'shuffle',
        default=None,
        help='Stream in a seeded random order or in file order.',
    ),
]

PARTITION_OPTIONS = [
    click.option('--maxcap', type=int, help='Edge capacity of a partition.'),
    click.option(
        '--tolerance',
        'tolerance_parameter',
        type=float,
        help='Scale-in threshold in percent of maxcap. [20]',
    ),
    click.option(
        '--dest-param',
        type=float,
        help='Percent of maxcap a migration destination keeps free. [5]',
    ),
    click.option(
        '--gate-direction',
        type=click.Choice(['prose', 'listing', 'none']),
        help='When the balancing gate intervenes. [prose]',
    ),
    click.option(
        '--partitions', type=int, help='Partition count of the baselines.'
    ),
    click.option(
        '--audit/--no-audit', default=None, help='Write every placement decision.'
    ),
    click.option(
        '--mode',
        type=click.Choice(['inproc', 'distributed']),
        help='Partition in process or push placements to workers. [inproc]',
    ),
    click.option('--workers', type=int, help='Bound on worker processes.'),
]

COMMON_OPTIONS = [
    click.option('--seed', default=0, show_default=True, help='Top-level seed.'),
    click.option(
        '--manifest', help='Dataset manifest file or catalog name, sets maxcap.'
    ),
    click.option(
        '--k-target',
        default=4,
        show_default=True,
        help='Partition count the default maxcap aims at.',
    ),
    click.option(
        '--params',
        type=click.Path(exists=True, dir_okay=False),
        help='TOML file in the format of the defaults command.',
    ),
    click.option('--out', type=click.Path(file_okay=False), required=True),
]

DATASET_OPTIONS = [
    click.option(
        '--dataset', required=True, help='Edge-list file or generator name.'
    ),
    click.option(
        '--format',
        'format',
        type=click.Choice(FORMATS),
        default='snap',
        show_default=True,
    ),
]


def options(*groups):
    decorators = [d for group in groups for d in group]
    return lambda func: reduce(lambda f, d: d(f), reversed(decorators), func)


def _merge(params, section, flags):
    kwargs = dict(params.get(section, {}))
    kwargs.update({k: v for k, v in flags.items() if v is not None})
    return kwargs


def _split_flags(flags):
    scenario_keys = {
        'intervals',
        'add_percent',
        'delete_vertex_percent',
        'delete_edge_percent',
        'delete_stable_only',
        'shuffle',
    }
    scenario = {k: v for k, v in flags.items() if k in scenario_keys}
    rest = {k: v for k, v in flags.items() if k not in scenario_keys}
    return scenario, rest


def _prepare(flags, n_edges=None):
    """Resolve the scenario and partition keywords of a command."""
    params_file = flags.pop('params')
    params = params_from_file(params_file) if params_file else {}
    manifest = flags.pop('manifest')
    k_target = flags.pop('k_target')
    scenario_flags, partition_flags = _split_flags(flags)
    scenario_kwargs = _merge(params, 'scenario_kwargs', scenario_flags)
    partition_kwargs = _merge(params, 'partition_kwargs', partition_flags)
    needs_sdp = (
        partition_kwargs.get('algo', 'sdp') == 'sdp'
        or partition_kwargs.get('partitions') is None
    )
    if needs_sdp and not partition_kwargs.get('maxcap'):
        if manifest:
            n_edges = load_manifest(manifest)['edges']
        if n_edges is None:
            raise click.UsageError('Either --maxcap or --manifest is required')
        partition_kwargs['maxcap'] = default_maxcap(n_edges, k_target)
        log.info(f'Using maxcap = {partition_kwargs["maxcap"]}')
    return scenario_kwargs, partition_kwargs


def _dataset_info(dataset, fmt):
    return {
        'name': dataset.name or '',
        'format': fmt,
        'vertices': dataset.n_vertices,
        'edges': dataset.n_edges,
        'sha256': dataset.sha256(),
    }


@cli.command('run')
@options(DATASET_OPTIONS, COMMON_OPTIONS, SCENARIO_OPTIONS, PARTITION_OPTIONS)
@click.option(
    '--algo', type=click.Choice(['sdp', 'hash', 'ldg']), help='Algorithm. [sdp]'
)
def run_cmd(dataset, format, seed, out, **flags):
    """Partition the interval experiment of a dataset.

    The run directory OUT receives the run manifest, the metrics of every
    interval, the scaling log and the final assignments.
    """
    manifest = flags['manifest']
    data = load_dataset(dataset, format, manifest)
    scenario_kwargs, partition_kwargs = _prepare(flags, data.n_edges)
    schedule, scenario = make_schedule(data, seed, **scenario_kwargs)
    partition(
        schedule,
        out,
        seed,
        {'dataset': _dataset_info(data, format), 'scenario': scenario.as_dict()},
        **partition_kwargs,
    )


@cli.command('compare')
@options(DATASET_OPTIONS, COMMON_OPTIONS, SCENARIO_OPTIONS, PARTITION_OPTIONS)
@click.option(
    '--algos',
    default='sdp,hash,ldg',
    show_default=True,
    help='Comma-separated algorithms, the first one sets the partition count.',
)
def compare_cmd(dataset, format, seed, out, algos, **flags):
    """Run several algorithms on the identical event stream.

    Every run goes to its own subdirectory of OUT, the merged interval metrics
    to OUT/compare.csv.
    """
    data = load_dataset(dataset, format, flags['manifest'])
    scenario_kwargs, partition_kwargs = _prepare(flags, data.n_edges)
    partition_kwargs.pop('algo', None)
    schedule, scenario = make_schedule(data, seed, **scenario_kwargs)
    compare(
        schedule,
        out,
        seed,
        {'dataset': _dataset_info(data, format), 'scenario': scenario.as_dict()},
        algos=tuple(a.strip() for a in algos.split(',')),
        **partition_kwargs,
    )


@cli.command('trace')
@options(DATASET_OPTIONS, SCENARIO_OPTIONS)
@click.option('--seed', default=0, show_default=True, help='Top-level seed.')
@click.option('--manifest', help='Dataset manifest file or catalog name.')
@click.argument('path', type=click.Path(dir_okay=False))
def trace_cmd(dataset, format, seed, manifest, path, **flags):
    """Write the interval experiment of a dataset as a JSON-lines trace."""
    data = load_dataset(dataset, format, manifest)
    scenario_kwargs = {k: v for k, v in flags.items() if v is not None}
    schedule, _ = make_schedule(data, seed, **scenario_kwargs)
    write_trace(schedule, path)
    log.info(f'{len(schedule.events)} events written to {path}')


@cli.command('replay')
@options(COMMON_OPTIONS, PARTITION_OPTIONS)
@click.option(
    '--algo', type=click.Choice(['sdp', 'hash', 'ldg']), help='Algorithm. [sdp]'
)
@click.argument('trace', type=click.Path(exists=True, dir_okay=False))
def replay_cmd(trace, seed, out, **flags):
    """Partition the events of a JSON-lines trace.

    The sdp algorithm needs --maxcap or a --manifest to derive it from.
    """
    _, partition_kwargs = _prepare(flags)
    schedule = read_trace(trace)
    info = {'path': str(Path(trace).resolve()), 'events': len(schedule.events)}
    partition(
        schedule,
        out,
        seed,
        {'trace': info},
        **partition_kwargs,
    )


@cli.command('report')
@click.argument('csv_dir', type=click.Path(exists=True, file_okay=False))
def report_cmd(csv_dir):
    """Print the interval metrics of a comparison next to their differences.

    Differences are taken with respect to the first algorithm in CSV_DIR.
    """
    rows = report(csv_dir)
    click.echo(
        f'{"algo":<6} {"interval":>8} {"k":>4} {"cut":>8} {"d_cut":>8} '
        f'{"imbalance":>10} {"d_imb":>10}'
    )
    for row in rows:
        click.echo(
            f'{row["algo"]:<6} {row["interval"]:>8} {row["partitions"]:>4} '
            f'{row["edge_cut_ratio"]:>8.4f} {row["cut_delta"]:>+8.4f} '
            f'{row["load_imbalance"]:>10.2f} {row["imbalance_delta"]:>+10.2f}'
        )
