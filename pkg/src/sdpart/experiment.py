import logging
import math
from pathlib import Path

from .engine import AuditRecord, EngineConfig, ScalingRecord, run_stream
from .errors import ConfigError, TransportError
from .io import write_run_manifest
from .metrics import read_csv, write_comparison, write_csv, write_h5, write_log
from .scaling import ScalingConfig
from .stream import ScenarioConfig, build_schedule
from .transport import LocalCluster, Master
from .utils import derive_seeds

__version__ = '0.1.0'
__all__ = ['make_schedule', 'partition', 'compare', 'report', 'default_maxcap']

log = logging.getLogger(__name__)

MODES = ('inproc', 'distributed')
SDP_ONLY = ('maxcap', 'tolerance_parameter', 'dest_param', 'gate_direction')


def default_maxcap(n_edges, k_target):
    r"""Partition capacity that lets a graph settle at about *k_target* partitions.

    .. math::
        C=\lceil 1.2|E|/k_\text{target}\rceil
    """
    return max(1, math.ceil(1.2 * n_edges / k_target))


def make_schedule(
    dataset,
    seed=0,
    *,
    add_percent=25,
    delete_vertex_percent=5,
    intervals=4,
    delete_edge_percent=0,
    shuffle=True,
    delete_stable_only=False,
):
    """Build the interval experiment of a dataset.

    The arrival order and the deletions are drawn from sub-seeds of *seed*,
    see :func:`~sdpart.utils.derive_seeds`.

    Args:
        dataset (:class:`~sdpart.graph.Dataset`): graph to stream
        seed (int): top-level seed of the run
        add_percent (float): vertices added per interval, in percent of the
            dataset
        delete_vertex_percent (float): vertices deleted per interval
        intervals (int): number of intervals
        delete_edge_percent (float): edges deleted per interval
        shuffle (bool): stream in a seeded random order instead of file order
        delete_stable_only (bool): never delete vertices of the current
            interval

    Returns:
        tuple: :class:`~sdpart.stream.Schedule` and its
        :class:`~sdpart.stream.ScenarioConfig`
    """
    seeds = derive_seeds(seed)
    scenario = ScenarioConfig(
        add_percent=add_percent,
        delete_vertex_percent=delete_vertex_percent,
        intervals=intervals,
        delete_edge_percent=delete_edge_percent,
        order_seed=seeds['order'] if shuffle else None,
        delete_seed=seeds['delete'],
        delete_stable_only=delete_stable_only,
    )
    return build_schedule(dataset, scenario), scenario


def _final_k(schedule, seed, **kwargs):
    engine, _ = partition(schedule, seed=seed, progress=False, **kwargs)
    return engine.summary.k


def partition(  # noqa: C901
    schedule,
    workdir=None,
    seed=0,
    run_info=None,
    progress=True,
    *,
    algo='sdp',
    maxcap=None,
    tolerance_parameter=20,
    dest_param=5,
    gate_direction='prose',
    partitions=None,
    ldg_slack=1.1,
    audit=False,
    mode='inproc',
    workers=None,
):
    r"""Partition a schedule.

    This is the main top-level entry point of the package. It configures an
    :class:`~sdpart.engine.Engine`, streams the schedule through it with
    :func:`~sdpart.engine.run_stream`, and optionally writes the run directory.

    Args:
        schedule (:class:`~sdpart.stream.Schedule`): events and marks
        workdir (str): where to write ``manifest.toml``, ``metrics.csv``,
            ``phases.csv``, ``scaling.csv``, ``assignments.csv``,
            ``metrics.h5`` and, with *audit*, ``audit.csv``
        seed (int): top-level seed, the random placement uses its
            ``'assign'`` sub-seed
        run_info (dict): extra tables for the run manifest
        progress (bool): show a progress bar
        algo (str): ``'sdp'``, ``'hash'`` or ``'ldg'``
        maxcap (int): edge capacity of a partition, :data:`None` disables
            elastic scaling
        tolerance_parameter (float): scale-in threshold in percent of *maxcap*
        dest_param (float): capacity in percent of *maxcap* a migration
            destination keeps free
        gate_direction (str): when the balancing gate intervenes

            - ``'prose'`` -- if the average load difference exceeds the
              threshold
            - ``'listing'`` -- in the opposite case
            - ``'none'`` -- never
        partitions (int): initial partition count of ``'sdp'``, the fixed
            partition count of a baseline; baselines default to the final
            count of an ``'sdp'`` run of the same schedule
        ldg_slack (float): vertex capacity of ``'ldg'`` relative to the
            balanced share :math:`n/k`
        audit (bool): record every placement decision
        mode (str): ``'inproc'`` or ``'distributed'``, which pushes every
            placement to worker processes
        workers (int): bound on the worker processes in distributed mode

    Returns:
        tuple: the final :class:`~sdpart.engine.Engine` and its
        :class:`~sdpart.metrics.MetricsSeries`
    """
    if mode not in MODES:
        raise ConfigError(f'Unknown mode: {mode!r}')
    seeds = derive_seeds(seed)
    if algo == 'sdp':
        scaling = (
            ScalingConfig(
                maxcap,
                tolerance_parameter=tolerance_parameter,
                dest_param=dest_param,
            )
            if maxcap
            else None
        )
        config = EngineConfig(
            scaling,
            gate_direction=gate_direction,
            rng_seed=seeds['assign'],
            audit=audit,
            partitions=partitions or 1,
        )
    else:
        if partitions is None:
            partitions = _final_k(
                schedule,
                seed,
                maxcap=maxcap,
                tolerance_parameter=tolerance_parameter,
                dest_param=dest_param,
                gate_direction=gate_direction,
            )
            log.info(f'Running {algo} at k = {partitions} of the sdp run')
        n_added = sum(1 for event in schedule.events if event.kind == 'add')
        config = EngineConfig(
            algo=algo,
            rng_seed=seeds['assign'],
            audit=audit,
            partitions=partitions,
            ldg_capacity=max(1.0, ldg_slack * n_added / partitions),
        )
    if workdir:
        workdir = Path(workdir)
        workdir.mkdir(parents=True, exist_ok=True)
        log.info(f'Will work in {workdir}')
        write_run_manifest(
            workdir,
            {
                'sdpart': {'version': __version__},
                'seed': seed,
                'sub_seeds': seeds,
                'mode': mode,
                'engine': config.as_dict(),
                **(run_info or {}),
            },
        )
    stream_kwargs = {
        'interval_marks': schedule.interval_marks,
        'phase_marks': schedule.phase_marks,
        'progress': progress,
    }
    if mode == 'inproc':
        engine, series = run_stream(schedule.events, config, **stream_kwargs)
    else:
        with LocalCluster(workers) as cluster, Master(cluster) as master:
            engine, series = run_stream(
                schedule.events, config, dispatcher=master, **stream_kwargs
            )
            shards = master.collect_shards()
        if shards != engine.summary.shards():
            raise TransportError('Worker shards diverged from the summary')
        log.info(f'Shards of {len(shards)} workers match the summary')
    if workdir:
        write_csv(series.records, workdir / 'metrics.csv')
        write_csv(series.phase_records, workdir / 'phases.csv')
        write_log(engine.scaling_log, workdir / 'scaling.csv', ScalingRecord._fields)
        engine.summary.write_assignments(workdir / 'assignments.csv')
        write_h5(series, workdir / 'metrics.h5')
        if audit:
            write_log(engine.audit_log, workdir / 'audit.csv', AuditRecord._fields)
    return engine, series


def compare(
    schedule, workdir, seed=0, run_info=None, *, algos=('sdp', 'hash', 'ldg'), **kwargs
):
    """Run several algorithms on the identical schedule.

    The first algorithm sets the partition count of the others unless
    *partitions* is given. Each run is written to ``workdir/<algo>`` and the
    interval records of all of them to ``workdir/compare.csv`` with an
    ``algo`` column.

    Args:
        kwargs: passed to :func:`partition`

    Returns:
        dict: algorithm -> :class:`~sdpart.metrics.MetricsSeries`
    """
    workdir = Path(workdir)
    results = {}
    partitions = kwargs.pop('partitions', None)
    for algo in algos:
        algo_kwargs = dict(kwargs)
        if algo != 'sdp':
            for key in SDP_ONLY:
                algo_kwargs.pop(key, None)
        engine, series = partition(
            schedule,
            workdir / algo,
            seed,
            run_info,
            algo=algo,
            partitions=partitions,
            **algo_kwargs,
        )
        if partitions is None:
            partitions = engine.summary.k
        results[algo] = series
    write_comparison(
        {algo: series.records for algo, series in results.items()},
        workdir / 'compare.csv',
    )
    return results


def report(csv_dir):
    """Compare the interval records of the algorithms of a comparison.

    Args:
        csv_dir (str): output directory of :func:`compare`

    Returns:
        list: one dict per algorithm and record, with the differences of
        edge-cut ratio and load imbalance to the first algorithm
    """
    rows = read_csv(Path(csv_dir) / 'compare.csv')
    by_algo = {}
    for row in rows:
        by_algo.setdefault(row['algo'], []).append(row)
    reference = next(iter(by_algo.values()), [])
    table = []
    for algo, records in by_algo.items():
        for ref, row in zip(reference, records):
            cut = float(row['edge_cut_ratio'])
            imbalance = float(row['load_imbalance'])
            table.append(
                {
                    'algo': algo,
                    'interval': int(row['interval']),
                    'partitions': int(row['partitions']),
                    'edge_cut_ratio': cut,
                    'load_imbalance': imbalance,
                    'cut_delta': cut - float(ref['edge_cut_ratio']),
                    'imbalance_delta': imbalance - float(ref['load_imbalance']),
                }
            )
    return table

