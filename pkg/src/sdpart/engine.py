import logging
import time
from collections import namedtuple

import numpy as np
from tqdm.auto import tqdm

from .assign import GATE_DIRECTIONS, assign_vertex, balance_snapshot
from .baselines import BASELINES
from .errors import (
    ConfigError,
    DuplicatePlacementError,
    EventError,
    OrderingError,
    ReplayError,
)
from .graph import ADD, DELETE_EDGE, DELETE_VERTEX
from .metrics import MetricsSeries, capture
from .scaling import (
    ScalingConfig,
    add_partition,
    scale_in,
    should_scale_out,
)
from .stream import Schedule, replay
from .summary import PartitionSummary

__version__ = '0.1.0'
__all__ = ['EngineConfig', 'Engine', 'run_stream']

log = logging.getLogger(__name__)

ALGOS = ('sdp', *BASELINES)

ScalingRecord = namedtuple(
    'ScalingRecord', 'seq action partition_id k_after total_edges'
)
AuditRecord = namedtuple(
    'AuditRecord', 'seq vertex partition reason connectivity avg_d th'
)


class EngineConfig:
    """Configuration of a partitioning run.

    Args:
        scaling (:class:`~sdpart.scaling.ScalingConfig`): capacity constraints,
            :data:`None` runs at a fixed partition count
        gate_direction (str): ``'prose'``, ``'listing'`` or ``'none'``, see
            :func:`~sdpart.assign.balance_snapshot`
        rng_seed (int): seed of the random placement fallback
        audit (bool): record every placement decision
        algo (str): ``'sdp'`` or the name of a baseline in
            :data:`~sdpart.baselines.BASELINES`
        partitions (int): number of partitions at the start of the run
        ldg_capacity (float): vertex capacity of a partition for ``'ldg'``
    """

    def __init__(
        self,
        scaling=None,
        *,
        gate_direction='prose',
        rng_seed=0,
        audit=False,
        algo='sdp',
        partitions=1,
        ldg_capacity=None,
    ):
        if algo not in ALGOS:
            raise ConfigError(f'Unknown algorithm: {algo!r}')
        if gate_direction not in GATE_DIRECTIONS:
            raise ConfigError(f'Unknown gate direction: {gate_direction!r}')
        if scaling is not None and not isinstance(scaling, ScalingConfig):
            raise TypeError(f'Expected a ScalingConfig, got {scaling!r}')
        if algo != 'sdp' and scaling is not None:
            raise ConfigError(f'Baseline {algo!r} runs at a fixed partition count')
        if partitions < 1:
            raise ConfigError(f'partitions must be positive, got {partitions}')
        if algo == 'ldg' and not (ldg_capacity and ldg_capacity > 0):
            raise ConfigError('ldg requires a positive ldg_capacity')
        self.scaling = scaling
        self.gate_direction = gate_direction
        self.rng_seed = rng_seed
        self.audit = audit
        self.algo = algo
        self.partitions = partitions
        self.ldg_capacity = ldg_capacity

    def __setattr__(self, name, value):
        if name in self.__dict__:
            raise AttributeError(f'EngineConfig is immutable: {name}')
        super().__setattr__(name, value)

    def as_dict(self):
        d = {
            k: v
            for k, v in self.__dict__.items()
            if k != 'scaling' and v is not None
        }
        if self.scaling:
            d['scaling'] = self.scaling.as_dict()
        return d


class Engine:
    """Single writer of the partition summary.

    Events are applied strictly in stream order. An optional dispatcher is
    informed of every placement, deletion and migration before the summary is
    mutated, and may raise to abort the run. It must provide
    ``add_partition(p)``, ``place_vertex(p, v, neighbors)``,
    ``delete_vertex(p, v)``, ``delete_edge(edge, partitions)`` and
    ``migrate(plan, batch)``. ``place_vertex`` overwrites the stored adjacency
    of a vertex; it receives the resolved neighbors of an arriving vertex, and
    again every placed neighbor whose adjacency gains the new vertex.

    Args:
        config (:class:`EngineConfig`): run configuration
        dispatcher: see above

    Attributes:
        edges_seen (int): half-edges stored for arriving vertices, including
            back-references to placed neighbors and half-edges deleted since
        deleted_half_edges (int): half-edges removed by deletions, or dropped
            on arrival because their other endpoint was deleted before
    """

    def __init__(self, config, dispatcher=None):
        self.config = config
        self.dispatcher = dispatcher
        self.summary = PartitionSummary(config.partitions)
        self.rng = np.random.default_rng(config.rng_seed)
        self.event_count = 0
        self.edges_seen = 0
        self.deleted_half_edges = 0
        self.scaling_log = []
        self.audit_log = []
        if dispatcher:
            for p in self.summary.partitions:
                dispatcher.add_partition(p)

    def __repr__(self):
        return (
            f'Engine(algo={self.config.algo!r}, events={self.event_count}, '
            f'{self.summary!r})'
        )

    @property
    def stats(self):
        return self.summary.stats

    @property
    def cuts_seen(self):
        """Currently cut edges, kept up to date by the summary."""
        return self.summary.cut_edges

    @property
    def warn_count(self):
        return self.summary.warn_count

    def process_event(self, event):
        """Apply the next event of the stream.

        Returns:
            :class:`~sdpart.assign.AssignmentDecision` for additions,
            :data:`None` otherwise.

        Raises:
            :class:`~sdpart.errors.OrderingError`: if the event is not the next
                one in the stream
        """
        if event.seq != self.event_count:
            raise OrderingError({'expected': self.event_count, 'seq': event.seq})
        decision = None
        if event.kind == ADD:
            decision = self._add(event)
        elif event.kind == DELETE_VERTEX:
            self._delete_vertex(event.vertex)
        elif event.kind == DELETE_EDGE:
            self._delete_edge(event.edge)
        else:
            raise ValueError(f'Unknown event kind: {event.kind!r}')
        self.event_count += 1
        return decision

    def _add(self, event):
        config, summary = self.config, self.summary
        v, neighbors = event.vertex, event.neighbors
        if v in summary:
            raise DuplicatePlacementError(
                f'Vertex {v} is already placed in partition {summary.placement[v]}'
            )
        if config.scaling and should_scale_out(
            summary.live_edges, summary.k, config.scaling
        ):
            p = add_partition(summary)
            if self.dispatcher:
                self.dispatcher.add_partition(p)
            self.scaling_log.append(
                ScalingRecord(event.seq, 'add', p, summary.k, summary.live_edges)
            )
        snapshot = None
        if config.algo == 'sdp':
            if summary.k > 1:
                snapshot = balance_snapshot(
                    summary.stats,
                    self.edges_seen,
                    self.cuts_seen,
                    config.gate_direction,
                )
            decision = assign_vertex(summary, v, neighbors, snapshot, self.rng)
        else:
            decision = BASELINES[config.algo].entry(summary, v, neighbors, config)
        stored, relinked = summary.resolve_arrival(v, neighbors)
        if self.dispatcher:
            self.dispatcher.place_vertex(decision.partition, v, sorted(stored))
            for u in sorted(relinked):
                self.dispatcher.place_vertex(
                    summary.placement[u], u, sorted(summary.neighbors(u) | {v})
                )
        half_edges = summary.half_edges
        summary.place_vertex(decision.partition, v, neighbors)
        dropped = len(set(neighbors) - {v} - stored)
        self.edges_seen += summary.half_edges - half_edges + dropped
        self.deleted_half_edges += dropped
        if config.audit:
            self.audit_log.append(
                AuditRecord(
                    event.seq,
                    v,
                    decision.partition,
                    decision.reason,
                    decision.connectivity,
                    snapshot.avg_d if snapshot else 0.0,
                    snapshot.th if snapshot else float('inf'),
                )
            )
        return decision

    def _delete_vertex(self, v):
        if self.dispatcher and v in self.summary:
            self.dispatcher.delete_vertex(self.summary.placement[v], v)
        half_edges = self.summary.half_edges
        self.summary.delete_vertex(v)
        self.deleted_half_edges += half_edges - self.summary.half_edges

    def _delete_edge(self, edge):
        placement = self.summary.placement
        holders = [placement[x] for x in edge if x in placement]
        if self.dispatcher and holders:
            self.dispatcher.delete_edge(edge, holders)
        half_edges = self.summary.half_edges
        self.summary.delete_edge(edge)
        self.deleted_half_edges += half_edges - self.summary.half_edges

    def scale_in(self):
        """Drain underloaded partitions until no migration plan qualifies.

        Every plan is pushed to the dispatcher before it is executed.

        Returns:
            list: executed :class:`~sdpart.scaling.MigrationPlan` objects
        """
        scaling = self.config.scaling
        if scaling is None:
            return []
        summary = self.summary

        def dispatch(plan):
            batch = [(v, sorted(summary.neighbors(v))) for v in plan.vertices]
            self.dispatcher.migrate(plan, batch)

        def record(plan):
            self.scaling_log.append(
                ScalingRecord(
                    self.event_count - 1,
                    'retire',
                    plan.source,
                    summary.k,
                    summary.live_edges,
                )
            )

        return scale_in(
            summary,
            scaling,
            before=dispatch if self.dispatcher else None,
            after=record,
        )


def run_stream(
    events,
    config,
    *,
    interval_marks=(),
    phase_marks=(),
    hooks=(),
    dispatcher=None,
    progress=True,
):
    """Partition an event stream.

    At every interval mark, underloaded partitions are scaled in and a metrics
    record is captured; phase marks capture a record without scaling. A final
    record is captured if the stream does not end on an interval mark.

    Args:
        events (list): :class:`~sdpart.graph.GraphEvent` objects in seq order
        config (:class:`EngineConfig`): run configuration
        interval_marks (list): positions closing the intervals
        phase_marks (list): positions following the additions of an interval
        hooks (list): callables ``hook(engine, record)`` invoked after every
            interval capture
        dispatcher: see :class:`Engine`
        progress (bool): show a progress bar

    Returns:
        tuple: the final :class:`Engine` and its
        :class:`~sdpart.metrics.MetricsSeries`

    Raises:
        :class:`~sdpart.errors.EventError`: with the seq of the failing event,
            the original error chained
    """
    start = time.perf_counter()
    engine = Engine(config, dispatcher)
    series = MetricsSeries()
    interval = 0

    def on_phase(position):
        record = capture(engine.summary, position - 1, interval + 1, start)
        series.phase_records.append(record)

    def on_interval(position):
        nonlocal interval
        interval += 1
        engine.scale_in()
        record = capture(engine.summary, position - 1, interval, start)
        series.records.append(record)
        log.info(
            f'Interval {interval}: cut ratio {record.edge_cut_ratio:.4f}, '
            f'imbalance {record.load_imbalance:.2f}, k = {record.partitions}'
        )
        for hook in hooks:
            hook(engine, record)

    log.info(f'Streaming {len(events)} events with {config.algo}')
    with tqdm(
        total=len(events),
        desc=config.algo,
        unit='ev',
        disable=None if progress else True,
    ) as steps:

        def sink(event):
            engine.process_event(event)
            steps.update()

        try:
            replay(
                Schedule(events, interval_marks, phase_marks),
                sink,
                on_interval=on_interval,
                on_phase=on_phase,
            )
        except ReplayError as e:
            raise EventError({'seq': e.info['seq']}) from e.__cause__
    if events and (not series.records or series.records[-1].seq != events[-1].seq):
        series.records.append(
            capture(engine.summary, events[-1].seq, interval + 1, start)
        )
    log.info(
        f'Done: k = {engine.summary.k}, {engine.summary.n_vertices} vertices, '
        f'{engine.summary.live_edges} edges, {engine.warn_count} warnings'
    )
    return engine, series
