import json
import logging
import queue
import threading
from collections import namedtuple
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError, ReplayError, ScheduleError
from .graph import ADD, DELETE_EDGE, DELETE_VERTEX, Edge, GraphEvent

__version__ = '0.1.0'
__all__ = [
    'ScenarioConfig',
    'Schedule',
    'ReplayReport',
    'build_schedule',
    'replay',
    'write_trace',
    'read_trace',
]

log = logging.getLogger(__name__)

Schedule = namedtuple('Schedule', 'events interval_marks phase_marks')
Schedule.__new__.__defaults__ = ((), ())
Schedule.__doc__ = """Ordered mutation stream of an experiment.

Marks are positions in :attr:`events`, i.e. the number of events delivered
when the mark fires. Interval marks close an interval, phase marks follow
the additions of an interval.
"""

ReplayReport = namedtuple('ReplayReport', 'delivered last_seq')

_END = object()


class ScenarioConfig:
    """Interval experiment: per interval, add a share of the dataset's vertices,
    then delete a share of it.

    All percentages are relative to the whole dataset.

    Args:
        add_percent (float): vertices added per interval
        delete_vertex_percent (float): vertices deleted per interval
        intervals (int): number of intervals
        delete_edge_percent (float): edges deleted per interval, after the
            vertex deletions
        order_seed (int): seed of the arrival permutation, file order if
            :data:`None`
        delete_seed (int): seed of the deletion sampling
        delete_stable_only (bool): never delete vertices added in the same
            interval
    """

    def __init__(
        self,
        *,
        add_percent=25,
        delete_vertex_percent=5,
        intervals=4,
        delete_edge_percent=0,
        order_seed=None,
        delete_seed=0,
        delete_stable_only=False,
    ):
        for name, value in [
            ('add_percent', add_percent),
            ('delete_vertex_percent', delete_vertex_percent),
            ('delete_edge_percent', delete_edge_percent),
        ]:
            if not 0 <= value <= 100:
                raise ConfigError(f'{name} must be within [0, 100], got {value}')
        if intervals < 1:
            raise ConfigError(f'intervals must be positive, got {intervals}')
        if intervals * add_percent > 100:
            raise ConfigError(
                f'{intervals} intervals of {add_percent}% exceed the dataset'
            )
        self.add_percent = add_percent
        self.delete_vertex_percent = delete_vertex_percent
        self.intervals = intervals
        self.delete_edge_percent = delete_edge_percent
        self.order_seed = order_seed
        self.delete_seed = delete_seed
        self.delete_stable_only = delete_stable_only

    def __setattr__(self, name, value):
        if name in self.__dict__:
            raise AttributeError(f'ScenarioConfig is immutable: {name}')
        super().__setattr__(name, value)

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


def _per_interval(total, percent, intervals):
    per = int(total * percent // 100)
    overall = int(total * percent * intervals // 100)
    return [per] * (intervals - 1) + [overall - per * (intervals - 1)]


def build_schedule(dataset, cfg):
    r"""Turn a dataset into the event stream of an interval experiment.

    Each interval adds the next slice of the arrival order, every vertex with
    its full adjacency, then deletes vertices sampled uniformly from the live
    ones, then deletes edges sampled uniformly from the live ones. The counts
    are

    .. math::
        n_\text{add}=\lfloor N\cdot\text{add}/100\rfloor,\quad
        n_\text{del}=\lfloor N\cdot\text{delete}/100\rfloor

    with the last interval absorbing the remainder.

    Args:
        dataset (:class:`~sdpart.graph.Dataset`): graph to stream
        cfg (:class:`ScenarioConfig`): scenario

    Raises:
        :class:`~sdpart.errors.ScheduleError`: if an interval deletes more
            than is live
    """
    n = len(dataset)
    order = dataset.order(cfg.order_seed)
    n_adds = _per_interval(n, cfg.add_percent, cfg.intervals)
    n_dels = _per_interval(n, cfg.delete_vertex_percent, cfg.intervals)
    n_edge_dels = _per_interval(
        dataset.n_edges, cfg.delete_edge_percent, cfg.intervals
    )
    rng = np.random.default_rng(cfg.delete_seed)
    events, interval_marks, phase_marks = [], [], []
    live, deleted_edges = {}, set()
    cursor = 0
    for i, (n_add, n_del, n_edge_del) in enumerate(zip(n_adds, n_dels, n_edge_dels)):
        added = order[cursor : cursor + n_add]
        cursor += n_add
        for v in added:
            events.append(GraphEvent.add(len(events), v, dataset.adjacency[v]))
            live[v] = None
        phase_marks.append(len(events))
        fresh = set(added) if cfg.delete_stable_only else set()
        candidates = [v for v in live if v not in fresh]
        if n_del > len(candidates):
            raise ScheduleError(
                f'Interval {i}: cannot delete {n_del} of {len(candidates)} '
                'live vertices'
            )
        for idx in rng.choice(len(candidates), n_del, replace=False):
            v = candidates[idx]
            events.append(GraphEvent.delete_vertex(len(events), v))
            del live[v]
        if n_edge_del:
            edges = [
                Edge(v, u)
                for v in sorted(live)
                for u in dataset.adjacency[v]
                if v < u and u in live and (v, u) not in deleted_edges
            ]
            if n_edge_del > len(edges):
                raise ScheduleError(
                    f'Interval {i}: cannot delete {n_edge_del} of {len(edges)} '
                    'live edges'
                )
            for idx in rng.choice(len(edges), n_edge_del, replace=False):
                edge = edges[idx]
                events.append(GraphEvent.delete_edge(len(events), *edge))
                deleted_edges.add(edge)
        interval_marks.append(len(events))
        log.debug(
            f'Interval {i}: {n_add} additions, {n_del} vertex deletions, '
            f'{n_edge_del} edge deletions, {len(live)} live vertices'
        )
    return Schedule(events, interval_marks, phase_marks)


def replay(schedule, sink, *, on_interval=None, on_phase=None, queue_size=1024):
    """Deliver a schedule to a sink in order.

    The events are produced on a separate thread into a bounded queue and
    consumed on the calling thread, which also fires the mark callbacks with
    the number of events delivered so far.

    Args:
        schedule (:class:`Schedule`): events and marks
        sink (callable): consumer of a single event
        on_interval (callable): called at interval marks
        on_phase (callable): called at phase marks
        queue_size (int): capacity of the delivery queue

    Returns:
        :class:`ReplayReport`

    Raises:
        :class:`~sdpart.errors.ReplayError`: with the failing and the last
            delivered seq if the sink raises
    """
    events = queue.Queue(maxsize=queue_size)
    stop = threading.Event()

    def put(item):
        while not stop.is_set():
            try:
                events.put(item, timeout=0.1)
            except queue.Full:
                continue
            return True
        return False

    def produce():
        for event in schedule.events:
            if not put(event):
                return
        put(_END)

    producer = threading.Thread(target=produce, name='stream-generator', daemon=True)
    producer.start()
    interval_marks = set(schedule.interval_marks)
    phase_marks = set(schedule.phase_marks)
    delivered, last_seq = 0, None
    try:
        while True:
            event = events.get()
            if event is _END:
                break
            try:
                sink(event)
            except Exception as e:
                raise ReplayError({'seq': event.seq, 'last_seq': last_seq}) from e
            delivered += 1
            last_seq = event.seq
            if on_phase and delivered in phase_marks:
                on_phase(delivered)
            if on_interval and delivered in interval_marks:
                on_interval(delivered)
    finally:
        stop.set()
        producer.join()
    return ReplayReport(delivered, last_seq)


def _event_to_json(event):
    if event.kind == ADD:
        obj = {
            'seq': event.seq,
            'op': ADD,
            'v': event.vertex,
            'nbrs': event.neighbors,
        }
    elif event.kind == DELETE_VERTEX:
        obj = {'seq': event.seq, 'op': DELETE_VERTEX, 'v': event.vertex}
    else:
        u, w = event.edge
        obj = {'seq': event.seq, 'op': DELETE_EDGE, 'u': u, 'w': w}
    return json.dumps(obj, separators=(',', ':'))


def write_trace(schedule, path):
    """Write a schedule as JSON lines, marks as ``{"op":"mark"}`` lines."""
    marks = {}
    for kind, positions in [
        ('phase', schedule.phase_marks),
        ('interval', schedule.interval_marks),
    ]:
        for at in positions:
            marks.setdefault(at, []).append(kind)

    def mark_lines(at):
        for kind in marks.get(at, ()):
            mark = {'op': 'mark', 'at': at, 'kind': kind}
            yield json.dumps(mark, separators=(',', ':'))

    lines = list(mark_lines(0))
    for i, event in enumerate(schedule.events, 1):
        lines.append(_event_to_json(event))
        lines.extend(mark_lines(i))
    Path(path).write_text(''.join(f'{line}\n' for line in lines))


def read_trace(path):
    """Read a schedule written by :func:`write_trace`."""
    events, interval_marks, phase_marks = [], [], []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                op = obj['op']
                if op == 'mark':
                    marks = interval_marks if obj['kind'] == 'interval' else phase_marks
                    marks.append(int(obj['at']))
                    continue
                seq = int(obj['seq'])
                if op == ADD:
                    event = GraphEvent.add(seq, int(obj['v']), map(int, obj['nbrs']))
                elif op == DELETE_VERTEX:
                    event = GraphEvent.delete_vertex(seq, int(obj['v']))
                elif op == DELETE_EDGE:
                    event = GraphEvent.delete_edge(seq, int(obj['u']), int(obj['w']))
                else:
                    raise ValueError(f'unknown op {op!r}')
            except (ValueError, KeyError, TypeError) as e:
                raise ParseError({'path': str(path), 'line': lineno, 'reason': str(e)})
            if events and seq <= events[-1].seq:
                raise ParseError(
                    {'path': str(path), 'line': lineno, 'reason': 'seq not increasing'}
                )
            events.append(event)
    return Schedule(events, interval_marks, phase_marks)
