import logging
import math
from collections import Counter, namedtuple

import numpy as np

from .errors import DuplicatePlacementError, PartitionError

__version__ = '0.1.0'
__all__ = [
    'AssignmentDecision',
    'BalanceSnapshot',
    'connectivity',
    'find_minimum_load',
    'balance_snapshot',
    'assign_vertex',
]

log = logging.getLogger(__name__)

GATE_DIRECTIONS = ('prose', 'listing', 'none')

AssignmentDecision = namedtuple('AssignmentDecision', 'partition reason connectivity')
AssignmentDecision.__doc__ = """Outcome of placing one vertex.

The *reason* is one of ``'max-connectivity'``, ``'tie-min-load'``,
``'random'``, ``'balance-min-load'``, or the name of a baseline.
"""

BalanceSnapshot = namedtuple(
    'BalanceSnapshot', 'avg_d load_dev w_dev th edges_seen cuts_seen intervene'
)


def connectivity(summary, p, neighbors):
    r"""Count the arriving edges that end in partition *p*.

    .. math::
        |E(v)\cap P_p|
    """
    placement = summary.placement
    return sum(1 for u in set(neighbors) if placement.get(u) == p)


def find_minimum_load(stats):
    """Return the partition with the smallest load, the lowest id on ties.

    Args:
        stats (dict): partition id -> :class:`~sdpart.summary.PartitionStats`
    """
    if not stats:
        raise PartitionError('No live partition')
    return min(stats, key=lambda p: (stats[p].load, p))


def balance_snapshot(stats, edges_seen, cuts_seen, gate_direction='prose'):
    r"""Evaluate the communication-aware balancing gate.

    .. math::
        \mathrm{AVG}_d=(P_h-P_l)/k,\quad
        W_\text{dev}=\frac{\text{edges}}{\text{cuts}}\,\mathrm{Load}_\text{dev},\quad
        \mathrm{TH}=W_\text{dev}-\mathrm{Load}_\text{dev}

    where :math:`\mathrm{Load}_\text{dev}` is the population standard deviation
    of the partition loads. Without any cut edges the threshold is infinite.

    Args:
        stats (dict): partition id -> :class:`~sdpart.summary.PartitionStats`
        edges_seen (int): half-edges arrived so far, deleted ones included
        cuts_seen (int): edges currently cut
        gate_direction (str): when the gate intervenes

            - ``'prose'`` -- if :math:`\mathrm{AVG}_d>\mathrm{TH}`
            - ``'listing'`` -- if :math:`\mathrm{AVG}_d\le\mathrm{TH}`
            - ``'none'`` -- never
    """
    assert gate_direction in GATE_DIRECTIONS
    loads = np.array([s.load for s in stats.values()], dtype=float)
    load_dev = float(loads.std())
    avg_d = float(loads.max() - loads.min()) / len(loads)
    w_dev = edges_seen / cuts_seen * load_dev if cuts_seen > 0 else math.inf
    th = w_dev - load_dev
    if gate_direction == 'prose':
        intervene = avg_d > th
    elif gate_direction == 'listing':
        intervene = avg_d <= th
    else:
        intervene = False
    return BalanceSnapshot(avg_d, load_dev, w_dev, th, edges_seen, cuts_seen, intervene)


def assign_vertex(summary, v, neighbors, snapshot, rng):
    """Choose a partition for an arriving vertex without placing it.

    If the balancing gate intervenes, the least loaded partition is chosen.
    Otherwise the vertex goes to the partition holding most of its neighbors,
    ties are resolved towards the least loaded of the tied partitions, and
    a vertex with no placed neighbor goes to a uniformly random partition.

    Args:
        summary (:class:`~sdpart.summary.PartitionSummary`): current state
        v (int): arriving vertex
        neighbors (iterable): edges arriving with *v*
        snapshot (:class:`BalanceSnapshot`): gate evaluation, or :data:`None`
            with a single partition
        rng (:class:`numpy.random.Generator`): source of the random fallback
    """
    if v in summary.placement:
        raise DuplicatePlacementError(f'Vertex {v} is already placed')
    stats = summary.stats
    if snapshot is not None and snapshot.intervene:
        p = find_minimum_load(stats)
        return AssignmentDecision(
            p, 'balance-min-load', connectivity(summary, p, neighbors)
        )
    placement = summary.placement
    counts = Counter(placement[u] for u in set(neighbors) if u in placement)
    best = max(counts.values(), default=0)
    if best == 0:
        partitions = summary.partitions
        p = partitions[int(rng.integers(len(partitions)))]
        return AssignmentDecision(p, 'random', 0)
    tied = {p: stats[p] for p, c in counts.items() if c == best}
    if len(tied) == 1:
        return AssignmentDecision(next(iter(tied)), 'max-connectivity', best)
    return AssignmentDecision(find_minimum_load(tied), 'tie-min-load', best)
