import csv
import time
from collections import namedtuple
from pathlib import Path

import h5py
import numpy as np

from .utils import H5LogTable

__version__ = '0.1.0'
__all__ = [
    'MetricsRecord',
    'MetricsSeries',
    'edge_cut_ratio',
    'load_imbalance',
    'capture',
    'write_csv',
    'write_comparison',
    'read_csv',
    'write_h5',
    'write_log',
]

MetricsRecord = namedtuple(
    'MetricsRecord',
    'seq interval edge_cut_ratio load_imbalance partitions live_vertices '
    'live_edges elapsed_ms',
)


class MetricsSeries:
    """Records captured during a run.

    Attributes:
        records (list): one :class:`MetricsRecord` per interval boundary, plus
            a final one if the stream does not end on a boundary
        phase_records (list): records captured after each interval's additions,
            before its deletions
    """

    def __init__(self):
        self.records = []
        self.phase_records = []

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def edge_cut_ratio(summary):
    r"""Fraction of the live edges that cross partitions.

    .. math::
        \frac{|E(u,v)|}{|E|}
    """
    if summary.live_edges == 0:
        return 0.0
    return summary.cut_edges / summary.live_edges


def brute_force_edge_cut_ratio(summary):
    placement = summary.placement
    edges = list(summary.edges())
    if not edges:
        return 0.0
    return sum(placement[u] != placement[v] for u, v in edges) / len(edges)


def load_imbalance(summary):
    r"""Population standard deviation of the partition loads.

    .. math::
        \sqrt{\frac{\sum|e-\bar e|^2}{k}}
    """
    loads = [s.load for s in summary.stats.values()]
    return float(np.std(loads)) if loads else 0.0


def capture(summary, seq, interval, start):
    """Snapshot the metrics of a summary.

    Args:
        summary (:class:`~sdpart.summary.PartitionSummary`): state to measure
        seq (int): sequence number of the last processed event
        interval (int): index of the interval the record closes
        start (float): :func:`time.perf_counter` value at the start of the run
    """
    return MetricsRecord(
        seq,
        interval,
        edge_cut_ratio(summary),
        load_imbalance(summary),
        summary.k,
        summary.n_vertices,
        summary.live_edges,
        (time.perf_counter() - start) * 1000,
    )


def _format(field, value):
    if field == 'elapsed_ms':
        return f'{value:.3f}'
    return repr(value) if isinstance(value, float) else str(value)


def write_csv(records, path, algo=None):
    """Write metrics records with a header and a stable column order.

    Args:
        records (iterable): :class:`MetricsRecord` objects
        path (str): output file
        algo (str): if given, prefixed to every row in an ``algo`` column
    """
    write_comparison({algo: records}, path)


def write_comparison(records_by_algo, path):
    """Write the records of several algorithms into one CSV with an ``algo`` column.

    The column is omitted if the only algorithm is :data:`None`.
    """
    tagged = set(records_by_algo) != {None}
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow((['algo'] if tagged else []) + list(MetricsRecord._fields))
        for algo, records in records_by_algo.items():
            for record in records:
                row = [_format(k, v) for k, v in zip(record._fields, record)]
                writer.writerow(([algo] if tagged else []) + row)


def read_csv(path):
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


def write_h5(series, path):
    with h5py.File(Path(path), 'w') as f:
        for name, records in [
            ('intervals', series.records),
            ('phases', series.phase_records),
        ]:
            table = H5LogTable(f.require_group(name))
            for record in records:
                table.append(record._asdict())


def write_log(records, path, fields):
    """Write scaling or audit records as CSV under a fixed header."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(fields)
        for record in records:
            writer.writerow(_format(k, v) for k, v in zip(fields, record))
