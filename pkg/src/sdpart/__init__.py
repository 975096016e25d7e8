from .engine import Engine, EngineConfig, run_stream
from .experiment import compare, make_schedule, partition
from .graph import Dataset, GraphEvent, parse_edge_list
from .summary import PartitionSummary

__all__ = [
    'Dataset',
    'Engine',
    'EngineConfig',
    'GraphEvent',
    'PartitionSummary',
    'compare',
    'make_schedule',
    'parse_edge_list',
    'partition',
    'run_stream',
]
