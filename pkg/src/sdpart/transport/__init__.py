from .master import (
    LocalCluster,
    Master,
    WorkerRegistry,
    master_dispatch,
    migrate_over_wire,
)
from .protocol import WireMessage, decode, encode
from .worker import ShardStore, serve_worker

__all__ = [
    'LocalCluster',
    'Master',
    'ShardStore',
    'WireMessage',
    'WorkerRegistry',
    'decode',
    'encode',
    'master_dispatch',
    'migrate_over_wire',
    'serve_worker',
]
