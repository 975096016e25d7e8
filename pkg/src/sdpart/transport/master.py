import logging
import multiprocessing
import socket
import time
from collections import namedtuple

from ..errors import MigrationAborted, TransportError, WorkerTimeout
from .protocol import (
    DELETE_EDGE,
    DELETE_VERTEX,
    DUMP_SHARD,
    HELLO,
    KIND_NAMES,
    MIGRATE_BATCH,
    PLACE_VERTEX,
    SHUTDOWN,
    WireMessage,
    recv_message,
    send_message,
)
from .worker import serve_worker

__all__ = [
    'WorkerRegistry',
    'Master',
    'LocalCluster',
    'master_dispatch',
    'migrate_over_wire',
]

log = logging.getLogger(__name__)

WorkerHandle = namedtuple('WorkerHandle', 'address last_seen')


class WorkerRegistry:
    """Endpoints of the workers, one per live partition."""

    def __init__(self):
        self.workers = {}

    def __contains__(self, p):
        return p in self.workers

    def __len__(self):
        return len(self.workers)

    @property
    def partitions(self):
        return sorted(self.workers)

    def address(self, p):
        return self.workers[p].address

    def register(self, p, address):
        if p in self.workers:
            raise TransportError(f'Partition {p} already has a worker')
        self.workers[p] = WorkerHandle(tuple(address), time.monotonic())

    def touch(self, p):
        self.workers[p] = self.workers[p]._replace(last_seen=time.monotonic())

    def unregister(self, p):
        return self.workers.pop(p)


class LocalCluster:
    """Spawns workers as local processes.

    Args:
        max_workers (int): bound on simultaneously running workers
        startup_timeout (float): seconds to wait for a worker to listen
    """

    def __init__(self, max_workers=None, *, startup_timeout=30.0):
        self.max_workers = max_workers
        self.startup_timeout = startup_timeout
        self._context = multiprocessing.get_context('spawn')
        self._processes = []

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def n_running(self):
        self._processes = [proc for proc in self._processes if proc.is_alive()]
        return len(self._processes)

    def spawn(self):
        """Start a worker and return its address."""
        if self.max_workers is not None and self.n_running >= self.max_workers:
            raise TransportError(f'All {self.max_workers} workers are busy')
        receiver, sender = self._context.Pipe(duplex=False)
        proc = self._context.Process(
            target=serve_worker, kwargs={'ready': sender}, daemon=True
        )
        proc.start()
        sender.close()
        if not receiver.poll(self.startup_timeout):
            proc.terminate()
            raise TransportError('Worker did not start in time')
        address = receiver.recv()
        receiver.close()
        self._processes.append(proc)
        return address

    def close(self, timeout=5.0):
        for proc in self._processes:
            proc.join(timeout)
            if proc.is_alive():
                proc.terminate()
                proc.join()
        self._processes = []


class Master:
    """Pushes the engine's placements to workers.

    The master acts as the dispatcher of an :class:`~sdpart.engine.Engine`:
    every placement, deletion and migration is acknowledged by the workers
    before the engine updates its summary. Each message carries a fresh seq;
    on timeout, the same message is resent up to *max_retries* times.

    Args:
        cluster: object whose ``spawn()`` starts a worker and returns its
            address, such as :class:`LocalCluster`
        timeout (float): seconds to wait for an acknowledgement
        max_retries (int): resends before giving up on a worker
    """

    def __init__(self, cluster, *, timeout=5.0, max_retries=3):
        self.cluster = cluster
        self.timeout = timeout
        self.max_retries = max_retries
        self.registry = WorkerRegistry()
        self._sockets = {}
        self._starting = {}
        self._seq = 0

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def next_seq(self):
        seq = self._seq
        self._seq += 1
        return seq

    def _connect(self, p, address):
        sock = socket.create_connection(address, timeout=self.timeout)
        self._sockets[p] = sock
        return sock

    def _disconnect(self, p):
        sock = self._sockets.pop(p, None)
        if sock:
            sock.close()

    def request(self, p, msg):
        """Send a message and wait for the reply with the same seq."""
        for attempt in range(self.max_retries + 1):
            if attempt:
                log.warning(
                    f'Resending {KIND_NAMES[msg.kind]} seq {msg.seq} to partition '
                    f'{p}, attempt {attempt + 1}'
                )
            try:
                sock = self._sockets.get(p) or self._connect(
                    p, self._address(p)
                )
                send_message(sock, msg)
                while True:
                    reply = recv_message(sock)
                    if reply is None:
                        raise ConnectionError('Worker closed the connection')
                    if reply.seq == msg.seq:
                        break
                    log.debug(f'Discarding stale reply seq {reply.seq}')
            except OSError as e:
                log.debug(f'No reply from partition {p}: {e}')
                self._disconnect(p)
                continue
            if p in self.registry:
                self.registry.touch(p)
            return reply
        raise WorkerTimeout(
            {'partition': p, 'seq': msg.seq, 'attempts': self.max_retries + 1}
        )

    def _address(self, p):
        if p in self.registry:
            return self.registry.address(p)
        return self._starting[p]

    def add_partition(self, p):
        address = self.cluster.spawn()
        self._starting[p] = address
        self._connect(p, address)
        master_dispatch(self, p, HELLO, partition=p)
        self.registry.register(p, self._starting.pop(p))
        log.info(f'Worker of partition {p} at {address[0]}:{address[1]}')

    def place_vertex(self, p, v, neighbors):
        master_dispatch(self, p, PLACE_VERTEX, vertex=v, neighbors=tuple(neighbors))

    def delete_vertex(self, p, v):
        for q in self.registry.partitions:
            master_dispatch(self, q, DELETE_VERTEX, vertex=v)

    def delete_edge(self, edge, partitions):
        for q in sorted(set(partitions)):
            master_dispatch(self, q, DELETE_EDGE, edge=tuple(edge))

    def migrate(self, plan, batch):
        migrate_over_wire(self, plan, batch)

    def collect_shards(self):
        """Fetch the contents of every worker.

        Returns:
            dict: partition -> vertex -> tuple of neighbors
        """
        return {
            p: dict(master_dispatch(self, p, DUMP_SHARD).batch)
            for p in self.registry.partitions
        }

    def close(self):
        for p in self.registry.partitions:
            try:
                master_dispatch(self, p, SHUTDOWN)
            except TransportError as e:
                log.warning(f'Worker of partition {p} did not shut down: {e}')
            self._disconnect(p)
            self.registry.unregister(p)


def master_dispatch(master, p, kind, **fields):
    """Send a message with a fresh seq to the worker of a partition.

    Returns:
        :class:`~sdpart.transport.protocol.WireMessage`: the reply

    Raises:
        :class:`~sdpart.errors.WorkerTimeout`: if the worker does not reply
    """
    return master.request(p, WireMessage(kind, master.next_seq(), **fields))


def migrate_over_wire(master, plan, batch):
    """Move a partition's shard to another worker and shut the source down.

    The batch is acknowledged by the destination before the source is told
    to drop its shard, and the registry is updated last.

    Args:
        master (:class:`Master`): connections to the workers
        plan (:class:`~sdpart.scaling.MigrationPlan`): source and destination
        batch (list): ``(vertex, neighbors)`` pairs to move

    Raises:
        :class:`~sdpart.errors.MigrationAborted`: if a worker stops replying
    """
    registry = master.registry
    for p in (plan.source, plan.destination):
        if p not in registry:
            raise TransportError(f'Partition {p} has no worker')
    stage = 'batch'
    try:
        if batch:
            master_dispatch(
                master,
                plan.destination,
                MIGRATE_BATCH,
                batch=tuple((v, tuple(nbrs)) for v, nbrs in batch),
            )
        stage = 'shutdown'
        master_dispatch(master, plan.source, SHUTDOWN)
    except WorkerTimeout as e:
        raise MigrationAborted(
            {
                'source': plan.source,
                'destination': plan.destination,
                'stage': stage,
                'vertices': len(batch),
            }
        ) from e
    master._disconnect(plan.source)
    registry.unregister(plan.source)
    log.info(
        f'Migrated {len(batch)} vertices from worker {plan.source} '
        f'to worker {plan.destination}'
    )
