import logging
import socket

from ..errors import TransportError
from .protocol import (
    ACK,
    DELETE_EDGE,
    DELETE_VERTEX,
    DUMP_SHARD,
    HELLO,
    KIND_NAMES,
    MIGRATE_BATCH,
    PLACE_VERTEX,
    SHARD,
    SHUTDOWN,
    WireMessage,
    recv_message,
    send_message,
)

__all__ = ['ShardStore', 'serve_worker']

log = logging.getLogger(__name__)


class ShardStore:
    """Vertices and adjacency held by one worker.

    Messages are applied at most once per seq; a redelivered message is
    acknowledged again without touching the shard.
    """

    def __init__(self):
        self.partition = None
        self.vertices = {}
        self._applied = set()

    def __len__(self):
        return len(self.vertices)

    def apply(self, msg):
        """Apply a master message and return the reply."""
        if msg.kind == DUMP_SHARD:
            batch = tuple(
                (v, tuple(sorted(nbrs))) for v, nbrs in sorted(self.vertices.items())
            )
            return WireMessage(SHARD, msg.seq, batch=batch)
        if msg.seq in self._applied:
            log.debug(f'Redelivered {KIND_NAMES[msg.kind]} seq {msg.seq}')
            return WireMessage(ACK, msg.seq)
        if msg.kind == HELLO:
            self.partition = msg.partition
        elif msg.kind == PLACE_VERTEX:
            self.vertices[msg.vertex] = set(msg.neighbors)
        elif msg.kind == DELETE_VERTEX:
            self.vertices.pop(msg.vertex, None)
            for nbrs in self.vertices.values():
                nbrs.discard(msg.vertex)
        elif msg.kind == DELETE_EDGE:
            u, w = msg.edge
            for x, y in [(u, w), (w, u)]:
                if x in self.vertices:
                    self.vertices[x].discard(y)
        elif msg.kind == MIGRATE_BATCH:
            for v, neighbors in msg.batch:
                self.vertices[v] = set(neighbors)
        elif msg.kind == SHUTDOWN:
            self.vertices.clear()
        else:
            raise TransportError(f'Unexpected message: {KIND_NAMES.get(msg.kind)}')
        self._applied.add(msg.seq)
        return WireMessage(ACK, msg.seq)


def serve_worker(address=('127.0.0.1', 0), ready=None):
    """Run a data receiver until it is shut down.

    Connections are served one at a time; a master that loses its connection
    may reconnect and redeliver.

    Args:
        address (tuple): host and port to listen on, port 0 picks a free one
        ready: object with a ``send()`` method receiving the bound address,
            such as a :func:`multiprocessing.Pipe` end
    """
    store = ShardStore()
    with socket.create_server(address) as server:
        bound = server.getsockname()[:2]
        log.info(f'Worker listening on {bound[0]}:{bound[1]}')
        if ready is not None:
            ready.send(bound)
        while True:
            conn, _ = server.accept()
            with conn:
                while True:
                    msg = recv_message(conn)
                    if msg is None:
                        break
                    send_message(conn, store.apply(msg))
                    if msg.kind == SHUTDOWN:
                        log.info(f'Worker of partition {store.partition} shut down')
                        return store
