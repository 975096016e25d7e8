import struct
from collections import namedtuple

from ..errors import TransportError

__all__ = ()

VERSION = 1

PLACE_VERTEX = 1
DELETE_VERTEX = 2
DELETE_EDGE = 3
MIGRATE_BATCH = 4
ACK = 5
HELLO = 6
SHUTDOWN = 7
DUMP_SHARD = 8
SHARD = 9

KIND_NAMES = {
    PLACE_VERTEX: 'PlaceVertex',
    DELETE_VERTEX: 'DeleteVertex',
    DELETE_EDGE: 'DeleteEdge',
    MIGRATE_BATCH: 'MigrateBatch',
    ACK: 'Ack',
    HELLO: 'Hello',
    SHUTDOWN: 'Shutdown',
    DUMP_SHARD: 'DumpShard',
    SHARD: 'Shard',
}

_LENGTH = struct.Struct('>I')
_HEADER = struct.Struct('>BB')
_SEQ = struct.Struct('>Q')
_SEQ_PARTITION = struct.Struct('>QI')
_SEQ_VERTEX = struct.Struct('>QQ')
_SEQ_EDGE = struct.Struct('>QQQ')
_VERTEX_COUNT = struct.Struct('>QI')
_COUNT = struct.Struct('>I')

MAX_FRAME = 1 << 30

WireMessage = namedtuple(
    'WireMessage', 'kind seq partition vertex neighbors edge batch'
)
WireMessage.__new__.__defaults__ = (None,) * 5


def _pack_ids(ids):
    return struct.pack(f'>{len(ids)}Q', *ids)


def _pack_batch(seq, batch):
    parts = [_SEQ.pack(seq), _COUNT.pack(len(batch))]
    for v, neighbors in batch:
        parts.append(_VERTEX_COUNT.pack(v, len(neighbors)))
        parts.append(_pack_ids(neighbors))
    return b''.join(parts)


def _unpack_ids(payload, offset, n):
    ids = struct.unpack_from(f'>{n}Q', payload, offset)
    return ids, offset + 8 * n


def _unpack_batch(payload):
    (seq,) = _SEQ.unpack_from(payload)
    (n,) = _COUNT.unpack_from(payload, _SEQ.size)
    offset = _SEQ.size + _COUNT.size
    batch = []
    for _ in range(n):
        v, n_nbrs = _VERTEX_COUNT.unpack_from(payload, offset)
        neighbors, offset = _unpack_ids(payload, offset + _VERTEX_COUNT.size, n_nbrs)
        batch.append((v, neighbors))
    return seq, tuple(batch), offset


def encode(msg):
    """Encode a message into a complete frame.

    A frame is a 4-byte big-endian length of the remainder, the protocol
    version byte, the kind byte and the kind's payload. All integers are
    big-endian, seqs and vertex ids take 8 bytes, partition ids and counts
    take 4 bytes.
    """
    kind = msg.kind
    if kind in (ACK, SHUTDOWN, DUMP_SHARD):
        payload = _SEQ.pack(msg.seq)
    elif kind == HELLO:
        payload = _SEQ_PARTITION.pack(msg.seq, msg.partition)
    elif kind == PLACE_VERTEX:
        payload = (
            _SEQ_VERTEX.pack(msg.seq, msg.vertex)
            + _COUNT.pack(len(msg.neighbors))
            + _pack_ids(msg.neighbors)
        )
    elif kind == DELETE_VERTEX:
        payload = _SEQ_VERTEX.pack(msg.seq, msg.vertex)
    elif kind == DELETE_EDGE:
        payload = _SEQ_EDGE.pack(msg.seq, *msg.edge)
    elif kind in (MIGRATE_BATCH, SHARD):
        payload = _pack_batch(msg.seq, msg.batch)
    else:
        raise TransportError(f'Unknown message kind: {kind}')
    body = _HEADER.pack(VERSION, kind) + payload
    return _LENGTH.pack(len(body)) + body


def decode(body):
    """Decode a frame without its length prefix."""
    try:
        version, kind = _HEADER.unpack_from(body)
        payload = body[_HEADER.size :]
        if version != VERSION:
            raise TransportError(f'Unsupported protocol version: {version}')
        if kind in (ACK, SHUTDOWN, DUMP_SHARD):
            (seq,) = _SEQ.unpack_from(payload)
            msg, end = WireMessage(kind, seq), _SEQ.size
        elif kind == HELLO:
            seq, p = _SEQ_PARTITION.unpack_from(payload)
            msg, end = WireMessage(kind, seq, partition=p), _SEQ_PARTITION.size
        elif kind == PLACE_VERTEX:
            seq, v = _SEQ_VERTEX.unpack_from(payload)
            (n,) = _COUNT.unpack_from(payload, _SEQ_VERTEX.size)
            neighbors, end = _unpack_ids(payload, _SEQ_VERTEX.size + _COUNT.size, n)
            msg = WireMessage(kind, seq, vertex=v, neighbors=neighbors)
        elif kind == DELETE_VERTEX:
            seq, v = _SEQ_VERTEX.unpack_from(payload)
            msg, end = WireMessage(kind, seq, vertex=v), _SEQ_VERTEX.size
        elif kind == DELETE_EDGE:
            seq, u, w = _SEQ_EDGE.unpack_from(payload)
            msg, end = WireMessage(kind, seq, edge=(u, w)), _SEQ_EDGE.size
        elif kind in (MIGRATE_BATCH, SHARD):
            seq, batch, end = _unpack_batch(payload)
            msg = WireMessage(kind, seq, batch=batch)
        else:
            raise TransportError(f'Unknown message kind: {kind}')
    except struct.error as e:
        raise TransportError(f'Truncated frame: {e}') from e
    if end != len(payload):
        raise TransportError(f'{len(payload) - end} trailing bytes in frame')
    return msg


def _recv_exactly(sock, n):
    chunks = []
    while n:
        chunk = sock.recv(n)
        if not chunk:
            return None
        chunks.append(chunk)
        n -= len(chunk)
    return b''.join(chunks)


def send_message(sock, msg):
    sock.sendall(encode(msg))


def recv_message(sock):
    """Read one message, :data:`None` if the peer closed the connection."""
    header = _recv_exactly(sock, _LENGTH.size)
    if header is None:
        return None
    (length,) = _LENGTH.unpack(header)
    if not _HEADER.size <= length <= MAX_FRAME:
        raise TransportError(f'Invalid frame length: {length}')
    body = _recv_exactly(sock, length)
    if body is None:
        raise TransportError('Connection closed inside a frame')
    return decode(body)
