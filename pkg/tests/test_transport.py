import multiprocessing
import socket
import threading

import pytest

from sdpart.engine import Engine, EngineConfig, run_stream
from sdpart.errors import MigrationAborted, TransportError, WorkerTimeout
from sdpart.experiment import make_schedule, partition
from sdpart.graph import Dataset, GraphEvent
from sdpart.scaling import MigrationPlan, ScalingConfig
from sdpart.transport import (
    LocalCluster,
    Master,
    ShardStore,
    WireMessage,
    decode,
    encode,
    master_dispatch,
    migrate_over_wire,
    serve_worker,
)
from sdpart.transport.protocol import (
    ACK,
    DELETE_EDGE,
    DELETE_VERTEX,
    DUMP_SHARD,
    HELLO,
    MIGRATE_BATCH,
    PLACE_VERTEX,
    SHARD,
    SHUTDOWN,
)


class ThreadCluster:
    def __init__(self):
        self.stores = []
        self.threads = []

    def spawn(self):
        receiver, sender = multiprocessing.Pipe(duplex=False)
        thread = threading.Thread(
            target=lambda: self.stores.append(serve_worker(ready=sender)),
            daemon=True,
        )
        thread.start()
        address = receiver.recv()
        self.threads.append(thread)
        return address

    def join(self):
        for thread in self.threads:
            thread.join(5)
        return all(not thread.is_alive() for thread in self.threads)


@pytest.fixture
def silent_server():
    with socket.create_server(('127.0.0.1', 0)) as server:
        yield server.getsockname()[:2]


def test_ack_frame():
    assert encode(WireMessage(ACK, 0)) == bytes.fromhex('0000000a0105') + bytes(8)


def test_hello_frame():
    frame = encode(WireMessage(HELLO, 2, partition=7))
    assert frame == bytes.fromhex('0000000e0106') + bytes(
        [0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, 7]
    )
    assert decode(frame[4:]) == WireMessage(HELLO, 2, partition=7)


def test_place_frame():
    msg = WireMessage(PLACE_VERTEX, 3, vertex=5, neighbors=(2, 9))
    frame = encode(msg)
    assert int.from_bytes(frame[:4], 'big') == len(frame) - 4 == 2 + 16 + 4 + 16
    assert decode(frame[4:]) == msg


def test_batch_frame():
    msg = WireMessage(MIGRATE_BATCH, 4, batch=((1, (2, 3)), (2, ()), (3, (1,))))
    assert decode(encode(msg)[4:]) == msg
    empty = WireMessage(SHARD, 5, batch=())
    assert decode(encode(empty)[4:]) == empty


@pytest.mark.parametrize(
    'body',
    [
        bytes.fromhex('0205') + bytes(8),
        bytes.fromhex('012a') + bytes(8),
        bytes.fromhex('0105') + bytes(7),
        bytes.fromhex('0105') + bytes(9),
        bytes.fromhex('01'),
    ],
    ids=['version', 'kind', 'truncated', 'trailing', 'header'],
)
def test_decode_malformed(body):
    with pytest.raises(TransportError):
        decode(body)


def test_encode_unknown_kind():
    with pytest.raises(TransportError):
        encode(WireMessage(99, 0))


class TestShardStore:
    @pytest.fixture
    def store(self):
        store = ShardStore()
        store.apply(WireMessage(HELLO, 0, partition=3))
        store.apply(WireMessage(PLACE_VERTEX, 1, vertex=1, neighbors=(2, 3)))
        store.apply(WireMessage(PLACE_VERTEX, 2, vertex=2, neighbors=(1,)))
        return store

    def dump(self, store):
        return store.apply(WireMessage(DUMP_SHARD, 99)).batch

    def test_place(self, store):
        assert store.partition == 3
        assert self.dump(store) == ((1, (2, 3)), (2, (1,)))

    def test_redelivery_is_idempotent(self, store):
        reply = store.apply(WireMessage(PLACE_VERTEX, 2, vertex=7, neighbors=()))
        assert reply == WireMessage(ACK, 2)
        assert 7 not in store.vertices
        assert len(store) == 2

    def test_delete_vertex(self, store):
        store.apply(WireMessage(DELETE_VERTEX, 3, vertex=2))
        assert self.dump(store) == ((1, (3,)),)

    def test_delete_edge(self, store):
        store.apply(WireMessage(DELETE_EDGE, 3, edge=(1, 2)))
        assert self.dump(store) == ((1, (3,)), (2, ()))

    def test_migrate_and_shutdown(self, store):
        store.apply(WireMessage(MIGRATE_BATCH, 3, batch=((8, (1,)),)))
        assert sorted(store.vertices) == [1, 2, 8]
        store.apply(WireMessage(SHUTDOWN, 4))
        assert len(store) == 0

    def test_unexpected(self, store):
        with pytest.raises(TransportError):
            store.apply(WireMessage(ACK, 5))


def test_master_round_trip():
    cluster = ThreadCluster()
    with Master(cluster) as master:
        master.add_partition(0)
        master.add_partition(1)
        master.place_vertex(0, 1, [2])
        master.place_vertex(1, 2, [1, 3])
        master.delete_edge((1, 2), [0, 1])
        master.delete_vertex(1, 1)
        assert master.collect_shards() == {0: {}, 1: {2: (3,)}}
        assert master.registry.partitions == [0, 1]
    assert cluster.join()
    assert sorted(store.partition for store in cluster.stores) == [0, 1]
    assert all(len(store) == 0 for store in cluster.stores)


def test_master_redelivery():
    cluster = ThreadCluster()
    with Master(cluster) as master:
        master.add_partition(0)
        msg = WireMessage(PLACE_VERTEX, master.next_seq(), vertex=4, neighbors=())
        assert master.request(0, msg).kind == ACK
        master._disconnect(0)
        assert master.request(0, msg._replace(vertex=5)) == WireMessage(ACK, msg.seq)
        assert master.collect_shards() == {0: {4: ()}}


def test_master_timeout(silent_server):
    master = Master(None, timeout=0.2, max_retries=1)
    master.registry.register(0, silent_server)
    with pytest.raises(WorkerTimeout) as excinfo:
        master_dispatch(master, 0, PLACE_VERTEX, vertex=1, neighbors=())
    assert excinfo.value.info == {'partition': 0, 'seq': 0, 'attempts': 2}


def test_migrate_over_wire():
    cluster = ThreadCluster()
    with Master(cluster) as master:
        master.add_partition(0)
        master.add_partition(1)
        master.place_vertex(0, 1, [2])
        master.place_vertex(0, 2, [1])
        plan = MigrationPlan(0, 1, [1, 2], 2, 1, 0)
        migrate_over_wire(master, plan, [(1, [2]), (2, [1])])
        assert master.registry.partitions == [1]
        assert master.collect_shards() == {1: {1: (2,), 2: (1,)}}
    assert cluster.join()


def test_migration_aborted(silent_server):
    cluster = ThreadCluster()
    master = Master(cluster, timeout=0.2, max_retries=0)
    master.add_partition(0)
    master.registry.register(1, silent_server)
    plan = MigrationPlan(0, 1, [1], 0, 0, 0)
    with pytest.raises(MigrationAborted) as excinfo:
        migrate_over_wire(master, plan, [(1, [])])
    assert excinfo.value.info['stage'] == 'batch'
    assert 0 in master.registry
    master.registry.unregister(1)
    master.close()
    assert cluster.join()


def test_engine_dispatch_matches_summary():
    dataset = Dataset.from_name('random', n=200, m=600, seed=4)
    schedule, _ = make_schedule(dataset, 4, delete_edge_percent=1)
    config = EngineConfig(ScalingConfig(80), rng_seed=4)
    cluster = ThreadCluster()
    with Master(cluster) as master:
        engine, _ = run_stream(
            schedule.events,
            config,
            interval_marks=schedule.interval_marks,
            dispatcher=master,
            progress=False,
        )
        shards = master.collect_shards()
    assert shards == engine.summary.shards()
    assert engine.summary.k > 1
    assert cluster.join()


def test_shards_follow_deletions_and_back_edges():
    events = [
        GraphEvent.add(0, 1, []),
        GraphEvent.add(1, 2, [1]),
        GraphEvent.delete_vertex(2, 2),
        GraphEvent.add(3, 3, [2, 1]),
    ]
    cluster = ThreadCluster()
    with Master(cluster) as master:
        engine = Engine(EngineConfig(), dispatcher=master)
        for event in events:
            engine.process_event(event)
        shards = master.collect_shards()
    assert shards == {0: {1: (3,), 3: (1,)}}
    assert shards == engine.summary.shards()
    assert cluster.join()


def test_local_cluster(tmp_path):
    dataset = Dataset.from_name('mesh', rows=10, cols=12)
    schedule, _ = make_schedule(dataset, add_percent=100, intervals=1)
    engine, _ = partition(
        schedule, tmp_path, progress=False, maxcap=60, mode='distributed', workers=8
    )
    inproc, _ = partition(schedule, progress=False, maxcap=60)
    assert engine.summary.placement == inproc.summary.placement
    assert engine.summary.k > 1


def test_local_cluster_bound():
    with LocalCluster(1) as cluster:
        address = cluster.spawn()
        with pytest.raises(TransportError):
            cluster.spawn()
        assert cluster.n_running == 1
        master = Master(cluster)
        master.registry.register(0, address)
        master.close()
