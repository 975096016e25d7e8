import math

import numpy as np
import pytest

from sdpart.engine import Engine, EngineConfig, run_stream
from sdpart.errors import DuplicatePlacementError, EventError, OrderingError
from sdpart.graph import Dataset, GraphEvent, dataset_to_add_events
from sdpart.scaling import ScalingConfig


def path_events(n):
    return [
        GraphEvent.add(v, v, [u for u in (v - 1, v + 1) if 0 <= u < n])
        for v in range(n)
    ]


def test_first_add_goes_to_partition_zero():
    engine = Engine(EngineConfig())
    decision = engine.process_event(GraphEvent.add(0, 7, [1, 2]))
    assert decision.partition == 0
    assert engine.summary.placement == {7: 0}
    assert (engine.edges_seen, engine.cuts_seen) == (2, 0)
    assert engine.event_count == 1


def test_ordering():
    engine = Engine(EngineConfig())
    with pytest.raises(OrderingError) as excinfo:
        engine.process_event(GraphEvent.add(1, 0, []))
    assert excinfo.value.info == {'expected': 0, 'seq': 1}


def test_duplicate_add():
    engine = Engine(EngineConfig())
    engine.process_event(GraphEvent.add(0, 3, []))
    with pytest.raises(DuplicatePlacementError):
        engine.process_event(GraphEvent.add(1, 3, []))


def test_unknown_deletions_only_warn():
    engine = Engine(EngineConfig())
    engine.process_event(GraphEvent.add(0, 1, [2]))
    engine.process_event(GraphEvent.delete_vertex(1, 5))
    engine.process_event(GraphEvent.delete_edge(2, 3, 4))
    assert engine.warn_count == 2
    assert engine.event_count == 3


def test_counters_on_symmetric_stream():
    events = path_events(12)
    engine, _ = run_stream(events, EngineConfig(partitions=3), progress=False)
    assert engine.edges_seen == sum(len(e.neighbors) for e in events) == 22
    assert engine.deleted_half_edges == 0
    assert engine.cuts_seen == engine.summary.cut_edges


def test_counters_keep_deleted_half_edges():
    engine = Engine(EngineConfig())
    engine.process_event(GraphEvent.add(0, 1, []))
    engine.process_event(GraphEvent.add(1, 2, [1]))
    assert (engine.edges_seen, engine.deleted_half_edges) == (2, 0)
    engine.process_event(GraphEvent.delete_vertex(2, 2))
    assert (engine.edges_seen, engine.deleted_half_edges) == (2, 2)
    engine.process_event(GraphEvent.add(3, 3, [2, 1]))
    assert (engine.edges_seen, engine.deleted_half_edges) == (5, 3)
    assert engine.summary.half_edges == 2
    engine.process_event(GraphEvent.delete_edge(4, 1, 3))
    assert (engine.edges_seen, engine.deleted_half_edges) == (5, 5)


def test_gate_uses_current_cut_edges():
    engine = Engine(EngineConfig(partitions=2, audit=True))
    summary = engine.summary
    summary.place_vertex(0, 0, [1, 2])
    summary.place_vertex(1, 1, [0, 2])
    summary.place_vertex(0, 2, [0, 1])
    engine.edges_seen = summary.half_edges
    assert (engine.edges_seen, engine.cuts_seen) == (6, 2)
    decision = engine.process_event(GraphEvent.add(0, 3, [0, 2]))
    assert decision == (0, 'max-connectivity', 2)
    record = engine.audit_log[0]
    assert record.avg_d == pytest.approx(0.5)
    assert record.th == pytest.approx(1.0)


@pytest.mark.parametrize(
    'kwargs',
    [
        {'algo': 'metis'},
        {'gate_direction': 'sideways'},
        {'algo': 'hash', 'scaling': ScalingConfig(10)},
        {'algo': 'ldg', 'partitions': 2},
        {'partitions': 0},
    ],
)
def test_config_invalid(kwargs):
    with pytest.raises(ValueError):
        EngineConfig(**kwargs)


def test_config_as_dict():
    config = EngineConfig(ScalingConfig(50), rng_seed=3)
    assert config.as_dict()['scaling'] == {
        'maxcap': 50,
        'tolerance_parameter': 20,
        'dest_param': 5,
    }
    assert 'ldg_capacity' not in config.as_dict()
    with pytest.raises(AttributeError):
        config.rng_seed = 4


def fuzzed_event(engine, rng, seq, n_vertices=200):
    x = rng.random()
    v = int(rng.integers(n_vertices))
    if x < 0.6 and v not in engine.summary:
        nbrs = rng.choice(n_vertices, int(rng.integers(0, 6)), replace=False)
        return GraphEvent.add(seq, v, [int(u) for u in nbrs if u != v])
    if x < 0.85:
        return GraphEvent.delete_vertex(seq, v)
    u, w = (int(y) for y in rng.choice(n_vertices, 2, replace=False))
    return GraphEvent.delete_edge(seq, u, w)


@pytest.mark.parametrize('seed', range(100))
def test_fuzzed_checkpoints(seed):
    rng = np.random.default_rng(seed)
    config = EngineConfig(
        ScalingConfig(80, tolerance_parameter=30),
        partitions=int(rng.integers(1, 3)),
        rng_seed=seed,
    )
    engine = Engine(config)
    seen = 0
    for seq in range(1000):
        engine.process_event(fuzzed_event(engine, rng, seq))
        assert engine.edges_seen >= seen
        seen = engine.edges_seen
        if seq % 100 == 99:
            summary = engine.summary
            summary.check()
            assert engine.edges_seen == summary.half_edges + engine.deleted_half_edges
            placement = summary.placement
            assert engine.cuts_seen == sum(
                placement[u] != placement[w] for u, w in summary.edges()
            )
            cuts = summary.cut_edges
            for plan in engine.scale_in():
                assert plan.projected_dest_load <= config.scaling.destination_threshold
            assert summary.cut_edges <= cuts
            summary.check()
            assert engine.edges_seen >= engine.cuts_seen >= 0


def test_scale_out_law():
    dataset = Dataset.from_name('mesh', rows=20, cols=30)
    assert dataset.n_edges == 1150
    engine = Engine(EngineConfig(ScalingConfig(100)))
    for event in dataset_to_add_events(dataset, seed=0):
        k, live = engine.summary.k, engine.summary.live_edges
        engine.process_event(event)
        assert engine.summary.k == k + (live / k >= 100)
    assert engine.summary.k - 1 >= math.ceil(1150 / 100) - 1
    actions = [r.action for r in engine.scaling_log]
    assert actions == ['add'] * (engine.summary.k - 1)
    assert [r.partition_id for r in engine.scaling_log] == list(
        range(1, engine.summary.k)
    )


def test_scale_in_at_interval_mark():
    events = path_events(30)
    events.extend(GraphEvent.delete_vertex(30 + v, v) for v in range(26))
    config = EngineConfig(ScalingConfig(10))
    engine, series = run_stream(events, config, interval_marks=[56], progress=False)
    assert [r.action for r in engine.scaling_log] == ['add', 'add', 'retire']
    assert engine.scaling_log[-1].seq == 55
    assert engine.summary.k == 2
    assert engine.summary.retired == {1}
    assert len(series) == 1
    assert series.records[0].partitions == 2
    engine.summary.check()


def test_run_stream_records():
    events = path_events(10)
    hooked = []
    engine, series = run_stream(
        events,
        EngineConfig(partitions=2),
        interval_marks=[5],
        phase_marks=[3],
        hooks=[lambda engine, record: hooked.append(record.seq)],
        progress=False,
    )
    assert [(r.seq, r.interval) for r in series] == [(4, 1), (9, 2)]
    assert [(r.seq, r.interval) for r in series.phase_records] == [(2, 1)]
    assert hooked == [4]
    assert series.records[-1].live_vertices == 10
    assert series.records[-1].live_edges == 9


def test_run_stream_empty():
    engine, series = run_stream([], EngineConfig(), progress=False)
    assert len(series) == 0
    assert engine.event_count == 0


def test_run_stream_event_error():
    events = path_events(5)
    events[3] = GraphEvent.add(3, 1, [])
    with pytest.raises(EventError) as excinfo:
        run_stream(events, EngineConfig(), progress=False)
    assert excinfo.value.info == {'seq': 3}
    assert isinstance(excinfo.value.__cause__, DuplicatePlacementError)


def test_audit():
    config = EngineConfig(audit=True, partitions=2)
    engine, _ = run_stream(path_events(20), config, progress=False)
    assert [r.vertex for r in engine.audit_log] == list(range(20))
    assert engine.audit_log[0].reason == 'random'
    assert engine.audit_log[0].th == math.inf
    assert {r.reason for r in engine.audit_log[1:]} <= {
        'max-connectivity',
        'balance-min-load',
    }
    placement = engine.summary.placement
    assert all(r.partition == placement[r.vertex] for r in engine.audit_log)


@pytest.mark.parametrize('seed', range(2))
def test_gate_does_not_worsen_imbalance(seed):
    events = dataset_to_add_events(Dataset.from_name('two_cliques'))
    imbalance = {}
    for gate in ['prose', 'none']:
        config = EngineConfig(gate_direction=gate, partitions=2, rng_seed=seed)
        _, series = run_stream(events, config, progress=False)
        imbalance[gate] = series.records[-1].load_imbalance
    assert imbalance['prose'] <= imbalance['none']


def test_deterministic():
    dataset = Dataset.from_name('random', n=300, m=900)
    events = dataset_to_add_events(dataset, seed=1)
    config = EngineConfig(ScalingConfig(200), rng_seed=7)
    runs = [run_stream(events, config, progress=False) for _ in range(2)]
    (first, first_series), (second, second_series) = runs
    assert first.summary.placement == second.summary.placement
    assert [r[:-1] for r in first_series] == [r[:-1] for r in second_series]
    assert first.scaling_log == second.scaling_log
