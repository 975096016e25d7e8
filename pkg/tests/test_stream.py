import pytest

from sdpart.errors import ParseError, ReplayError, ScheduleError
from sdpart.graph import Dataset, GraphEvent, dataset_to_add_events
from sdpart.stream import (
    ScenarioConfig,
    Schedule,
    build_schedule,
    read_trace,
    replay,
    write_trace,
)


@pytest.fixture(scope='module')
def mesh():
    return Dataset.from_name('mesh')


@pytest.fixture(scope='module')
def schedule(mesh):
    return build_schedule(mesh, ScenarioConfig(order_seed=0, delete_seed=1))


def test_interval_counts(schedule):
    assert schedule.phase_marks == [1050, 2310, 3570, 4830]
    assert schedule.interval_marks == [1260, 2520, 3780, 5040]
    assert [e.seq for e in schedule.events] == list(range(5040))
    kinds = [e.kind for e in schedule.events[:1260]]
    assert kinds == ['add'] * 1050 + ['delv'] * 210


def test_deletions_hit_live_vertices(schedule):
    live = set()
    for event in schedule.events:
        if event.kind == 'add':
            assert event.vertex not in live
            live.add(event.vertex)
        else:
            live.remove(event.vertex)
    assert len(live) == 4200 - 4 * 210


def test_deterministic(mesh, schedule):
    cfg = ScenarioConfig(order_seed=0, delete_seed=1)
    assert build_schedule(mesh, cfg) == schedule
    other = build_schedule(mesh, ScenarioConfig(order_seed=0, delete_seed=2))
    assert other.events[:1050] == schedule.events[:1050]
    assert other.events != schedule.events


def test_degenerate_scenario_is_add_stream(mesh):
    cfg = ScenarioConfig(
        add_percent=100, delete_vertex_percent=0, intervals=1, order_seed=5
    )
    schedule = build_schedule(mesh, cfg)
    assert schedule.events == dataset_to_add_events(mesh, seed=5)
    assert schedule.interval_marks == schedule.phase_marks == [4200]


def test_last_interval_absorbs_remainder():
    dataset = Dataset.from_name('random', n=10, m=20)
    cfg = ScenarioConfig(add_percent=25, delete_vertex_percent=0, intervals=3)
    assert build_schedule(dataset, cfg).interval_marks == [2, 4, 7]


def test_stable_only_deletions():
    dataset = Dataset.from_name('random', n=100, m=300)
    cfg = ScenarioConfig(add_percent=40, delete_vertex_percent=10, intervals=2)
    first = build_schedule(dataset, cfg).events[:50]
    assert [e.kind for e in first] == ['add'] * 40 + ['delv'] * 10
    cfg = ScenarioConfig(
        add_percent=40, delete_vertex_percent=10, intervals=2, delete_stable_only=True
    )
    with pytest.raises(ScheduleError):
        build_schedule(dataset, cfg)


def test_edge_deletions():
    dataset = Dataset.from_name('random', n=100, m=300)
    cfg = ScenarioConfig(
        add_percent=50, intervals=2, delete_vertex_percent=0, delete_edge_percent=5
    )
    schedule = build_schedule(dataset, cfg)
    deleted = [e.edge for e in schedule.events if e.kind == 'dele']
    assert len(deleted) == 30
    assert len(set(deleted)) == 30
    assert all(v in dataset.adjacency[u] for u, v in deleted)
    with pytest.raises(ScheduleError):
        build_schedule(dataset, ScenarioConfig(intervals=1, delete_edge_percent=100))


@pytest.mark.parametrize(
    'kwargs',
    [{'add_percent': 101}, {'intervals': 0}, {'intervals': 5, 'add_percent': 25}],
)
def test_scenario_invalid(kwargs):
    with pytest.raises(ValueError):
        ScenarioConfig(**kwargs)


def test_replay_delivers_in_order(schedule):
    seen, phases, intervals = [], [], []
    report = replay(
        schedule,
        lambda e: seen.append(e.seq),
        on_phase=phases.append,
        on_interval=intervals.append,
        queue_size=16,
    )
    assert seen == list(range(5040))
    assert report == (5040, 5039)
    assert phases == schedule.phase_marks
    assert intervals == schedule.interval_marks


def test_replay_empty():
    assert replay(Schedule([]), print) == (0, None)


def test_replay_sink_error():
    events = [GraphEvent.add(i, i, []) for i in range(100)]

    def sink(event):
        if event.seq == 42:
            raise KeyError(event.vertex)

    with pytest.raises(ReplayError) as excinfo:
        replay(Schedule(events), sink, queue_size=4)
    assert excinfo.value.info == {'seq': 42, 'last_seq': 41}
    assert isinstance(excinfo.value.__cause__, KeyError)


def test_trace_round_trip(tmp_path):
    dataset = Dataset.from_name('random', n=40, m=300)
    cfg = ScenarioConfig(
        add_percent=50, intervals=2, delete_edge_percent=1, order_seed=1
    )
    schedule = build_schedule(dataset, cfg)
    write_trace(schedule, tmp_path / 'trace.jsonl')
    assert read_trace(tmp_path / 'trace.jsonl') == schedule


def test_trace_format(tmp_path):
    events = [
        GraphEvent.add(0, 3, [4]),
        GraphEvent.delete_vertex(1, 3),
        GraphEvent.delete_edge(2, 5, 4),
    ]
    write_trace(Schedule(events, [3], [1]), tmp_path / 'trace.jsonl')
    assert (tmp_path / 'trace.jsonl').read_text().splitlines() == [
        '{"seq":0,"op":"add","v":3,"nbrs":[4]}',
        '{"op":"mark","at":1,"kind":"phase"}',
        '{"seq":1,"op":"delv","v":3}',
        '{"seq":2,"op":"dele","u":4,"w":5}',
        '{"op":"mark","at":3,"kind":"interval"}',
    ]


@pytest.mark.parametrize(
    'text,line',
    [
        ('{"seq":0,"op":"add","v":1,"nbrs":[]}\nnot json\n', 2),
        ('{"seq":0,"op":"delv","v":1}\n{"seq":0,"op":"delv","v":2}\n', 2),
        ('{"seq":0,"op":"move","v":1}\n', 1),
        ('{"seq":0,"op":"dele","u":1,"w":1}\n', 1),
    ],
)
def test_trace_malformed(tmp_path, text, line):
    path = tmp_path / 'trace.jsonl'
    path.write_text(text)
    with pytest.raises(ParseError) as excinfo:
        read_trace(path)
    assert excinfo.value.info['line'] == line
