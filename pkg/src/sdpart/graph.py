import hashlib
import logging
from collections import namedtuple
from importlib import resources
from pathlib import Path

import networkx as nx
import numpy as np
import toml

from .errors import ManifestError, ParseError

__version__ = '0.1.0'
__all__ = [
    'Edge',
    'GraphEvent',
    'Dataset',
    'parse_edge_list',
    'write_snap',
    'load_manifest',
    'dataset_to_add_events',
]

log = logging.getLogger(__name__)

ADD = 'add'
DELETE_VERTEX = 'delv'
DELETE_EDGE = 'dele'
EVENT_KINDS = (ADD, DELETE_VERTEX, DELETE_EDGE)
FORMATS = ('snap', 'chaco')

_DATASETS = toml.loads(
    resources.files('sdpart.data').joinpath('datasets.toml').read_text()
)


def _two_cliques(size=500, bridges=10, seed=0):
    graph = nx.disjoint_union(nx.complete_graph(size), nx.complete_graph(size))
    rng = np.random.default_rng(seed)
    left = rng.choice(size, bridges, replace=False)
    right = rng.choice(size, bridges, replace=False)
    graph.add_edges_from((int(u), size + int(v)) for u, v in zip(left, right))
    return graph


_DATASET_FACTORIES = {
    'two_cliques': _two_cliques,
    'mesh': lambda rows=60, cols=70: nx.grid_2d_graph(rows, cols),
    'random': lambda n=200, m=600, seed=0: nx.gnm_random_graph(n, m, seed=seed),
}


class Edge(namedtuple('Edge', 'src dst')):
    """Undirected edge stored with ``src < dst``."""

    __slots__ = ()

    @classmethod
    def of(cls, u, v):
        if u == v:
            raise ValueError(f'Self-loop on vertex {u}')
        return cls(u, v) if u < v else cls(v, u)


class GraphEvent(namedtuple('GraphEvent', 'seq kind vertex neighbors edge')):
    """A single element of a graph stream.

    Only the fields of the event's kind are populated, the others are
    :data:`None`. Use the :meth:`add`, :meth:`delete_vertex` and
    :meth:`delete_edge` constructors rather than the raw tuple.

    Args:
        seq (int): position of the event in its stream
        kind (str): one of ``'add'``, ``'delv'``, ``'dele'``
        vertex (int): subject of vertex events
        neighbors (tuple): edges arriving with an added vertex
        edge (:class:`Edge`): subject of edge deletions
    """

    __slots__ = ()

    @classmethod
    def add(cls, seq, vertex, neighbors):
        return cls(seq, ADD, vertex, tuple(neighbors), None)

    @classmethod
    def delete_vertex(cls, seq, vertex):
        return cls(seq, DELETE_VERTEX, vertex, None, None)

    @classmethod
    def delete_edge(cls, seq, u, v):
        return cls(seq, DELETE_EDGE, None, None, Edge.of(u, v))


class Dataset:
    """Represents an undirected graph ready to be streamed.

    Vertices are dense integers ``0..n-1``; the original identifiers from the
    source file are kept in :attr:`labels` for reporting.

    Args:
        adjacency (list): neighbor collections indexed by vertex, must be
            symmetric and free of self-loops
        labels (list): original vertex identifiers, defaults to ``0..n-1``
        name (str): dataset name used in manifests and reports
    """

    all_names = set(_DATASETS.keys())

    def __init__(self, adjacency, labels=None, name=None):
        neighbor_sets = [set(nbrs) for nbrs in adjacency]
        for v, nbrs in enumerate(neighbor_sets):
            for u in nbrs:
                if u == v or v not in neighbor_sets[u]:
                    raise ValueError(f'Adjacency is not symmetric at ({v}, {u})')
        self.adjacency = [tuple(sorted(nbrs)) for nbrs in neighbor_sets]
        self.labels = list(labels) if labels is not None else list(range(len(self)))
        self.name = name
        assert len(self.labels) == len(self.adjacency)
        self._n_edges = sum(map(len, self.adjacency)) // 2

    def __len__(self):
        return len(self.adjacency)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.adjacency == other.adjacency and self.labels == other.labels

    def __repr__(self):
        return (
            f'Dataset(name={self.name!r}, vertices={self.n_vertices}, '
            f'edges={self.n_edges})'
        )

    @property
    def n_vertices(self):
        return len(self.adjacency)

    @property
    def n_edges(self):
        return self._n_edges

    def edges(self):
        for v, nbrs in enumerate(self.adjacency):
            for u in nbrs:
                if v < u:
                    yield Edge(v, u)

    def order(self, seed=None):
        """Return the streaming order of the vertices.

        File order if *seed* is :data:`None`, otherwise a permutation drawn
        from a PCG64 generator seeded with *seed*.
        """
        if seed is None:
            return list(range(len(self)))
        return [int(v) for v in np.random.default_rng(seed).permutation(len(self))]

    def sha256(self):
        h = hashlib.sha256()
        for label, nbrs in zip(self.labels, self.adjacency):
            h.update(f'{label}:{",".join(map(str, nbrs))}\n'.encode())
        return h.hexdigest()

    @classmethod
    def from_edges(cls, n_vertices, edges, labels=None, name=None):
        """Build a dataset from an edge iterable.

        Directed pairs are symmetrized, duplicates collapsed and self-loops
        dropped.
        """
        adjacency = [set() for _ in range(n_vertices)]
        n_loops = 0
        for u, v in edges:
            if u == v:
                n_loops += 1
                continue
            adjacency[u].add(v)
            adjacency[v].add(u)
        if n_loops:
            log.info(f'Dropped {n_loops} self-loops')
        return cls(adjacency, labels=labels, name=name)

    @classmethod
    def from_networkx(cls, graph, name=None):
        graph = nx.convert_node_labels_to_integers(graph, ordering='default')
        return cls.from_edges(len(graph), graph.edges(), name=name)

    @classmethod
    def from_name(cls, name, **kwargs):
        """Create a synthetic dataset by name.

        The catalog in :attr:`Dataset.all_names` also lists the real datasets,
        which have to be read from disk with :func:`parse_edge_list`.
        """
        if name not in _DATASET_FACTORIES:
            if name in _DATASETS:
                raise ManifestError(
                    f'Dataset {name!r} has no generator, read it with parse_edge_list'
                )
            raise ManifestError(f'Unknown dataset: {name!r}')
        return cls.from_networkx(_DATASET_FACTORIES[name](**kwargs), name=name)


def _parse_int(token, lineno):
    try:
        value = int(token)
    except ValueError:
        raise ParseError({'line': lineno, 'reason': f'not an integer: {token!r}'})
    if value < 0:
        raise ParseError({'line': lineno, 'reason': f'negative vertex id: {value}'})
    return value


def _parse_snap(lines, name):
    edges = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line[0] == '#':
            continue
        fields = line.split()
        if len(fields) < 2:
            raise ParseError({'line': lineno, 'reason': 'expected "u v"'})
        edges.append((_parse_int(fields[0], lineno), _parse_int(fields[1], lineno)))
    if not edges:
        raise ParseError({'line': 0, 'reason': 'no edges'})
    labels = sorted({x for edge in edges for x in edge})
    index = {label: i for i, label in enumerate(labels)}
    return Dataset.from_edges(
        len(labels), ((index[u], index[v]) for u, v in edges), labels, name
    )


def _parse_chaco(lines, name):
    lines = [
        (lineno, line.strip())
        for lineno, line in enumerate(lines, 1)
        if not line.lstrip().startswith('%')
    ]
    while lines and not lines[0][1]:
        lines.pop(0)
    if not lines:
        raise ParseError({'line': 0, 'reason': 'no header'})
    (header_lineno, header), *body = lines
    fields = header.split()
    if len(fields) < 2:
        raise ParseError({'line': header_lineno, 'reason': 'expected "n m [fmt]"'})
    n, m = (_parse_int(x, header_lineno) for x in fields[:2])
    fmt = fields[2].zfill(3) if len(fields) > 2 else '000'
    ncon = _parse_int(fields[3], header_lineno) if len(fields) > 3 else 1
    has_sizes, has_vweights, has_eweights = (c == '1' for c in fmt[-3:])
    skip = int(has_sizes) + (ncon if has_vweights else 0)
    while body and not body[-1][1] and len(body) > n:
        body.pop()
    if len(body) != n:
        raise ParseError(
            {'line': header_lineno, 'reason': f'expected {n} vertex lines'}
        )
    edges = []
    for v, (lineno, line) in enumerate(body):
        values = [_parse_int(x, lineno) for x in line.split()][skip:]
        for u in values[::2] if has_eweights else values:
            if not 1 <= u <= n:
                raise ParseError({'line': lineno, 'reason': f'no such vertex: {u}'})
            edges.append((v, u - 1))
    dataset = Dataset.from_edges(n, edges, labels=range(1, n + 1), name=name)
    if dataset.n_edges != m:
        raise ParseError(
            {
                'line': header_lineno,
                'reason': f'header declares {m} edges, found {dataset.n_edges}',
            }
        )
    return dataset


def parse_edge_list(path, format='snap', manifest=None):
    r"""Read a graph file into a normalized :class:`Dataset`.

    Args:
        path (str): file to read
        format (str): ``'snap'`` -- whitespace-separated ``u v`` lines with
            ``#`` comments; ``'chaco'`` -- header ``n m [fmt [ncon]]`` followed
            by one 1-indexed neighbor line per vertex, ``%`` comments
        manifest (dict): expected ``vertices`` and ``edges``, see
            :func:`load_manifest`
    """
    path = Path(path)
    if format not in FORMATS:
        raise ValueError(f'Unknown format: {format!r}')
    text = path.read_text()
    if not text.strip():
        raise ParseError({'path': str(path), 'line': 0, 'reason': 'empty file'})
    parse = _parse_snap if format == 'snap' else _parse_chaco
    try:
        dataset = parse(text.splitlines(), path.stem)
    except ParseError as e:
        e.info['path'] = str(path)
        raise
    log.info(f'Read {dataset!r} from {path}')
    if manifest:
        expected = (manifest['vertices'], manifest['edges'])
        if expected != (dataset.n_vertices, dataset.n_edges):
            raise ManifestError(
                f'{path}: manifest expects {expected[0]} vertices and '
                f'{expected[1]} edges, got {dataset!r}'
            )
        dataset.name = manifest.get('name', dataset.name)
    return dataset


def write_snap(dataset, path):
    lines = [
        f'# {dataset.name or "graph"}',
        f'# Nodes: {dataset.n_vertices} Edges: {dataset.n_edges}',
    ]
    labels = dataset.labels
    lines.extend(f'{labels[u]}\t{labels[v]}' for u, v in dataset.edges())
    Path(path).write_text('\n'.join(lines) + '\n')


def load_manifest(source):
    """Load a dataset manifest.

    Args:
        source (str): path to a TOML file with ``vertices`` and ``edges`` keys
            (and optionally ``name``), or a dataset name from the catalog
    """
    path = Path(source)
    if path.is_file():
        manifest = toml.loads(path.read_text())
        manifest.setdefault('name', path.stem)
    elif source in _DATASETS and _DATASETS[source]:
        manifest = {'name': source, **_DATASETS[source]}
    else:
        raise ManifestError(f'No manifest file or catalog entry: {source!r}')
    missing = {'vertices', 'edges'} - set(manifest)
    if missing:
        raise ManifestError(f'Missing manifest keys: {missing}')
    return manifest


def dataset_to_add_events(dataset, seed=None):
    """Turn every vertex of a dataset into an ``add`` event.

    Each event carries the full adjacency of its vertex, so edges may point to
    vertices that have not been streamed yet.

    Args:
        dataset (:class:`Dataset`): graph to stream
        seed (int): shuffle with this seed, file order if :data:`None`
    """
    return [
        GraphEvent.add(seq, v, dataset.adjacency[v])
        for seq, v in enumerate(dataset.order(seed))
    ]
