import logging
from pathlib import Path

from .errors import DuplicatePlacementError, PartitionError
from .graph import Edge

__version__ = '0.1.0'
__all__ = ['PartitionStats', 'PartitionSummary']

log = logging.getLogger(__name__)


class PartitionStats:
    """Load accounting of a single partition.

    The load of a partition is the number of its internal connections plus the
    number of its external (cut) connections. A cut edge contributes to the
    load of both of its partitions.
    """

    __slots__ = ('internal_edges', 'cut_edges', 'vertex_count')

    def __init__(self, internal_edges=0, cut_edges=0, vertex_count=0):
        self.internal_edges = internal_edges
        self.cut_edges = cut_edges
        self.vertex_count = vertex_count

    @property
    def load(self):
        return self.internal_edges + self.cut_edges

    def _astuple(self):
        return self.internal_edges, self.cut_edges, self.vertex_count

    def __eq__(self, other):
        if not isinstance(other, PartitionStats):
            return NotImplemented
        return self._astuple() == other._astuple()

    def __repr__(self):
        return (
            f'PartitionStats(internal_edges={self.internal_edges}, '
            f'cut_edges={self.cut_edges}, vertex_count={self.vertex_count})'
        )

    def copy(self):
        return PartitionStats(*self._astuple())


class PartitionSummary:
    r"""Master-side metadata of a partitioned dynamic graph.

    The summary maps every live partition to its vertices (in insertion order)
    and every placed vertex to its stored adjacency. Edges to vertices that
    have not arrived yet are stored as pending endpoints; they carry no load
    until the other endpoint is placed, at which point the edge is resolved
    to an internal or a cut edge. Edges deleted while one endpoint was still
    pending are remembered until that endpoint arrives or the placed one is
    deleted. Per-partition :class:`PartitionStats` and the totals
    :attr:`live_edges`, :attr:`cut_edges` and :attr:`half_edges` are maintained
    incrementally, :meth:`recompute_stats` and :meth:`recompute_totals` rebuild
    them from scratch.

    The summary has a single writer and no internal locking.

    Args:
        n_partitions (int): number of partitions created up front
    """

    def __init__(self, n_partitions=1):
        self._vertices = {}
        self._adjacency = {}
        self._pending = {}
        self._deleted = set()
        self._cancelled = {}
        self._cancelled_by = {}
        self._next_id = 0
        self.placement = {}
        self.stats = {}
        self.retired = set()
        self.live_edges = 0
        self.cut_edges = 0
        self.half_edges = 0
        self.warn_count = 0
        for _ in range(n_partitions):
            self.add_partition()

    def __contains__(self, v):
        return v in self.placement

    def __repr__(self):
        return (
            f'PartitionSummary(partitions={self.k}, vertices={self.n_vertices}, '
            f'edges={self.live_edges}, cut={self.cut_edges})'
        )

    @property
    def partitions(self):
        return sorted(self.stats)

    @property
    def k(self):
        return len(self.stats)

    @property
    def n_vertices(self):
        return len(self.placement)

    @property
    def vertex_map(self):
        return {p: set(vs) for p, vs in self._vertices.items()}

    @property
    def average_load(self):
        return sum(s.load for s in self.stats.values()) / self.k if self.k else 0.0

    def vertices(self, p):
        return list(self._vertices[p])

    def neighbors(self, v):
        return set(self._adjacency[self.placement[v]][v])

    def loads(self):
        return {p: self.stats[p].load for p in self.partitions}

    def shards(self):
        """Return the stored adjacency in the layout workers hold it.

        Returns:
            dict: partition -> vertex -> sorted tuple of neighbors
        """
        return {
            p: {v: tuple(sorted(nbrs)) for v, nbrs in adjacency.items()}
            for p, adjacency in self._adjacency.items()
        }

    def edges(self):
        """Iterate over resolved (both endpoints placed) edges."""
        for v, p in self.placement.items():
            for u in self._adjacency[p][v]:
                if v < u and u in self.placement:
                    yield Edge(v, u)

    def _check_live(self, p):
        if p in self.retired:
            raise PartitionError(f'Partition {p} is retired')
        if p not in self.stats:
            raise PartitionError(f'No such partition: {p}')

    def _link(self, p, q, sign):
        self.live_edges += sign
        if p == q:
            self.stats[p].internal_edges += sign
        else:
            self.stats[p].cut_edges += sign
            self.stats[q].cut_edges += sign
            self.cut_edges += sign

    def _drop_pending(self, u, v):
        waiting = self._pending.get(u)
        if waiting is not None:
            waiting.discard(v)
            if not waiting:
                del self._pending[u]

    def add_partition(self):
        p = self._next_id
        self._next_id += 1
        self._vertices[p] = {}
        self._adjacency[p] = {}
        self.stats[p] = PartitionStats()
        return p

    def retire_partition(self, p):
        self._check_live(p)
        if self._vertices[p]:
            raise PartitionError(f'Partition {p} still holds vertices')
        del self._vertices[p], self._adjacency[p], self.stats[p]
        self.retired.add(p)

    def resolve_arrival(self, v, neighbors):
        """Resolve the adjacency an arriving vertex would be stored with.

        Args:
            v (int): vertex that is not placed yet
            neighbors (iterable): edges arriving with *v*

        Returns:
            tuple: the set of neighbors stored for *v* and the set of placed
            neighbors whose adjacency does not list *v* yet
        """
        cancelled = self._cancelled.get(v, ())
        nbrs = {
            u
            for u in neighbors
            if u != v and u not in self._deleted and u not in cancelled
        }
        nbrs |= self._pending.get(v, set())
        relinked = {
            u
            for u in nbrs
            if u in self.placement and v not in self._adjacency[self.placement[u]][u]
        }
        return nbrs, relinked

    def place_vertex(self, p, v, neighbors):
        """Place an arriving vertex into a partition.

        Neighbors that are already placed turn into internal or cut edges
        immediately, the others are stored as pending endpoints. Neighbors that
        were deleted from the stream, and edges deleted explicitly while one
        endpoint was pending, are dropped.

        Args:
            p (int): live partition
            v (int): vertex that is not placed yet
            neighbors (iterable): edges arriving with *v*
        """
        if v in self.placement:
            raise DuplicatePlacementError(
                f'Vertex {v} is already placed in partition {self.placement[v]}'
            )
        self._check_live(p)
        self._deleted.discard(v)
        nbrs, _ = self.resolve_arrival(v, neighbors)
        self._pending.pop(v, None)
        for u in self._cancelled.pop(v, ()):
            self._cancelled_by[u].discard(v)
            if not self._cancelled_by[u]:
                del self._cancelled_by[u]
        self._vertices[p][v] = None
        self._adjacency[p][v] = nbrs
        self.placement[v] = p
        self.stats[p].vertex_count += 1
        self.half_edges += len(nbrs)
        for u in nbrs:
            q = self.placement.get(u)
            if q is None:
                self._pending.setdefault(u, set()).add(v)
                continue
            stored = self._adjacency[q][u]
            if v not in stored:
                stored.add(v)
                self.half_edges += 1
            self._link(p, q, 1)

    def delete_vertex(self, v):
        """Remove a vertex and all its edges.

        Returns:
            bool: whether *v* was placed; unknown vertices only increment
            :attr:`warn_count`.
        """
        p = self.placement.pop(v, None)
        if p is None:
            self.warn_count += 1
            log.warning(f'Ignoring deletion of unknown vertex {v}')
            return False
        del self._vertices[p][v]
        nbrs = self._adjacency[p].pop(v)
        self.stats[p].vertex_count -= 1
        self.half_edges -= len(nbrs)
        for u in nbrs:
            q = self.placement.get(u)
            if q is None:
                self._drop_pending(u, v)
                continue
            self._adjacency[q][u].discard(v)
            self.half_edges -= 1
            self._link(p, q, -1)
        for w in self._cancelled_by.pop(v, ()):
            self._cancelled[w].discard(v)
            if not self._cancelled[w]:
                del self._cancelled[w]
        self._deleted.add(v)
        return True

    def delete_edge(self, edge):
        """Remove an edge from both endpoints' adjacency wherever present.

        Returns:
            bool: whether the edge was stored; absent edges only increment
            :attr:`warn_count`.
        """
        u, w = edge
        p, q = self.placement.get(u), self.placement.get(w)
        found = False
        for x, y, r in [(u, w, p), (w, u, q)]:
            if r is not None and y in self._adjacency[r][x]:
                self._adjacency[r][x].discard(y)
                self.half_edges -= 1
                found = True
        if not found:
            self.warn_count += 1
            log.warning(f'Ignoring deletion of absent edge {tuple(edge)}')
            return False
        if p is not None and q is not None:
            self._link(p, q, -1)
        else:
            if p is not None:
                self._drop_pending(w, u)
            else:
                self._drop_pending(u, w)
            placed, pending = (u, w) if p is not None else (w, u)
            self._cancelled.setdefault(pending, set()).add(placed)
            self._cancelled_by.setdefault(placed, set()).add(pending)
        return True

    def move_vertex(self, v, p):
        """Relocate a placed vertex with its adjacency to partition *p*."""
        src = self.placement[v]
        if src == p:
            return
        self._check_live(p)
        nbrs = self._adjacency[src].pop(v)
        del self._vertices[src][v]
        self._vertices[p][v] = None
        self._adjacency[p][v] = nbrs
        self.placement[v] = p
        self.stats[src].vertex_count -= 1
        self.stats[p].vertex_count += 1
        for u in nbrs:
            q = self.placement.get(u)
            if q is not None:
                self._link(src, q, -1)
                self._link(p, q, 1)

    def recompute_stats(self):
        """Rebuild per-partition stats by a full scan of the summary."""
        stats = {
            p: PartitionStats(vertex_count=len(vs)) for p, vs in self._vertices.items()
        }
        for p, adjacency in self._adjacency.items():
            for v, nbrs in adjacency.items():
                for u in nbrs:
                    q = self.placement.get(u)
                    if q is None:
                        continue
                    if q != p:
                        stats[p].cut_edges += 1
                    elif v < u:
                        stats[p].internal_edges += 1
        return stats

    def recompute_totals(self):
        """Rebuild ``(live_edges, cut_edges, half_edges)`` by a full scan."""
        stats = self.recompute_stats().values()
        cut = sum(s.cut_edges for s in stats) // 2
        live = sum(s.internal_edges for s in stats) + cut
        half = sum(
            len(nbrs) for adj in self._adjacency.values() for nbrs in adj.values()
        )
        return live, cut, half

    def check(self):
        """Assert the structural invariants of the summary."""
        for p, vs in self._vertices.items():
            assert set(vs) == set(self._adjacency[p])
            for v in vs:
                assert self.placement[v] == p
        assert len(self.placement) == sum(map(len, self._vertices.values()))
        assert not self.retired & set(self._vertices)
        for v, p in self.placement.items():
            for u in self._adjacency[p][v]:
                assert u not in self._deleted
                if u in self.placement:
                    assert v in self._adjacency[self.placement[u]][u]
                else:
                    assert v in self._pending.get(u, ())
        for w, placed in self._cancelled.items():
            assert placed and w not in self.placement
            for u in placed:
                assert u in self.placement and w in self._cancelled_by[u]
        assert sum(map(len, self._cancelled.values())) == sum(
            map(len, self._cancelled_by.values())
        )
        assert self.recompute_stats() == self.stats
        assert self.recompute_totals() == (
            self.live_edges,
            self.cut_edges,
            self.half_edges,
        )

    def write_assignments(self, path):
        lines = ['vertex_id,partition_id']
        lines.extend(f'{v},{p}' for v, p in sorted(self.placement.items()))
        Path(path).write_text('\n'.join(lines) + '\n')
