from collections import Counter, namedtuple

from .assign import AssignmentDecision, connectivity

__version__ = '0.1.0'
__all__ = ['hash_assign', 'ldg_assign', 'BASELINES']

_MASK = (1 << 64) - 1


def hash_assign(v, k):
    """Place a vertex by a fixed hash of its id.

    The hash is the finalizer of the SplitMix64 generator applied to *v*,
    taken modulo *k*.
    """
    assert k >= 1
    x = (v + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    x ^= x >> 31
    return x % k


def ldg_assign(summary, v, neighbors, cap):
    r"""Linear deterministic greedy placement.

    .. math::
        \arg\max_p |N(v)\cap P_p|\left(1-\frac{|P_p|}{C}\right)

    Ties go to the lowest id. Partitions at capacity score zero and are
    eligible only if every partition is, so a full partition never wins a tie
    at zero.

    Args:
        summary (:class:`~sdpart.summary.PartitionSummary`): current state
        v (int): arriving vertex
        neighbors (iterable): edges arriving with *v*
        cap (float): vertex capacity :math:`C` of a partition
    """
    stats = summary.stats
    placement = summary.placement
    counts = Counter(placement[u] for u in set(neighbors) if u in placement)
    partitions = [
        p for p in summary.partitions if stats[p].vertex_count < cap
    ] or summary.partitions

    def key(p):
        return -counts.get(p, 0) * (1 - stats[p].vertex_count / cap), p

    return min(partitions, key=key)


def _hash_entry(summary, v, neighbors, config):
    partitions = summary.partitions
    p = partitions[hash_assign(v, len(partitions))]
    return AssignmentDecision(p, 'hash', connectivity(summary, p, neighbors))


def _ldg_entry(summary, v, neighbors, config):
    p = ldg_assign(summary, v, neighbors, config.ldg_capacity)
    return AssignmentDecision(p, 'ldg', connectivity(summary, p, neighbors))


BaselineSpec = namedtuple('BaselineSpec', 'name entry')

BASELINES = {
    spec.name: spec
    for spec in [BaselineSpec('hash', _hash_entry), BaselineSpec('ldg', _ldg_entry)]
}
