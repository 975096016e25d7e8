import logging
from collections import namedtuple

from .assign import find_minimum_load
from .errors import ConfigError, StalePlanError

__version__ = '0.1.0'
__all__ = [
    'ScalingConfig',
    'MigrationPlan',
    'should_scale_out',
    'add_partition',
    'plan_scale_in',
    'execute_migration',
    'scale_in',
]

log = logging.getLogger(__name__)

MigrationPlan = namedtuple(
    'MigrationPlan',
    'source destination vertices projected_dest_load source_load destination_load',
)


class ScalingConfig:
    r"""Capacity constraints of the elastic partition lifecycle.

    .. math::
        l=\frac{\text{tolerance}\cdot C}{100},\quad
        d=\frac{\text{dest}\cdot C}{100},\quad
        \text{destination threshold}=C-d

    Args:
        maxcap (int): :math:`C`, edge load capacity of a partition
        tolerance_parameter (float): partitions below this percentage of
            :math:`C` are candidates for scale-in
        dest_param (float): percentage of :math:`C` a migration destination
            keeps free for the upcoming stream
    """

    def __init__(self, maxcap, *, tolerance_parameter=20, dest_param=5):
        if not maxcap > 0:
            raise ConfigError(f'maxcap must be positive, got {maxcap}')
        for name, value in [
            ('tolerance_parameter', tolerance_parameter),
            ('dest_param', dest_param),
        ]:
            if not 0 <= value <= 100:
                raise ConfigError(f'{name} must be within [0, 100], got {value}')
        self.maxcap = maxcap
        self.tolerance_parameter = tolerance_parameter
        self.dest_param = dest_param
        if not self.lower_threshold < self.destination_threshold:
            raise ConfigError(
                f'Scale-in threshold {self.lower_threshold} must be below '
                f'the destination threshold {self.destination_threshold}'
            )

    def __repr__(self):
        return (
            f'ScalingConfig(maxcap={self.maxcap}, '
            f'tolerance_parameter={self.tolerance_parameter}, '
            f'dest_param={self.dest_param})'
        )

    def __setattr__(self, name, value):
        if name in self.__dict__:
            raise AttributeError(f'ScalingConfig is immutable: {name}')
        super().__setattr__(name, value)

    @property
    def lower_threshold(self):
        return self.tolerance_parameter * self.maxcap / 100

    @property
    def reserve(self):
        return self.dest_param * self.maxcap / 100

    @property
    def destination_threshold(self):
        return self.maxcap - self.reserve

    def as_dict(self):
        return {
            'maxcap': self.maxcap,
            'tolerance_parameter': self.tolerance_parameter,
            'dest_param': self.dest_param,
        }


def should_scale_out(total_edges, k, cfg):
    """Whether the average edge load per partition reached the capacity."""
    assert k >= 1
    return cfg.maxcap <= total_edges / k


def add_partition(summary):
    p = summary.add_partition()
    log.info(f'Scaled out: partition {p} added, k = {summary.k}')
    return p


def plan_scale_in(summary, cfg):
    """Plan draining an underloaded partition into another one.

    The source is the least loaded partition. The destination is the most
    loaded other partition that is also below the scale-in threshold and can
    absorb the whole source without exceeding the destination threshold.

    Returns:
        :class:`MigrationPlan` or :data:`None` if no pair qualifies.
    """
    if summary.k < 2:
        return None
    stats = summary.stats
    low = {p: s for p, s in stats.items() if s.load < cfg.lower_threshold}
    if len(low) < 2:
        return None
    source = find_minimum_load(low)
    source_load = stats[source].load
    candidates = [
        p
        for p, s in low.items()
        if p != source and s.load + source_load <= cfg.destination_threshold
    ]
    if not candidates:
        return None
    destination = min(candidates, key=lambda p: (-stats[p].load, p))
    return MigrationPlan(
        source,
        destination,
        summary.vertices(source),
        stats[destination].load + source_load,
        source_load,
        stats[destination].load,
    )


def execute_migration(summary, plan, cfg=None):
    """Move every vertex of the plan to its destination and retire the source.

    Raises:
        :class:`~sdpart.errors.StalePlanError`: if the loads changed since
            the plan was made
    """
    stats = summary.stats
    if (
        plan.source not in stats
        or plan.destination not in stats
        or stats[plan.source].load != plan.source_load
        or stats[plan.destination].load != plan.destination_load
        or summary.vertices(plan.source) != list(plan.vertices)
    ):
        raise StalePlanError(f'Plan {plan.source} -> {plan.destination} is stale')
    for v in plan.vertices:
        summary.move_vertex(v, plan.destination)
    summary.retire_partition(plan.source)
    if cfg is not None:
        assert stats[plan.destination].load <= cfg.destination_threshold
    log.info(
        f'Scaled in: partition {plan.source} merged into {plan.destination} '
        f'({len(plan.vertices)} vertices), k = {summary.k}'
    )


def scale_in(summary, cfg, *, before=None, after=None):
    """Execute migration plans until none qualifies.

    Args:
        summary (~sdpart.summary.PartitionSummary): summary to shrink
        cfg (ScalingConfig): scaling thresholds
        before (callable): optional, called with each plan before it is executed
        after (callable): optional, called with each plan once it is executed

    Returns:
        list: executed :class:`MigrationPlan` objects
    """
    plans = []
    while True:
        plan = plan_scale_in(summary, cfg)
        if plan is None:
            return plans
        if before:
            before(plan)
        execute_migration(summary, plan, cfg)
        if after:
            after(plan)
        plans.append(plan)
