import logging
from pathlib import Path

import toml

from .errors import ManifestError
from .graph import _DATASET_FACTORIES, Dataset, load_manifest, parse_edge_list

log = logging.getLogger(__name__)

__all__ = ()

PARAM_SECTIONS = {'scenario_kwargs', 'partition_kwargs'}


def validate_params(params):
    unknown = set(params) - PARAM_SECTIONS
    if unknown:
        raise ManifestError(f'Unknown keywords: {unknown}')


def params_from_file(path):
    """Read run parameters in the format printed by the ``defaults`` command."""
    try:
        params = toml.loads(Path(path).read_text())
    except toml.TomlDecodeError as e:
        raise ManifestError(f'{path}: {e}') from e
    validate_params(params)
    return params


def load_dataset(source, format='snap', manifest=None):
    """Load a dataset from a file or by the name of a synthetic generator.

    Args:
        source (str): edge-list file, or a name accepted by
            :meth:`~sdpart.graph.Dataset.from_name`
        format (str): file format, see :func:`~sdpart.graph.parse_edge_list`
        manifest (str): manifest file or catalog name checked against the
            parsed counts
    """
    manifest = load_manifest(manifest) if manifest else None
    if Path(source).is_file():
        return parse_edge_list(source, format, manifest)
    if source in _DATASET_FACTORIES:
        dataset = Dataset.from_name(source)
        log.info(f'Generated {dataset!r}')
        return dataset
    raise ManifestError(f'No dataset file or generator: {source!r}')


def write_run_manifest(workdir, info):
    path = Path(workdir) / 'manifest.toml'
    with path.open('w') as f:
        toml.dump(info, f)
    log.info(f'Run manifest written to {path}')
