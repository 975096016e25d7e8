import h5py
import numpy as np

__all__ = ()

SUB_SEEDS = ('order', 'delete', 'assign')


class H5LogTable:
    """Append-only table of scalar columns stored in an HDF5 group."""

    def __init__(self, group):
        self._group = group

    def __getitem__(self, label):
        return self._group[label][...] if label in self._group else []

    def __len__(self):
        return min((ds.shape[0] for ds in self._group.values()), default=0)

    def append(self, row):
        for label, value in row.items():
            if label not in self._group:
                dtype = h5py.string_dtype() if isinstance(value, str) else type(value)
                self._group.create_dataset(label, (0,), maxshape=(None,), dtype=dtype)
            ds = self._group[label]
            ds.resize(ds.shape[0] + 1, axis=0)
            ds[-1] = value


def derive_seeds(seed):
    """Derive the independent sub-seeds of a run from its top-level seed.

    The seed is fed into :class:`numpy.random.SeedSequence`, whose spawned
    children, in the order of :data:`SUB_SEEDS`, each yield one 32-bit word.
    """
    children = np.random.SeedSequence(seed).spawn(len(SUB_SEEDS))
    return {
        name: int(child.generate_state(1)[0])
        for name, child in zip(SUB_SEEDS, children)
    }
