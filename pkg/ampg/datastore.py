#!/usr/bin/env python
"""
datastore.py

Last Header Update: 10/18/26
"""
import netCDF4 as nc


class AMPGDataStore:
    """
    Thin ``netCDF4.Dataset`` wrapper used for trajectory archives.

    Closes the dataset on context exit and delegates everything else.
    Automatic masking is off so variables read back as plain arrays.
    """

    def __init__(self, *args, **kwargs):
        self._ds = nc.Dataset(*args, **kwargs)
        self._ds.set_auto_mask(False)

    def __getattr__(self, name):
        return getattr(self._ds, name)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self._ds.close()
        return False

    def __getitem__(self, key):
        return self._ds[key]

    def __contains__(self, item):
        return item in self._ds.variables

    def __len__(self):
        return len(self._ds.variables)

    def __repr__(self):
        return f"AMPG trajectory archive wrapping {self._ds}"
