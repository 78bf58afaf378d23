"""Electron on a plane above a magnetic monopole: orbits, quasi-bound spectra and lifetimes.

Submodules are imported on demand so that the command-line front end can
configure the numba thread pool before numba is loaded.
"""

__version__ = "0.1.0"
