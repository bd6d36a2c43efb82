"""Oscillation source localization from synchrophasor records.

Intentionally import-light: heavy submodules are imported on demand so the
command-line front end can pin BLAS thread counts before numpy loads.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
