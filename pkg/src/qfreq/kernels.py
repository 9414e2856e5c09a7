"""Oracle kernel backend selection.

The compiled Cython extension is preferred when importable; the vectorized
numpy implementation is the drop-in fallback.  Both produce bit-identical
results (same accumulation order, extension built without FP contraction).
Set ``QFREQ_NO_EXT=1`` to force the fallback.
"""
from __future__ import annotations

import os

from ._oracle_numpy import NumpyOracle
from .physics import OracleTables

try:  # pragma: no cover - exercised only when the extension is built
    from ._oracle_core import CyOracle
except ImportError:  # pragma: no cover
    CyOracle = None


def compiled_available() -> bool:
    return CyOracle is not None


def backend_name() -> str:
    if compiled_available() and not os.environ.get("QFREQ_NO_EXT"):
        return "cython"
    return "numpy"


def make_kernel(tables: OracleTables, backend: str | None = None):
    """Instantiate an oracle kernel; ``backend`` overrides auto-selection."""
    name = backend or backend_name()
    if name == "cython":
        if CyOracle is None:
            raise ValueError("compiled kernel requested but not available")
        return CyOracle(tables)
    if name == "numpy":
        return NumpyOracle(tables)
    raise ValueError(f"unknown kernel backend {name!r}")
