"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``SIVSIM_PURE_PYTHON=1``
to force the pure-Python fallback.
"""
import os

from . import _pykernels

python_backend = _pykernels
compiled_backend = None
if os.environ.get("SIVSIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kmc_core as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend or python_backend
BACKEND_NAME = "cython" if compiled_backend is not None else "python"

kmc_chunk = backend.kmc_chunk
pair_counts = backend.pair_counts
