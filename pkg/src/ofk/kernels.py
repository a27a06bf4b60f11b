"""Hot-loop kernels, compiled when available.

The Cython build is used unless it failed to compile or ``OFK_PURE_PYTHON``
is set; ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels

if os.environ.get("OFK_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

decode_runs = _impl.decode_runs
max_bipartite_matching = _impl.max_bipartite_matching

__all__ = ["BACKEND", "decode_runs", "max_bipartite_matching"]
