"""Backend selection for the hot loops.

The compiled Cython module is used when it was built; otherwise the numpy
implementation is loaded. Set ``EVTMATCH_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("EVTMATCH_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = "cython" if _impl.__name__.endswith("._kernels") else "python"

correlate_valid = _impl.correlate_valid
threshold_runs = _impl.threshold_runs
local_maxima = _impl.local_maxima
pairwise_iou = _impl.pairwise_iou

__all__ = [
    "BACKEND",
    "correlate_valid",
    "threshold_runs",
    "local_maxima",
    "pairwise_iou",
]
