"""Kernel backend selection.

The compiled extension is preferred; the numpy implementation is the
fallback.  Set ``SEMLOOP_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and by the backend-agreement tests).
"""

import os

if os.environ.get("SEMLOOP_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]

BACKEND = kernels.BACKEND_NAME

l1_score = kernels.l1_score
l1_scores_many = kernels.l1_scores_many
horn_alignment = kernels.horn_alignment
solve_assignment = kernels.solve_assignment
