"""Selection of the tree-kernel backend.

The hot loops (tree growth and tree application) exist twice: a numba
@njit implementation and a pure-numpy one with identical semantics. The
numba path is the default whenever numba imports; set PIPEFORGE_NUMBA=0
to force the numpy fallback. Both backends consume the same pre-drawn
random stream in the same order and produce identical trees, so the flag
never changes results, only speed.
"""

from __future__ import annotations

import logging
import os

logger = logging.getLogger(__name__)

_FALSEY = {"0", "false", "off", "no"}


def _numba_requested() -> bool:
    return os.environ.get("PIPEFORGE_NUMBA", "1").strip().lower() not in _FALSEY


if _numba_requested():
    try:
        from pipeforge.learners import _tree_numba as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - exercised only without numba
        from pipeforge.learners import _tree_numpy as _impl

        BACKEND = "numpy"
        logger.warning("numba unavailable, falling back to numpy tree kernels")
else:
    from pipeforge.learners import _tree_numpy as _impl

    BACKEND = "numpy"

grow_tree = _impl.grow_tree
apply_tree = _impl.apply_tree
