"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy fallback in ``_pykernels``. Set ``BOSEGIBBS_PURE_PYTHON=1`` to force the
fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("BOSEGIBBS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

grade_count = _impl.grade_count
grade_states = _impl.grade_states
rank_states = _impl.rank_states
second_quantize_block = _impl.second_quantize_block
lowering_map = _impl.lowering_map
laguerre_diagonal = _impl.laguerre_diagonal
displacement_matrix = _impl.displacement_matrix

__all__ = [
    "BACKEND",
    "grade_count",
    "grade_states",
    "rank_states",
    "second_quantize_block",
    "lowering_map",
    "laguerre_diagonal",
    "displacement_matrix",
]
