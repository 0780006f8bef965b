"""Numeric kernel backend selection.

Imports the compiled extension when it was built, otherwise the pure-Python
twin. ``DRIFTLAB_PURE_PYTHON=1`` forces the fallback (used by the parity tests
and the benchmark). ``BACKEND`` names whichever one is active.
"""

from __future__ import annotations

import os

if os.environ.get("DRIFTLAB_PURE_PYTHON") == "1":
    from driftlab._core import _pure as kernels
else:
    try:
        from driftlab._core import _speed as kernels  # type: ignore[no-redef]
    except ImportError:
        from driftlab._core import _pure as kernels  # type: ignore[no-redef]

BACKEND: str = kernels.BACKEND

__all__ = ["kernels", "BACKEND"]
