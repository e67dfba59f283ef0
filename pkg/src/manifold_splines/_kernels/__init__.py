"""Hot-kernel backend selection.

The compiled Cython extension is preferred; a vectorized numpy fallback
is selected when the extension is missing or MANIFOLD_SPLINES_NO_EXT is
set to a non-empty value.
"""

from __future__ import annotations

import os

if os.environ.get("MANIFOLD_SPLINES_NO_EXT"):
    from . import fallback as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build environment
        from . import fallback as _impl

        BACKEND = "numpy"

element_arrays = _impl.element_arrays
legendre_sum = _impl.legendre_sum

__all__ = ["BACKEND", "element_arrays", "legendre_sum"]
