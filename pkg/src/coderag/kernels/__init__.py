"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The compiled extension is selected at import time; set the environment
variable ``CODERAG_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and by the dual-backend equivalence test).
"""

from __future__ import annotations

import os

from ._pure import levenshtein as pure_levenshtein

if os.environ.get("CODERAG_PURE_PYTHON"):
    levenshtein = pure_levenshtein
    BACKEND = "pure"
else:
    try:
        from ._lev import levenshtein  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        levenshtein = pure_levenshtein
        BACKEND = "pure"

__all__ = ["levenshtein", "pure_levenshtein", "BACKEND"]
