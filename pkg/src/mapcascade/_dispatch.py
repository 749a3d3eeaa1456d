"""Select the compiled sampling kernel when available, else the fallback.

Both backends consume the underlying bit-generator stream identically and
use the same floating-point expression structure, so results are
bit-identical; only throughput differs.
"""

from __future__ import annotations

try:  # pragma: no cover - exercised indirectly via either branch
    from . import _kernel as impl

    KERNEL_AVAILABLE = True
except ImportError:  # pragma: no cover
    from . import _fallback as impl

    KERNEL_AVAILABLE = False

__all__ = ["impl", "KERNEL_AVAILABLE"]
