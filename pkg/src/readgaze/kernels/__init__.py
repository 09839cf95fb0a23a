"""Hot-kernel dispatch: compiled extension when available, NumPy fallback.

The backend is chosen once at import time. Set ``READGAZE_KERNELS`` to
``native`` or ``fallback`` to force a choice; ``native`` raises if the
compiled module is missing (so CI can assert the build worked).
"""

from __future__ import annotations

import os

from . import fallback as _fallback

_choice = os.environ.get("READGAZE_KERNELS", "auto").lower()

if _choice not in ("auto", "native", "fallback"):
    raise ValueError(f"READGAZE_KERNELS must be auto|native|fallback, got {_choice!r}")

_impl = None
if _choice in ("auto", "native"):
    try:
        from . import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _choice == "native":
            raise ImportError(
                "READGAZE_KERNELS=native but the compiled kernel module is not built"
            )
        _impl = None

if _impl is None:
    _impl = _fallback
    BACKEND = "fallback"
else:
    BACKEND = "native"

rasterize_scanpath = _impl.rasterize_scanpath
idt_spans = _impl.idt_spans
im2col3x3 = _impl.im2col3x3
col2im3x3 = _impl.col2im3x3
maxpool2x2 = _impl.maxpool2x2
maxpool2x2_backward = _impl.maxpool2x2_backward


def backend_name() -> str:
    """Which kernel implementation this process is using."""
    return BACKEND


__all__ = [
    "BACKEND",
    "backend_name",
    "rasterize_scanpath",
    "idt_spans",
    "im2col3x3",
    "col2im3x3",
    "maxpool2x2",
    "maxpool2x2_backward",
    "fallback",
]
