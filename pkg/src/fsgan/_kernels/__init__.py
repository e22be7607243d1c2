"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the numpy
reference implementation is the fallback. ``FSGAN_BACKEND=pure|native``
forces the choice (``native`` raises if the extension is unavailable).
"""

import os

from . import pure

_requested = os.environ.get("FSGAN_BACKEND", "").strip().lower()

if _requested == "pure":
    kernels = pure
else:
    try:
        from . import _native as kernels  # type: ignore[no-redef]
    except ImportError:
        if _requested == "native":
            raise ImportError(
                "FSGAN_BACKEND=native but the compiled extension is not "
                "built; reinstall the package or unset FSGAN_BACKEND"
            )
        kernels = pure


def backend_name() -> str:
    """Name of the active kernel backend ('native' or 'pure')."""
    return kernels.NAME
