"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy fallback. Setting ``PQT_BACKEND=python`` forces the fallback.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

kernels = _fallback
name = "python"


def use(backend):
    """Switch the active kernel backend (``"cython"`` or ``"python"``)."""
    global kernels, name
    if backend not in BACKENDS:
        raise ValueError(f"backend {backend!r} unavailable; have {sorted(BACKENDS)}")
    kernels = BACKENDS[backend]
    name = backend


def available():
    return sorted(BACKENDS)


if os.environ.get("PQT_BACKEND", "").lower() != "python" and _compiled is not None:
    use("cython")
