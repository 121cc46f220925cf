"""Kernel backend selection.

The compiled extension (``gridaste.kernels._native``) is preferred when it
imported cleanly; the numpy reference twin is always available. Set
``GRIDASTE_KERNELS=reference`` or ``=native`` to force a backend.
"""

import os

from gridaste.errors import ConfigError
from gridaste.kernels import reference

try:
    from gridaste.kernels import _native

    HAS_NATIVE = True
except ImportError:
    _native = None
    HAS_NATIVE = False

_FORCED = os.environ.get("GRIDASTE_KERNELS", "").strip().lower()
if _FORCED == "native":
    if not HAS_NATIVE:
        raise ConfigError("GRIDASTE_KERNELS=native but the compiled extension is unavailable")
    _impl = _native
elif _FORCED == "reference":
    _impl = reference
elif _FORCED == "":
    _impl = _native if HAS_NATIVE else reference
else:
    raise ConfigError(f"GRIDASTE_KERNELS must be 'native' or 'reference', got {_FORCED!r}")


def backend() -> str:
    return "native" if _impl is _native and _impl is not None else "reference"


span_pool_forward = _impl.span_pool_forward
span_pool_backward = _impl.span_pool_backward
neighbor_agg_forward = _impl.neighbor_agg_forward
neighbor_agg_backward = _impl.neighbor_agg_backward

__all__ = [
    "HAS_NATIVE",
    "backend",
    "neighbor_agg_backward",
    "neighbor_agg_forward",
    "reference",
    "span_pool_backward",
    "span_pool_forward",
]
