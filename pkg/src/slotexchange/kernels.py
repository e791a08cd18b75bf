"""Backend selection for the coordination hot loop.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``SLOTEXCHANGE_KERNELS=python`` to force the fallback.
"""

import logging
import os

from slotexchange import _pykernels

logger = logging.getLogger(__name__)

_BACKENDS = {"python": _pykernels}

try:
    from slotexchange import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    _BACKENDS["cython"] = _ckernels


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        name = BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {available_backends()}") from None


_requested = os.environ.get("SLOTEXCHANGE_KERNELS", "").strip().lower()
if _requested:
    if _requested not in _BACKENDS:
        logger.warning("requested kernel backend %r unavailable, using fallback", _requested)
        _requested = "python"
    BACKEND = _requested
else:
    BACKEND = "cython" if _ckernels is not None else "python"
