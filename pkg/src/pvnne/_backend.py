"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementations in ``_pykernels`` are used. Setting the environment
variable ``PVNNE_PURE_PYTHON=1`` forces the fallback.
"""

import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

_FORCE_PY = os.environ.get("PVNNE_PURE_PYTHON", "").strip() not in ("", "0")

kernels = _pykernels
BACKEND = "python"

if not _FORCE_PY:
    try:
        from . import _ckernels as kernels  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        logger.debug("compiled kernels unavailable, using numpy fallback")


def get_kernels(name=None):
    """Return a kernel module by name ('cython' or 'python'); default is active."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
