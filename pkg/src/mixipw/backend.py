"""Kernel backend selection.

The hot numeric loops exist twice: jit-compiled in ``_kernels_numba`` and as
plain vectorized numpy in ``_kernels_numpy``. The numba variants are used when
numba imports cleanly and the environment variable ``MIXIPW_DISABLE_NUMBA`` is
unset (or set to something falsy); otherwise the package silently runs on the
numpy fallback. Both backends implement identical contracts, so everything
above this module is backend-agnostic.
"""
from __future__ import annotations

import os

from . import _kernels_numpy

_TRUTHY = {"1", "true", "yes", "on"}


def _numba_disabled() -> bool:
    return os.environ.get("MIXIPW_DISABLE_NUMBA", "").strip().lower() in _TRUTHY


if _numba_disabled():
    _impl = _kernels_numpy
    _BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as _impl

        _BACKEND = "numba"
    except ImportError:
        _impl = _kernels_numpy
        _BACKEND = "numpy"


def backend_name() -> str:
    """Name of the active kernel backend: "numba" or "numpy"."""
    return _BACKEND


mixture_stats = _impl.mixture_stats
softlogit_value = _impl.softlogit_value
softlogit_stats = _impl.softlogit_stats
wls_moments = _impl.wls_moments
weighted_rss = _impl.weighted_rss
