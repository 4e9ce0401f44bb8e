"""Backend dispatch for the receiver hot kernels.

Prefers the compiled extension; transparently falls back to the numpy
implementation when the extension is missing (or when the environment
variable MIMOLINK_FORCE_PYTHON_KERNELS is set, which the benchmark and
equivalence tests use).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("MIMOLINK_FORCE_PYTHON_KERNELS"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND_NAME

demap_extrinsic = _impl.demap_extrinsic
bcjr_pass = _impl.bcjr_pass
