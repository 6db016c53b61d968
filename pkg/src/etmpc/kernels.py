"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set ``ETMPC_PURE_PYTHON=1`` to force the fallback (used by tests and the
kernel benchmark). ``IMPL`` reports which implementation is active.
"""
from __future__ import annotations

import os

if os.environ.get("ETMPC_PURE_PYTHON", "").strip() not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

IMPL: str = _impl.IMPL
arm_rates = _impl.arm_rates
poly_eval = _impl.poly_eval
