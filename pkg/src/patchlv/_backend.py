"""Kernel backend selection.

The compiled extension is preferred; the NumPy fallback is used when it is
missing or when the environment variable PATCHLV_PURE is set (any nonempty
value). Both backends expose identical functions and semantics.
"""

import os

if os.environ.get("PATCHLV_PURE"):
    from . import _purekernels as _impl

    COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        from . import _purekernels as _impl

        COMPILED = False

rk4_two_span = _impl.rk4_two_span
rk4_single_span = _impl.rk4_single_span
tree_cycle_rhs = _impl.tree_cycle_rhs
power_iteration = _impl.power_iteration


def backend_name():
    return "compiled" if COMPILED else "pure"
