"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when importable; set
``THERMORICHARDS_PURE_PYTHON=1`` to force the numpy implementation (used by
the benchmark and by the kernel equivalence tests).
"""
import os

from . import _ref

if os.environ.get("THERMORICHARDS_PURE_PYTHON", "") == "1":
    _impl = _ref
    USING_COMPILED = False
else:
    try:
        from . import _core as _impl
        USING_COMPILED = True
    except ImportError:
        _impl = _ref
        USING_COMPILED = False

density_invert_log = _impl.density_invert_log
saturation_solve_default = _impl.saturation_solve_default

__all__ = [
    "density_invert_log",
    "saturation_solve_default",
    "USING_COMPILED",
]
