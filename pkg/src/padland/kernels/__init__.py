"""Hot-kernel backend dispatch.

Two interchangeable implementations of the per-pixel kernels exist:
numba @njit loop code and a pure-numpy fallback. The environment variable
PADLAND_BACKEND selects one ("numba" or "numpy"); unset, numba is used
when importable. Integer/boolean kernels (threshold, labeling, voting,
contours) are bit-identical between backends; float kernels agree
elementwise except inside genuine reductions (optical flow, NCC), which
match to tight tolerances.
"""

import os

from ..errors import SetupError

try:
    import numba  # noqa: F401
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

_requested = os.environ.get("PADLAND_BACKEND", "").strip().lower()
if _requested in ("", "auto"):
    BACKEND = "numba" if HAS_NUMBA else "numpy"
elif _requested == "numba":
    if not HAS_NUMBA:
        raise SetupError("PADLAND_BACKEND=numba but numba is not importable")
    BACKEND = "numba"
elif _requested == "numpy":
    BACKEND = "numpy"
else:
    raise SetupError(f"PADLAND_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if BACKEND == "numba":
    from . import _numba as _impl
else:
    from . import _numpy as _impl


def get_backend(name):
    """Return a specific kernel module ('numba' or 'numpy'), independent
    of the active selection. Used by the equivalence tests and benchmark."""
    if name == "numpy":
        from . import _numpy
        return _numpy
    if name == "numba":
        if not HAS_NUMBA:
            raise SetupError("numba backend requested but numba is not importable")
        from . import _numba
        return _numba
    raise SetupError(f"unknown backend {name!r}")


adaptive_threshold = _impl.adaptive_threshold
sep_filter = _impl.sep_filter
bilinear_resize = _impl.bilinear_resize
label_components = _impl.label_components
hough_vote = _impl.hough_vote
trace_contour = _impl.trace_contour
lk_level = _impl.lk_level
ncc_patches = _impl.ncc_patches
render_pad = _impl.render_pad
