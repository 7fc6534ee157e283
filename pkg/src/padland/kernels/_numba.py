"""numba-compiled kernels: @njit applied to the loop implementations."""

from numba import njit

from . import _loops

adaptive_threshold = njit(cache=True)(_loops.adaptive_threshold)
sep_filter = njit(cache=True)(_loops.sep_filter)
bilinear_resize = njit(cache=True)(_loops.bilinear_resize)
label_components = njit(cache=True)(_loops.label_components)
hough_vote = njit(cache=True)(_loops.hough_vote)
trace_contour = njit(cache=True)(_loops.trace_contour)
lk_level = njit(cache=True)(_loops.lk_level)
ncc_patches = njit(cache=True)(_loops.ncc_patches)
render_pad = njit(cache=True)(_loops.render_pad)
