"""Numeric inner-loop kernels with a compiled core and a pure-NumPy fallback.

The compiled extension (``flapest._kernels._fastcore``, built from Cython) is
preferred when it imported successfully; otherwise the pure-NumPy backend in
``flapest._kernels.pure`` is used.  Set ``FLAPEST_PURE_PYTHON=1`` to force the
fallback.  Both backends implement identical contracts and are cross-checked
in the test suite and compared in ``flapest.benchmark``.
"""

import os

from . import pure

if os.environ.get("FLAPEST_PURE_PYTHON", "") not in ("", "0"):
    _impl = pure
    HAVE_COMPILED = False
else:
    try:
        from . import _fastcore as _impl

        HAVE_COMPILED = True
    except ImportError:
        _impl = pure
        HAVE_COMPILED = False

BACKEND = "compiled" if HAVE_COMPILED else "pure"

fft_radix2 = _impl.fft_radix2
biquad_block = _impl.biquad_block
kernel_vector = _impl.kernel_vector
kernel_matrix = _impl.kernel_matrix
gp_mean = _impl.gp_mean
kmeans_assign = _impl.kmeans_assign
cross_corr = _impl.cross_corr

__all__ = [
    "BACKEND",
    "HAVE_COMPILED",
    "biquad_block",
    "cross_corr",
    "fft_radix2",
    "gp_mean",
    "kernel_matrix",
    "kernel_vector",
    "kmeans_assign",
    "pure",
]
