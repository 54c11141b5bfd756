"""Hot-loop kernels with two interchangeable backends.

The compiled Cython extension is preferred when it built successfully;
otherwise the numpy fallback is used.  Set ``SPD_NO_EXT=1`` to force the
fallback.  Both backends perform the same floating-point operations in
the same order, so results are bit-identical either way (verified in
tests/test_kernels.py); the choice only affects speed.

Dense matrix products are deliberately NOT here: they stay on numpy's
BLAS in both backends, which a hand-rolled kernel would not beat.
"""

import os

if os.environ.get("SPD_NO_EXT"):
    from . import fallback as _impl
else:
    try:
        from . import _ext as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import fallback as _impl

BACKEND = _impl.BACKEND

adamw_update = _impl.adamw_update
subset_sums = _impl.subset_sums
min_gap_grid = _impl.min_gap_grid
min_gap_closest = _impl.min_gap_closest
