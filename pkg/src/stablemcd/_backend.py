"""Pick the compiled kernels when available, else the numpy fallback.

Set ``STABLEMCD_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"

if not os.environ.get("STABLEMCD_PURE_PYTHON"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

outlyingness = _impl.outlyingness
rank_one_update_inplace = _impl.rank_one_update
rank_one_downdate_inplace = _impl.rank_one_downdate
apply_swaps_inplace = _impl.apply_swaps
