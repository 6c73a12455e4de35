"""Select the compiled kernel module when available, else the numpy fallback.

Set ``MCSORT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("MCSORT_PURE_PYTHON"):
    _impl = _kernels_py
    COMPILED = False
else:
    try:
        from . import _kernels as _impl
        COMPILED = True
    except ImportError:
        _impl = _kernels_py
        COMPILED = False

FORM_NONE = _kernels_py.FORM_NONE
FORM_PRODUCT = _kernels_py.FORM_PRODUCT
FORM_MINIMUM = _kernels_py.FORM_MINIMUM

encoded_dimension = _impl.encoded_dimension
encode_rows = _impl.encode_rows
supporter_mass = _impl.supporter_mass
m3_scores = _impl.m3_scores
m4_scores = _impl.m4_scores

BACKEND = "cython" if COMPILED else "numpy"
