"""Backend selection for the hot kernels.

The compiled extension ``curveflow._ckernels`` is used when it imports;
otherwise the numpy implementation in ``curveflow._pykernels`` is used.
Setting ``CURVEFLOW_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("CURVEFLOW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

sym_eig = _impl.sym_eig
phi_all = _impl.phi_all
pinch_batch = _impl.pinch_batch
q_decomposed_batch = _impl.q_decomposed_batch
profile_geometry = _impl.profile_geometry

__all__ = [
    "BACKEND",
    "sym_eig",
    "phi_all",
    "pinch_batch",
    "q_decomposed_batch",
    "profile_geometry",
]
