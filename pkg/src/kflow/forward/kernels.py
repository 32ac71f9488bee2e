"""Assembly backend selection.

The compiled extension is preferred when it imported cleanly; setting
KFLOW_PURE_PYTHON=1 forces the NumPy fallback. Either backend is
deterministic on its own; they agree with each other to roundoff.
"""

from __future__ import annotations

import os

from kflow.forward import _assembly_py

if os.environ.get("KFLOW_PURE_PYTHON", "0") == "1":
    _impl = _assembly_py
    BACKEND = "numpy"
else:
    try:
        from kflow.forward import _assembly as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _assembly_py
        BACKEND = "numpy"

convection_supg_values = _impl.convection_supg_values
