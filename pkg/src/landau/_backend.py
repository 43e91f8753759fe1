"""Select the stencil implementation at import time.

The compiled extension ``landau._stencil_ext`` is used when it imports;
``LANDAU_BACKEND=python`` forces the numpy fallback.
"""

import os

from . import _stencil_py

BACKEND = "python"
_native = None

if os.environ.get("LANDAU_BACKEND", "").lower() != "python":
    try:
        from . import _stencil_ext as _native

        BACKEND = "native"
    except ImportError:
        _native = None

if _native is not None:
    face_fluxes = _native.face_fluxes
    hessian_contract = _native.hessian_contract
    centred_flux_divergence = _native.centred_flux_divergence
else:
    face_fluxes = _stencil_py.face_fluxes
    hessian_contract = _stencil_py.hessian_contract
    centred_flux_divergence = _stencil_py.centred_flux_divergence

centred_gradient = _stencil_py.centred_gradient
python_face_fluxes = _stencil_py.face_fluxes
python_hessian_contract = _stencil_py.hessian_contract
python_centred_flux_divergence = _stencil_py.centred_flux_divergence
