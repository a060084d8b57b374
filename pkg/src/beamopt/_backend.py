"""Kernel backend selection.

The package ships two interchangeable kernel implementations: the compiled
extension `beamopt._kernels` (Cython) and the NumPy reference
`beamopt._pykernels`.  By default the compiled one is used when it was
built.  Override with the BEAMOPT_BACKEND environment variable:

    BEAMOPT_BACKEND=python     force the NumPy fallback
    BEAMOPT_BACKEND=compiled   require the extension (ImportError if absent)
"""

import os

_requested = os.environ.get("BEAMOPT_BACKEND", "auto").strip().lower()

if _requested in ("auto", "", "compiled", "cython"):
    try:
        from beamopt import _kernels as kernels

        BACKEND = "compiled"
    except ImportError:
        if _requested in ("compiled", "cython"):
            raise ImportError(
                "BEAMOPT_BACKEND=compiled but beamopt._kernels is not built; "
                "reinstall with a C compiler or unset the variable"
            ) from None
        from beamopt import _pykernels as kernels

        BACKEND = "python"
elif _requested in ("python", "numpy", "pure"):
    from beamopt import _pykernels as kernels

    BACKEND = "python"
else:
    raise ValueError("unknown BEAMOPT_BACKEND value: %r" % _requested)


def active_backend():
    """Name of the kernel implementation in use: 'compiled' or 'python'."""
    return BACKEND
