"""Select the kernel implementation at import time.

The compiled ``_kernels`` extension is preferred.  Setting the environment
variable ``RENYI_OUTLIER_PURE=1`` (or a failed build) selects the numpy
fallback.  Both produce the same results to within rounding.
"""

import os

from . import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("RENYI_OUTLIER_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        kernels = _fallback


def available_backends():
    """Names of the kernel modules importable in this environment."""
    names = {"python": _fallback}
    try:
        from . import _kernels
        names["cython"] = _kernels
    except ImportError:
        pass
    return names
