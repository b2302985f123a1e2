"""Raster kernel backend selection.

The compiled extension is preferred when importable; setting the environment
variable PHYSPARTS_PURE=1 forces the numpy fallback (used by the backend
equality tests and the benchmark).
"""

import os

from . import fallback

if os.environ.get("PHYSPARTS_PURE"):
    raster_depth_faces = fallback.raster_depth_faces
    BACKEND = "python"
else:
    try:
        from ._raster import raster_depth_faces

        BACKEND = "compiled"
    except ImportError:
        raster_depth_faces = fallback.raster_depth_faces
        BACKEND = "python"

__all__ = ["raster_depth_faces", "BACKEND", "fallback"]
