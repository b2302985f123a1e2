"""Pure-numpy z-buffer fill, semantically identical to the compiled kernel.

Kept in lockstep with _raster.pyx: same pixel-center convention, same edge
inclusivity, same strict '<' depth test with triangles processed in order.
The backend-equality test asserts bit-identical output.
"""

import math

import numpy as np


def raster_depth_faces(xy, inv_z, width, height):
    """Rasterize screen-space triangles into a depth and face-index buffer.

    xy:    (T, 3, 2) pixel-space vertex positions.
    inv_z: (T, 3) reciprocal view-space depth per vertex.
    Returns (depth, face): depth is +inf where empty, face is -1 where empty.
    """
    depth = np.full((height, width), np.inf, dtype=np.float64)
    face = np.full((height, width), -1, dtype=np.int32)

    for t in range(xy.shape[0]):
        (x0, y0), (x1, y1), (x2, y2) = xy[t]
        iz0, iz1, iz2 = inv_z[t]
        area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area2 == 0.0:
            continue

        jmin = max(0, int(math.ceil(min(x0, x1, x2) - 0.5)))
        jmax = min(width - 1, int(math.floor(max(x0, x1, x2) - 0.5)))
        imin = max(0, int(math.ceil(min(y0, y1, y2) - 0.5)))
        imax = min(height - 1, int(math.floor(max(y0, y1, y2) - 0.5)))
        if jmin > jmax or imin > imax:
            continue

        py, px = np.mgrid[imin : imax + 1, jmin : jmax + 1].astype(np.float64)
        py += 0.5
        px += 0.5
        w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
        w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
        if area2 > 0.0:
            inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        else:
            inside = (w0 <= 0.0) & (w1 <= 0.0) & (w2 <= 0.0)
        if not inside.any():
            continue

        izp = (w0 * iz0 + w1 * iz1 + w2 * iz2) / area2
        with np.errstate(divide="ignore"):
            z = np.where(izp > 0.0, 1.0 / izp, np.inf)
        patch_d = depth[imin : imax + 1, jmin : jmax + 1]
        patch_f = face[imin : imax + 1, jmin : jmax + 1]
        upd = inside & (izp > 0.0) & (z < patch_d)
        patch_d[upd] = z[upd]
        patch_f[upd] = t
    return depth, face
