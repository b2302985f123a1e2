# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled z-buffer fill.

Semantics must stay in lockstep with kernels.fallback.raster_depth_faces:
the test suite asserts bit-identical output between the two backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor

cnp.import_array()


def raster_depth_faces(
    cnp.ndarray[cnp.float64_t, ndim=3] xy,
    cnp.ndarray[cnp.float64_t, ndim=2] inv_z,
    int width,
    int height,
):
    """Rasterize screen-space triangles into a depth and face-index buffer.

    xy:    (T, 3, 2) pixel-space vertex positions.
    inv_z: (T, 3) reciprocal view-space depth per vertex.
    Returns (depth, face): depth is +inf where empty, face is -1 where empty.
    Pixel centers sit at integer+0.5; inclusive edge test on both sides;
    depth test is strict '<' with triangles processed in order.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] depth = np.full(
        (height, width), np.inf, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.int32_t, ndim=2] face = np.full(
        (height, width), -1, dtype=np.int32
    )
    cdef Py_ssize_t t, n = xy.shape[0]
    cdef int i, j, jmin, jmax, imin, imax
    cdef double x0, y0, x1, y1, x2, y2, iz0, iz1, iz2
    cdef double area2, xmin, xmax, ymin, ymax
    cdef double px, py, w0, w1, w2, izp, z

    for t in range(n):
        x0 = xy[t, 0, 0]; y0 = xy[t, 0, 1]
        x1 = xy[t, 1, 0]; y1 = xy[t, 1, 1]
        x2 = xy[t, 2, 0]; y2 = xy[t, 2, 1]
        iz0 = inv_z[t, 0]; iz1 = inv_z[t, 1]; iz2 = inv_z[t, 2]

        area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area2 == 0.0:
            continue

        xmin = min(x0, min(x1, x2)); xmax = max(x0, max(x1, x2))
        ymin = min(y0, min(y1, y2)); ymax = max(y0, max(y1, y2))
        jmin = <int>ceil(xmin - 0.5); jmax = <int>floor(xmax - 0.5)
        imin = <int>ceil(ymin - 0.5); imax = <int>floor(ymax - 0.5)
        if jmin < 0: jmin = 0
        if imin < 0: imin = 0
        if jmax > width - 1: jmax = width - 1
        if imax > height - 1: imax = height - 1

        for i in range(imin, imax + 1):
            py = i + 0.5
            for j in range(jmin, jmax + 1):
                px = j + 0.5
                w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
                w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
                w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
                if area2 > 0.0:
                    if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                        continue
                else:
                    if w0 > 0.0 or w1 > 0.0 or w2 > 0.0:
                        continue
                izp = (w0 * iz0 + w1 * iz1 + w2 * iz2) / area2
                if izp <= 0.0:
                    continue
                z = 1.0 / izp
                if z < depth[i, j]:
                    depth[i, j] = z
                    face[i, j] = <cnp.int32_t>t
    return depth, face
