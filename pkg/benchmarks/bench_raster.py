"""Benchmark the z-buffer fill: compiled extension vs numpy fallback.

Builds real screen-space workloads from the bundled fixtures, checks the
two kernels produce bit-identical buffers, then reports best-of-N wall
times and the speedup.

Run:  python3 benchmarks/bench_raster.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time
from dataclasses import replace

import numpy as np

from physparts.fixtures import bottle_cap, cabinet_composite, laptop_hinge
from physparts.kernels import fallback
from physparts.render import NEAR_PLANE, _gather_faces, default_property_views, project_points

try:
    from physparts.kernels._raster import raster_depth_faces as compiled_fill
except ImportError:
    compiled_fill = None


def screen_space_workload(asset, resolution: int) -> tuple:
    view = replace(default_property_views()[0], resolution=(resolution, resolution))
    verts, faces, _ = _gather_faces(asset)
    xy, z = project_points(verts, view)
    tri_xy = xy[faces]
    tri_z = z[faces]
    keep = (tri_z > NEAR_PLANE).all(axis=1)
    return (np.ascontiguousarray(tri_xy[keep], dtype=np.float64),
            np.ascontiguousarray(1.0 / tri_z[keep], dtype=np.float64),
            resolution, resolution)


def best_of(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5, help="best-of repeat count")
    opts = ap.parse_args()

    cases = [
        ("laptop 256", screen_space_workload(laptop_hinge()[0], 256)),
        ("laptop 512", screen_space_workload(laptop_hinge()[0], 512)),
        ("laptop 1024", screen_space_workload(laptop_hinge()[0], 1024)),
        ("cabinet 512", screen_space_workload(cabinet_composite()[0], 512)),
        ("bottle 512", screen_space_workload(bottle_cap()[0], 512)),
    ]

    if compiled_fill is None:
        print("compiled kernel not importable; timing the fallback only")

    header = f"{'case':<14}{'tris':>6}{'pixels':>10}{'python ms':>12}"
    if compiled_fill is not None:
        header += f"{'compiled ms':>13}{'speedup':>9}"
    print(header)
    for name, (xy, inv_z, w, h) in cases:
        py_t = best_of(fallback.raster_depth_faces, (xy, inv_z, w, h), opts.repeat)
        row = f"{name:<14}{xy.shape[0]:>6}{w * h:>10}{1e3 * py_t:>12.2f}"
        if compiled_fill is not None:
            c_t = best_of(compiled_fill, (xy, inv_z, w, h), opts.repeat)
            d_py, f_py = fallback.raster_depth_faces(xy, inv_z, w, h)
            d_c, f_c = compiled_fill(xy, inv_z, w, h)
            assert np.array_equal(d_py, d_c) and np.array_equal(f_py, f_c), \
                f"{name}: backends disagree"
            row += f"{1e3 * c_t:>13.2f}{py_t / c_t:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
