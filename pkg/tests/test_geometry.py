from __future__ import annotations

import itertools

import numpy as np
import pytest

from physparts.asset import KinematicConstraint, ObjectAsset
from physparts.errors import EmptyGeometry
from physparts.fixtures import box, estimation_fixtures, tiny_appendage
from physparts.geometry import (
    MergePolicy,
    PointCloud,
    is_mergeable,
    merge_tiny_parts,
    nearest_distances,
    normalize_object,
    surface_sample,
)
from physparts.meshio import TriMesh

from conftest import make_part, two_box_asset


# --- normalization ----------------------------------------------------------


def test_normalize_unit_cube_offset():
    a = two_box_asset().with_parts([make_part(1, (0, 0, 0), (2, 2, 2))], [])
    out = normalize_object(a)
    v = out.parts[0].mesh.vertices
    assert np.allclose(v.min(axis=0), [-1, -1, -1])
    assert np.allclose(v.max(axis=0), [1, 1, 1])


def test_normalize_preserves_aspect_ratio():
    a = two_box_asset().with_parts([make_part(1, (-2, -1, -1), (2, 1, 1))], [])
    out = normalize_object(a)
    v = out.parts[0].mesh.vertices
    assert np.allclose(v.max(axis=0) - v.min(axis=0), [2.0, 1.0, 1.0])
    assert out.absolute_scale == a.absolute_scale


def test_normalize_idempotent_and_bounds(rng):
    for _ in range(20):
        lo = rng.uniform(-5, 5, 3)
        hi = lo + rng.uniform(0.1, 10, 3)
        a = two_box_asset().with_parts([make_part(1, tuple(lo), tuple(hi))], [])
        once = normalize_object(a)
        twice = normalize_object(once)
        v1 = once.parts[0].mesh.vertices
        v2 = twice.parts[0].mesh.vertices
        assert np.abs(v1 - v2).max() < 1e-12
        assert abs(np.abs(v1).max() - 1.0) < 1e-9
        axis = int(np.argmax(v1.max(axis=0) - v1.min(axis=0)))
        assert abs(v1[:, axis].min() + 1.0) < 1e-9


def test_normalize_maps_pivot_and_prismatic_range():
    a = ObjectAsset(
        object_name="x", category="x", absolute_scale=(1, 1, 1),
        parts=(make_part(1, (0, 0, 0), (4, 2, 2)),
               make_part(2, (0, 0, 2), (4, 2, 4))),
        constraints=(
            KinematicConstraint(kind="C", parent_part=1, child_part=2,
                                direction=(0, 0, 1), pivot=(2.0, 1.0, 2.0)),
            KinematicConstraint(kind="B", parent_part=1, child_part=2,
                                direction=(1, 0, 0), range=(-2.0, 0.0)),
        ))
    out = normalize_object(a)
    # bbox (0,0,0)-(4,2,4): center (2,1,2), half 2 -> k = 0.5
    assert np.allclose(out.constraints[0].pivot, (0.0, 0.0, 0.0))
    assert np.allclose(out.constraints[1].range, (-1.0, 0.0))
    assert out.constraints[1].direction == (1, 0, 0)


def test_normalize_rejects_empty_and_degenerate():
    from dataclasses import replace

    a = two_box_asset()
    with pytest.raises(EmptyGeometry):
        normalize_object(a.with_parts([], []))
    point = TriMesh(np.zeros((3, 3)), np.array([[0, 1, 2]], dtype=np.int32))
    single = a.with_parts(
        [replace(make_part(1, (0, 0, 0), (1, 1, 1)), mesh=point)], [])
    with pytest.raises(EmptyGeometry):
        normalize_object(single)


# --- sampling ---------------------------------------------------------------


def test_surface_sample_binomial_counts():
    # unit square as two equal triangles: per-triangle counts ~ Binomial(n, 1/2)
    verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=np.float64)
    faces = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    mesh = TriMesh(verts, faces)
    n = 10000
    pts = surface_sample(mesh, n, seed=5).points
    in_first = (pts[:, 1] <= pts[:, 0])  # lower-right triangle x >= y
    count = int(in_first.sum())
    sigma = np.sqrt(n * 0.25)
    assert abs(count - n / 2) <= 3 * sigma


def test_surface_sample_single_triangle_barycentric():
    verts = np.array([[0, 0, 0], [2, 0, 0], [0, 3, 0]], dtype=np.float64)
    mesh = TriMesh(verts, np.array([[0, 1, 2]], dtype=np.int32))
    p = surface_sample(mesh, 1, seed=9).points[0]
    # barycentric solve against the triangle's edge basis
    a, b, c = verts
    m = np.stack([b - a, c - a], axis=1)[:2, :]
    uv = np.linalg.solve(m, (p - a)[:2])
    assert uv.min() >= -1e-12 and uv.sum() <= 1 + 1e-12
    assert abs(p[2]) < 1e-12


def test_surface_sample_deterministic_and_exact_count():
    mesh = box((-1, -1, -1), (1, 1, 1))
    p1 = surface_sample(mesh, 777, seed=3)
    p2 = surface_sample(mesh, 777, seed=3)
    p3 = surface_sample(mesh, 777, seed=4)
    assert len(p1) == 777
    assert (p1.points == p2.points).all()
    assert not (p1.points == p3.points).all()


def test_nearest_distances_matches_brute_force(rng):
    # the spatial index's contract is exact agreement with brute force
    for _ in range(10):
        na, nb = rng.integers(1, 5000, 2)
        a = PointCloud(rng.uniform(-1, 1, (int(na), 3)))
        b = PointCloud(rng.uniform(-1, 1, (int(nb), 3)))
        d = nearest_distances(a, b)
        brute = np.sqrt(
            ((a.points[:, None, :] - b.points[None, :, :]) ** 2).sum(axis=2)
        ).min(axis=1)
        assert (d == brute).all()


# --- tiny-part merging ------------------------------------------------------

# truth table over (area <= 0.2, area <= 0.06, faces <= 100); two of the
# eight combinations are geometrically impossible since 0.06 < 0.2.
TRUTH_TABLE = [
    # (area, faces) chosen to hit each feasible row at its boundary side
    (0.05, 60, True),    # (T, T, T) both rules fire
    (0.05, 150, True),   # (T, T, F) hard area rule alone
    (0.10, 60, True),    # (T, F, T) hard area rule alone
    (0.10, 150, True),   # (T, F, F) hard area rule alone
    (0.25, 60, False),   # (F, F, T) neither rule
    (0.25, 150, False),  # (F, F, F) neither rule
]


@pytest.mark.parametrize("area,faces,expected", TRUTH_TABLE)
def test_merge_predicate_truth_table(area, faces, expected):
    assert is_mergeable(area, faces, MergePolicy()) is expected


def test_merge_predicate_infeasible_rows_cannot_occur():
    # (F, T, *): area > 0.2 and area <= 0.06 simultaneously
    policy = MergePolicy()
    for area in np.linspace(0, 1, 101):
        assert not (area > policy.area_threshold_hard
                    and area <= policy.area_threshold_soft)


def test_merge_predicate_boundaries_inclusive():
    policy = MergePolicy()
    assert is_mergeable(0.2, 10 ** 6, policy)
    assert not is_mergeable(0.2 + 1e-12, 10 ** 6, policy)
    assert is_mergeable(0.06, 100, MergePolicy(area_threshold_hard=0.0))
    assert not is_mergeable(0.06, 101, MergePolicy(area_threshold_hard=0.0))


def test_merge_absorbs_and_keeps_isolated():
    asset, expected = tiny_appendage()
    merged = merge_tiny_parts(asset)
    # the touching chip is absorbed into the slab; the isolated speck stays
    assert len(merged.parts) == len(asset.parts) - len(expected["absorbed"])
    names = [p.name for p in merged.parts]
    assert all("chip" not in n for n in names)
    assert any("speck" in n for n in names)


def test_merge_remaps_constraints():
    asset, _ = tiny_appendage()
    c = KinematicConstraint(kind="B", parent_part=1, child_part=3,
                            direction=(1.0, 0.0, 0.0))
    asset = asset.with_parts(asset.parts, [c])
    merged = merge_tiny_parts(asset)
    # part 2 merged away: part 3 renumbers to 2, the joint must follow
    assert len(merged.constraints) == 1
    assert merged.constraints[0].child_part == 2
    assert merged.constraints[0].parent_part == 1


def test_merge_drops_collapsed_joint():
    asset, _ = tiny_appendage()
    c = KinematicConstraint(kind="B", parent_part=1, child_part=2,
                            direction=(1.0, 0.0, 0.0))
    asset = asset.with_parts(asset.parts, [c])
    merged = merge_tiny_parts(asset)
    assert merged.constraints == ()


def test_merge_is_fixpoint_on_all_fixtures():
    policy = MergePolicy()
    for name, (asset, _) in estimation_fixtures().items():
        merged = merge_tiny_parts(asset, policy)
        again = merge_tiny_parts(merged, policy)
        assert len(again.parts) == len(merged.parts), name
