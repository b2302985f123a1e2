"""Mesh-level geometry: normalization, tiny-part merging, sampling, NN queries.

All coordinates are in the normalized [-1, 1] frame unless a function says
otherwise. Every stochastic operation takes an explicit seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .asset import KinematicConstraint, ObjectAsset, Part, validate_asset
from .errors import EmptyGeometry, ValidationError
from .meshio import TriMesh, merge_meshes

log = logging.getLogger(__name__)

# Adjacency probe for merging: two parts touch if their sampled clouds come
# within this distance. Sample count and seed are fixed so merging is a pure
# function of the asset.
ADJACENCY_DIST = 0.01
ADJACENCY_SAMPLES = 1024
ADJACENCY_SEED = 7


@dataclass(frozen=True)
class PointCloud:
    """Sampled surface points tagged with the part they came from."""

    points: np.ndarray  # (N, 3) float64
    source_part: int = -1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise EmptyGeometry(f"point cloud must be non-empty (N, 3), got {pts.shape}")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def subset(self, mask) -> "PointCloud":
        return PointCloud(self.points[mask], self.source_part)


@dataclass(frozen=True)
class MergePolicy:
    area_threshold_hard: float = 0.2
    face_threshold: int = 100
    area_threshold_soft: float = 0.06

    def __post_init__(self):
        if min(self.area_threshold_hard, self.face_threshold, self.area_threshold_soft) < 0:
            raise ValueError("merge thresholds must be >= 0")


def is_mergeable(area: float, n_faces: int, policy: MergePolicy) -> bool:
    """Tiny-part predicate: area <= hard, or (faces <= cap and area <= soft)."""
    return area <= policy.area_threshold_hard or (
        n_faces <= policy.face_threshold and area <= policy.area_threshold_soft
    )


def normalize_object(asset: ObjectAsset) -> ObjectAsset:
    """Uniformly rescale + translate so the union bbox is centered with
    max half-extent 1. Constraint pivots and prismatic translation ranges
    follow the same map; directions and rotation ranges are unaffected.
    """
    if not asset.parts or all(p.mesh.n_vertices == 0 for p in asset.parts):
        raise EmptyGeometry("asset has no vertices")
    verts = asset.all_vertices()
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    center = (lo + hi) / 2.0
    half = float((hi - lo).max()) / 2.0
    if half == 0.0:
        raise EmptyGeometry("asset geometry is a single point")
    k = 1.0 / half
    linear = np.eye(3) * k
    translation = -center * k

    parts = [replace(p, mesh=p.mesh.transformed(linear, translation)) for p in asset.parts]
    constraints = []
    for c in asset.constraints:
        pivot = c.pivot
        if pivot is not None:
            pivot = tuple(float(v) for v in (np.asarray(pivot) * k + translation))
        rng = c.range
        if rng is not None and c.kind == "B":
            rng = (rng[0] * k, rng[1] * k)
        constraints.append(replace(c, pivot=pivot, range=rng))
    return replace(asset, parts=tuple(parts), constraints=tuple(constraints))


def surface_sample(mesh: TriMesh, n: int, seed: int, source_part: int = -1) -> PointCloud:
    """Exactly n area-weighted uniform surface points, deterministic per seed."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    areas = mesh.face_areas()
    total = areas.sum()
    if mesh.n_faces == 0 or total <= 0.0:
        raise EmptyGeometry("mesh has no positive-area faces to sample")
    rng = np.random.default_rng(seed)
    face_idx = rng.choice(mesh.n_faces, size=n, p=areas / total)
    tri = mesh.triangles()[face_idx]  # (n, 3, 3)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    pts = tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) + v[:, None] * (tri[:, 2] - tri[:, 0])
    return PointCloud(pts, source_part)


def nearest_distances(query: PointCloud, target: PointCloud) -> np.ndarray:
    """For each query point, the Euclidean distance to its nearest target point."""
    d, _ = cKDTree(target.points).query(query.points, k=1)
    return np.asarray(d, dtype=np.float64)


def _part_area(part: Part) -> float:
    return float(part.mesh.area())


def _adjacency_clouds(parts) -> dict:
    return {
        p.id: surface_sample(p.mesh, ADJACENCY_SAMPLES, ADJACENCY_SEED + p.id, p.id)
        for p in parts
    }


def _min_mutual_distance(a: PointCloud, b: PointCloud) -> float:
    return float(nearest_distances(a, b).min())


def _merge_one_pass(asset: ObjectAsset, policy: MergePolicy, isolated: set) -> ObjectAsset | None:
    """Absorb the lowest-id tiny part into its best-contact neighbor.

    Returns the new asset, or None when nothing (further) merges. Parts whose
    ids land in ``isolated`` are tiny but touch nothing; they stay.
    """
    parts = asset.parts
    tiny = [p for p in parts
            if is_mergeable(_part_area(p), p.mesh.n_faces, policy) and p.id not in isolated]
    if not tiny or len(parts) < 2:
        for p in tiny:
            isolated.add(p.id)
        return None
    clouds = _adjacency_clouds(parts)
    for victim in sorted(tiny, key=lambda p: p.id):
        # Contact amount = how much of the victim's cloud lies against the
        # neighbor; the largest contact wins, ties to the lowest part id.
        best_id, best_contact = None, 0
        for other in parts:
            if other.id == victim.id:
                continue
            d = nearest_distances(clouds[victim.id], clouds[other.id])
            contact = int((d < ADJACENCY_DIST).sum())
            if contact > 0 and (best_contact < contact or
                                (best_contact == contact and other.id < best_id)):
                best_id, best_contact = other.id, contact
        if best_id is None:
            isolated.add(victim.id)
            log.warning("part %d is tiny but touches no other part; left unmerged", victim.id)
            continue

        absorber = asset.part_by_id(best_id)
        merged = replace(absorber, mesh=merge_meshes([absorber.mesh, victim.mesh]))
        survivors = [merged if p.id == best_id else p for p in parts if p.id != victim.id]
        old_to_new = {p.id: i for i, p in enumerate(survivors, start=1)}
        old_to_new[victim.id] = old_to_new[best_id]
        renumbered = [replace(p, id=i) for i, p in enumerate(survivors, start=1)]
        constraints = []
        for c in asset.constraints:
            parent = None if c.parent_part is None else old_to_new[c.parent_part]
            child = None if c.child_part is None else old_to_new[c.child_part]
            if parent is not None and parent == child:
                continue  # joint collapsed into a single merged part
            constraints.append(replace(c, parent_part=parent, child_part=child))
        isolated.clear()  # ids shifted; isolation must be re-established
        return asset.with_parts(renumbered, constraints)
    return None


def merge_tiny_parts(asset: ObjectAsset, policy: MergePolicy | None = None) -> ObjectAsset:
    """Repeatedly absorb tiny parts into their best-contact neighbors.

    A part is tiny per ``is_mergeable``; its faces are appended to the
    adjacent part with the largest shared-boundary contact (ties: lowest id),
    whose annotations win. Constraint references are remapped; a constraint
    whose endpoints collapse into one part is dropped. Tiny parts that touch
    nothing are kept and logged. The result is revalidated.
    """
    if policy is None:
        policy = MergePolicy()
    isolated: set = set()
    current = asset
    while True:
        nxt = _merge_one_pass(current, policy, isolated)
        if nxt is None:
            break
        current = nxt
    violations = validate_asset(current)
    if violations:
        raise ValidationError(violations)
    return current
