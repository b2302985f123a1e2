"""Procedural composition: graft donor components (drawers, doors, ...) onto
base assets with scale adaptation and annotation propagation.

A component is a set of donor parts that move together, rooted at the child
of one "root" joint whose parent lies outside the set (the donor's shell).
Grafting maps the donor's contact footprint onto a geometrically analogous
planar region of the base, re-targets the root joint's parent to the base
part owning that region, and re-normalizes.

Frames are right-handed [inward normal, first in-plane axis, normal x axis],
with the normal oriented toward the interior of the part that owns the
surface, so donor-to-base rotation preserves "slides into" semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .asset import KinematicConstraint, ObjectAsset, validate_asset
from .config import EstimationConfig
from .errors import NoCompatibleRegion, NoContact, ScaleOutOfBounds, ValidationFailure
from .geometry import normalize_object, surface_sample
from .kinematics import canonical_sign, contact_region, fit_plane

MIN_PATCH_AREA = 0.05
NORMAL_MATCH_DEG = 15.0
SCALE_CLAMP = (0.3, 3.0)
PROTRUSION_TOL = 0.05
_FOOTPRINT_SAMPLES = 4000


@dataclass(frozen=True)
class AttachmentRegion:
    base_part_id: int
    centroid: np.ndarray   # 3-vector
    frame: np.ndarray      # rows: [normal, u, w], orthonormal right-handed
    extent: np.ndarray     # spread of the region along each frame row

    def __post_init__(self):
        f = np.asarray(self.frame, dtype=np.float64)
        if not np.allclose(f @ f.T, np.eye(3), atol=1e-9):
            raise ValueError("frame must be orthonormal")
        if (np.asarray(self.extent) < 0).any():
            raise ValueError("extent must be >= 0")


@dataclass(frozen=True)
class Transform:
    scale: np.ndarray        # per-axis factors in the footprint frame
    rotation: np.ndarray     # 3x3 proper rotation
    translation: np.ndarray  # applied after the linear part

    def linear(self, footprint_frame: np.ndarray, region_frame: np.ndarray) -> np.ndarray:
        return region_frame.T @ np.diag(self.scale) @ footprint_frame


@dataclass(frozen=True)
class ComponentSpec:
    asset: ObjectAsset
    asset_id: str
    part_ids: tuple          # donor parts that graft (root + ride-alongs)

    def root_constraint(self) -> KinematicConstraint:
        roots = [c for c in self.asset.constraints
                 if c.child_part in self.part_ids and c.parent_part not in self.part_ids]
        if len(roots) != 1:
            raise NoCompatibleRegion(
                f"component must have exactly one root joint, found {len(roots)}")
        return roots[0]

    @property
    def root_part(self) -> int:
        return self.root_constraint().child_part


@dataclass(frozen=True)
class GenPlan:
    base_asset_id: str
    component_asset_id: str
    component_root_part: int
    component_part_ids: tuple
    region: AttachmentRegion
    transform: Transform

    def to_dict(self) -> dict:
        return {
            "base_asset_id": self.base_asset_id,
            "component_asset_id": self.component_asset_id,
            "component_root_part": self.component_root_part,
            "component_part_ids": list(self.component_part_ids),
            "base_part_id": self.region.base_part_id,
            "region_centroid": [float(x) for x in self.region.centroid],
            "scale": [float(x) for x in self.transform.scale],
        }


def _oriented_frame(normal: np.ndarray, inward: np.ndarray, points: np.ndarray,
                    centroid: np.ndarray) -> tuple:
    """Right-handed [n, u, n x u] with n flipped toward ``inward`` and u the
    dominant in-plane spread direction; extents are per-axis point spreads."""
    n = normal / np.linalg.norm(normal)
    if float(n @ inward) < 0:
        n = -n
    rel = points - centroid
    in_plane = rel - np.outer(rel @ n, n)
    cov = in_plane.T @ in_plane / max(len(points), 1)
    evals, evecs = np.linalg.eigh(cov)
    u = evecs[:, 2] if evals[2] > 1e-18 else _any_perp(n)
    u = u - (u @ n) * n
    u = canonical_sign(u / np.linalg.norm(u))
    w = np.cross(n, u)
    frame = np.stack([n, u, w])
    extent = np.ptp(rel @ frame.T, axis=0) if len(points) else np.zeros(3)
    return frame, np.asarray(extent, dtype=np.float64)


def _any_perp(n: np.ndarray) -> np.ndarray:
    e = np.zeros(3)
    e[int(np.argmin(np.abs(n)))] = 1.0
    v = e - (e @ n) * n
    return v / np.linalg.norm(v)


def _patch_frame(normal: np.ndarray, interior: np.ndarray, tris: np.ndarray) -> tuple:
    """Area-exact (centroid, frame, extent) of a triangulated planar patch.

    Discrete corner covariance is biased by shared-vertex duplication (an 18
    degree axis tilt on a 2-triangle rectangle), so the second moment is
    integrated uniformly over each triangle instead.
    """
    n = normal / np.linalg.norm(normal)
    areas = 0.5 * np.linalg.norm(
        np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1)
    total = float(areas.sum())
    centroid = (tris.mean(axis=1) * areas[:, None]).sum(axis=0) / total
    inward = interior - centroid
    if abs(float(n @ inward)) < 1e-12:
        inward = -n  # interior sits on the patch plane; pick either side
    if float(n @ inward) < 0:
        n = -n
    rel = tris - centroid
    # uniform second moment of a triangle: (sum vi vi^T + (sum vi)(sum vi)^T)/12
    corner_sum = rel.sum(axis=1)
    cov = (np.einsum("t,tia,tib->ab", areas, rel, rel)
           + np.einsum("t,ta,tb->ab", areas, corner_sum, corner_sum)) / (12.0 * total)
    proj = np.eye(3) - np.outer(n, n)
    cov = proj @ cov @ proj
    evals, evecs = np.linalg.eigh(cov)
    u = evecs[:, 2] if evals[2] > 1e-18 else _any_perp(n)
    u = u - (u @ n) * n
    u = canonical_sign(u / np.linalg.norm(u))
    w = np.cross(n, u)
    frame = np.stack([n, u, w])
    extent = np.ptp(rel.reshape(-1, 3) @ frame.T, axis=0)
    return centroid, frame, np.asarray(extent, dtype=np.float64)


def component_footprint(component: ComponentSpec,
                        config: EstimationConfig | None = None) -> AttachmentRegion:
    """The donor-side contact patch of the component against its shell."""
    if config is None:
        config = EstimationConfig()
    donor = component.asset
    root = component.root_constraint()
    child = donor.part_by_id(root.child_part)
    parent = donor.part_by_id(root.parent_part)
    region = contact_region(
        surface_sample(child.mesh, _FOOTPRINT_SAMPLES, config.seed + root.child_part,
                       root.child_part),
        surface_sample(parent.mesh, _FOOTPRINT_SAMPLES, config.seed + root.parent_part,
                       root.parent_part),
        config.tau)
    pts = region.all_points()
    centroid = pts.mean(axis=0)
    plane = fit_plane(pts)
    inward = parent.mesh.vertices.mean(axis=0) - centroid
    frame, extent = _oriented_frame(plane.normal, inward, pts, centroid)
    return AttachmentRegion(base_part_id=root.parent_part, centroid=centroid,
                            frame=frame, extent=extent)


def _planar_patches(part) -> list:
    """Coplanar face groups of one part: (area, normal, offset, vertices).

    Faces bucket by rounded normal and plane offset; intended for the flat
    procedural geometry this module composes, not free-form surfaces.
    """
    mesh = part.mesh
    tri = mesh.triangles()
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norms = np.linalg.norm(n, axis=1)
    ok = norms > 1e-14
    n = n[ok] / norms[ok][:, None]
    n = np.array([canonical_sign(v) for v in n]) if len(n) else n.reshape(0, 3)
    areas = 0.5 * norms[ok]
    offs = (n * tri[ok][:, 0]).sum(axis=1)
    buckets: dict = {}
    for i in range(len(areas)):
        key = (tuple(np.round(n[i], 3)), round(float(offs[i]), 2))
        buckets.setdefault(key, []).append(i)
    patches = []
    idx_ok = np.nonzero(ok)[0]
    for key in sorted(buckets):
        rows = buckets[key]
        patches.append((float(areas[rows].sum()),
                        np.asarray(key[0], dtype=np.float64), key[1],
                        tri[idx_ok[rows]]))
    return patches


def find_attachment_region(base: ObjectAsset, donor: ObjectAsset,
                           donor_component, config: EstimationConfig | None = None
                           ) -> AttachmentRegion:
    """Largest planar patch on the base matching the donor contact normal
    within 15 degrees and at least MIN_PATCH_AREA in area."""
    component = donor_component if isinstance(donor_component, ComponentSpec) else \
        ComponentSpec(asset=donor, asset_id="donor", part_ids=tuple(donor_component))
    footprint = component_footprint(component, config)
    target = footprint.frame[0]
    cos_tol = np.cos(np.radians(NORMAL_MATCH_DEG))
    best = None
    for part in base.parts:
        for area, normal, _off, tris in _planar_patches(part):
            if area < MIN_PATCH_AREA:
                continue
            if abs(float(normal @ target)) < cos_tol:
                continue
            if best is None or area > best[0]:
                best = (area, part, normal, tris)
    if best is None:
        raise NoCompatibleRegion(
            f"no planar patch >= {MIN_PATCH_AREA} matching the contact normal")
    area, part, normal, tris = best
    centroid, frame, extent = _patch_frame(
        normal, part.mesh.vertices.mean(axis=0), tris)
    return AttachmentRegion(base_part_id=part.id, centroid=centroid,
                            frame=frame, extent=extent)


def fit_component(region: AttachmentRegion, footprint: AttachmentRegion,
                  component_bbox=None, base_bbox=None) -> Transform:
    """Align footprint frame to region frame, scale per-axis by extent ratio.

    Raises ScaleOutOfBounds when any axis ratio leaves [0.3, 3.0]. When both
    bounding boxes are provided, checks the transformed component does not
    protrude beyond the base by more than PROTRUSION_TOL on non-opening axes.
    """
    scale = np.ones(3)
    # Axis 0 is the contact normal in both frames; the footprint's thickness
    # there is sampling reach (~tau), not geometry, so it never scales.
    for i in (1, 2):
        fe, re_ = float(footprint.extent[i]), float(region.extent[i])
        if fe < 1e-6 and re_ < 1e-6:
            continue  # degenerate in-plane pair
        if fe < 1e-6:
            raise ScaleOutOfBounds(f"footprint flat on axis {i} but region is not")
        ratio = re_ / fe
        if not (SCALE_CLAMP[0] <= ratio <= SCALE_CLAMP[1]):
            raise ScaleOutOfBounds(
                f"axis {i} scale {ratio:.3f} outside {SCALE_CLAMP}")
        scale[i] = ratio
    rotation = region.frame.T @ footprint.frame
    linear = region.frame.T @ np.diag(scale) @ footprint.frame
    translation = region.centroid - linear @ footprint.centroid
    tf = Transform(scale=scale, rotation=rotation, translation=translation)
    if component_bbox is not None and base_bbox is not None:
        lo, hi = (np.asarray(b, dtype=np.float64) for b in component_bbox)
        corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                            for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
        moved = corners @ linear.T + translation
        b_lo, b_hi = (np.asarray(b, dtype=np.float64) for b in base_bbox)
        over = np.maximum(moved.max(axis=0) - b_hi, 0) + np.maximum(b_lo - moved.min(axis=0), 0)
        in_plane = np.abs(region.frame[1:] @ np.eye(3))  # non-opening axes
        if float((over * in_plane.max(axis=0)).max()) > PROTRUSION_TOL:
            raise ValidationFailure(
                f"component protrudes {over} beyond base on non-opening axes")
    return tf


def compose(base: ObjectAsset, component: ComponentSpec, plan: GenPlan) -> ObjectAsset:
    """Graft the component onto the base per the plan; re-normalized result."""
    footprint = component_footprint(component)
    linear = plan.transform.linear(footprint.frame, plan.region.frame)
    translation = plan.transform.translation
    donor = component.asset

    id_map = {}
    next_id = len(base.parts) + 1
    new_parts = list(base.parts)
    for pid in plan.component_part_ids:
        part = donor.part_by_id(pid)
        id_map[pid] = next_id
        new_parts.append(replace(
            part, id=next_id, mesh=part.mesh.transformed(linear, translation)))
        next_id += 1

    new_constraints = list(base.constraints)
    root = component.root_constraint()
    for c in donor.constraints:
        if c.child_part not in plan.component_part_ids:
            continue
        parent = plan.region.base_part_id if c is root else id_map.get(c.parent_part)
        if parent is None:
            continue
        direction = c.direction
        rng = c.range
        if direction is not None:
            d = linear @ np.asarray(direction, dtype=np.float64)
            length = float(np.linalg.norm(d))
            direction = tuple(float(x) for x in d / length)
            if rng is not None and c.kind == "B":
                rng = (rng[0] * length, rng[1] * length)
        pivot = c.pivot
        if pivot is not None:
            pivot = tuple(float(x) for x in
                          linear @ np.asarray(pivot, dtype=np.float64) + translation)
        new_constraints.append(replace(
            c, parent_part=parent, child_part=id_map[c.child_part],
            direction=direction, pivot=pivot, range=rng))

    composed = replace(
        base,
        parts=tuple(new_parts),
        constraints=tuple(new_constraints),
        provenance=f"procgen:{plan.base_asset_id}+{plan.component_asset_id}"
                   f"@part{plan.region.base_part_id}",
    )
    composed = normalize_object(composed)
    violations = validate_asset(composed)
    if violations:
        raise ValidationFailure("; ".join(str(v) for v in violations))
    return composed


def plan_pair(base: ObjectAsset, base_id: str, component: ComponentSpec,
              config: EstimationConfig | None = None) -> GenPlan:
    """Region + transform for one (base, component) pair, or raise."""
    region = find_attachment_region(base, component.asset, component, config)
    footprint = component_footprint(component, config)
    comp_verts = np.concatenate([
        component.asset.part_by_id(pid).mesh.vertices
        for pid in component.part_ids])
    base_verts = base.all_vertices()
    tf = fit_component(
        region, footprint,
        component_bbox=(comp_verts.min(axis=0), comp_verts.max(axis=0)),
        base_bbox=(base_verts.min(axis=0), base_verts.max(axis=0)))
    return GenPlan(
        base_asset_id=base_id,
        component_asset_id=component.asset_id,
        component_root_part=component.root_part,
        component_part_ids=tuple(component.part_ids),
        region=region,
        transform=tf,
    )


def enumerate_plans(bases, components, mode: str = "cross",
                    config: EstimationConfig | None = None) -> list:
    """Cartesian product of (base, component) filtered by attachability.

    ``bases`` is a list of (asset_id, asset); mode "intra" keeps same-category
    pairs, "cross" different-category pairs. Deterministic input order.
    """
    if mode not in ("intra", "cross"):
        raise ValueError(f"mode must be intra or cross, got {mode!r}")
    plans = []
    for base_id, base in bases:
        for comp in components:
            same = base.category == comp.asset.category
            if (mode == "intra") != same:
                continue
            try:
                plans.append(plan_pair(base, base_id, comp, config))
            except (NoCompatibleRegion, ScaleOutOfBounds, NoContact, ValidationFailure):
                continue
    return plans
