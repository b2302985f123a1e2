"""Authored synthetic assets with known joint parameters.

Each fixture returns (asset, truth) where the asset omits the joint under
test and ``truth`` records what an estimator should recover. Geometry is
authored in convenient units, then normalized; truths are mapped through
the same transform so tolerances apply in normalized coordinates.

Revolute truths are compared against the axis line (pivot position along
the axis is arbitrary); ball-joint truths against the pivot point.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .asset import (DescriptionSet, KinematicConstraint, MaterialSpec,
                    ObjectAsset, Part, require_valid)
from .meshio import TriMesh, merge_meshes

PI = float(np.pi)


@dataclass(frozen=True)
class GroundTruth:
    kind: str
    child: int
    parent: int
    direction: tuple | None = None
    pivot: tuple | None = None
    range: tuple | None = None

    def axis_angle_deg(self, direction) -> float:
        """Unsigned angle between an estimated axis and the truth axis."""
        d = np.asarray(direction, dtype=np.float64)
        g = np.asarray(self.direction, dtype=np.float64)
        c = abs(float(d @ g)) / (np.linalg.norm(d) * np.linalg.norm(g))
        return float(np.degrees(np.arccos(min(c, 1.0))))

    def pivot_error(self, pivot) -> float:
        """Distance to the truth pivot; to the axis line when one exists."""
        p = np.asarray(pivot, dtype=np.float64)
        g = np.asarray(self.pivot, dtype=np.float64)
        if self.direction is None:
            return float(np.linalg.norm(p - g))
        d = np.asarray(self.direction, dtype=np.float64)
        d = d / np.linalg.norm(d)
        rel = p - g
        return float(np.linalg.norm(rel - (rel @ d) * d))

    def constraint(self, finalized: bool = True) -> KinematicConstraint:
        rng = self.range
        if rng is None and self.kind in ("C", "CB"):
            rng = (0.0, PI / 2)
        return KinematicConstraint(
            kind=self.kind, parent_part=self.parent, child_part=self.child,
            direction=self.direction, pivot=self.pivot, range=rng,
            finalized=finalized)


# ---------------------------------------------------------------- meshes

def _quads(vertices, quads) -> TriMesh:
    faces = []
    for a, b, c, d in quads:
        faces.extend([[a, b, c], [a, c, d]])
    return TriMesh(np.asarray(vertices, dtype=np.float64),
                   np.asarray(faces, dtype=np.int32))


def hexahedron(bottom, top) -> TriMesh:
    """Eight corners from two (x0, z0, x1, z1, y) rectangles, CCW outside."""
    bx0, bz0, bx1, bz1, by = bottom
    tx0, tz0, tx1, tz1, ty = top
    v = [
        (bx0, by, bz0), (bx1, by, bz0), (bx1, by, bz1), (bx0, by, bz1),
        (tx0, ty, tz0), (tx1, ty, tz0), (tx1, ty, tz1), (tx0, ty, tz1),
    ]
    quads = [
        (0, 1, 2, 3),  # bottom (-y)
        (7, 6, 5, 4),  # top (+y)
        (4, 5, 1, 0),  # -z side
        (6, 7, 3, 2),  # +z side
        (5, 6, 2, 1),  # +x side
        (7, 4, 0, 3),  # -x side
    ]
    return _quads(v, quads)


def box(lo, hi) -> TriMesh:
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    return hexahedron((x0, z0, x1, z1, y0), (x0, z0, x1, z1, y1))


def cylinder(y0: float, y1: float, radius: float, n: int = 24,
             center=(0.0, 0.0), caps: bool = True) -> TriMesh:
    """Closed cylinder along +y; ``center`` is its (x, z) position."""
    cx, cz = center
    ang = np.linspace(0.0, 2 * PI, n, endpoint=False)
    ring = np.stack([cx + radius * np.cos(ang), np.zeros(n),
                     cz + radius * np.sin(ang)], axis=1)
    verts = [ring + [0, y0, 0], ring + [0, y1, 0]]
    faces = []
    for i in range(n):
        j = (i + 1) % n
        faces.extend([[i, j, n + j], [i, n + j, n + i]])
    if caps:
        verts.append(np.array([[cx, y0, cz], [cx, y1, cz]]))
        bot, top = 2 * n, 2 * n + 1
        for i in range(n):
            j = (i + 1) % n
            faces.extend([[bot, j, i], [top, n + i, n + j]])
    return TriMesh(np.concatenate(verts), np.asarray(faces, dtype=np.int32))


def sphere_band(center, radius: float, theta0: float = 0.0,
                theta1: float = PI, n_lat: int = 12, n_lon: int = 18) -> TriMesh:
    """Sphere surface between polar angles (from +y); poles become fans."""
    cx, cy, cz = center
    thetas = np.linspace(theta0, theta1, n_lat + 1)
    verts, rows = [], []
    for t in thetas:
        if t < 1e-12 or t > PI - 1e-12:
            rows.append([len(verts)])
            verts.append((cx, cy + radius * np.cos(t), cz))
            continue
        row = []
        for k in range(n_lon):
            a = 2 * PI * k / n_lon
            row.append(len(verts))
            verts.append((cx + radius * np.sin(t) * np.cos(a),
                          cy + radius * np.cos(t),
                          cz + radius * np.sin(t) * np.sin(a)))
        rows.append(row)
    faces = []
    for r0, r1 in zip(rows[:-1], rows[1:]):
        if len(r0) == 1:
            faces.extend([[r0[0], r1[(k + 1) % n_lon], r1[k]] for k in range(n_lon)])
        elif len(r1) == 1:
            faces.extend([[r0[k], r0[(k + 1) % n_lon], r1[0]] for k in range(n_lon)])
        else:
            for k in range(n_lon):
                j = (k + 1) % n_lon
                faces.extend([[r0[k], r0[j], r1[j]], [r0[k], r1[j], r1[k]]])
    return TriMesh(np.asarray(verts, dtype=np.float64),
                   np.asarray(faces, dtype=np.int32))


def sphere(center, radius: float, n_lat: int = 12, n_lon: int = 18) -> TriMesh:
    return sphere_band(center, radius, 0.0, PI, n_lat, n_lon)


# ------------------------------------------------------------- assembly

def _mat(name: str, density: float) -> MaterialSpec:
    from .annotate import material_from_name
    return material_from_name(name, density)


def _part(pid: int, name: str, mesh: TriMesh, material: str, density: float,
          rank: int, basic: str = "", functional: str = "") -> Part:
    return Part(id=pid, name=name, mesh=mesh, material=_mat(material, density),
                affordance_rank=rank,
                descriptions=DescriptionSet(basic=basic or name,
                                            functional=functional or name))


def _finish(asset: ObjectAsset, truths: list) -> tuple:
    """Normalize geometry and map truths through the same transform."""
    verts = asset.all_vertices()
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    center = (lo + hi) / 2.0
    k = 1.0 / (float((hi - lo).max()) / 2.0)
    t = -center * k
    parts = tuple(replace(p, mesh=p.mesh.transformed(np.eye(3) * k, t))
                  for p in asset.parts)
    cons = []
    for c in asset.constraints:
        pivot = c.pivot
        if pivot is not None:
            pivot = tuple(float(x) for x in np.asarray(pivot) * k + t)
        rng = c.range
        if rng is not None and c.kind == "B":
            rng = (rng[0] * k, rng[1] * k)
        cons.append(replace(c, pivot=pivot, range=rng))
    asset = replace(asset, parts=parts, constraints=tuple(cons))
    require_valid(asset)
    mapped = []
    for g in truths:
        pivot = g.pivot
        if pivot is not None:
            pivot = tuple(float(x) for x in np.asarray(pivot) * k + t)
        rng = g.range
        if rng is not None and g.kind == "B":
            rng = (rng[0] * k, rng[1] * k)
        mapped.append(replace(g, pivot=pivot, range=rng))
    if len(mapped) == 1:
        return asset, mapped[0]
    return asset, mapped


def laptop_hinge() -> tuple:
    """Two slabs meeting along a back-edge strip; revolute about +x."""
    base = box((-1.0, -0.56, -0.6), (1.0, -0.44, 0.6))
    screen = box((-1.0, -0.44, 0.48), (1.0, 0.56, 0.6))
    asset = ObjectAsset(
        object_name="laptop", category="laptop", absolute_scale=(34.0, 24.0, 22.0),
        parts=(
            _part(1, "keyboard base", base, "aluminum", 2.7, 1,
                  "flat slab with keys", "rests on the desk and holds the keyboard"),
            _part(2, "screen", screen, "aluminum", 2.7, 2,
                  "thin display slab", "tilts open about the back edge"),
        ))
    truth = GroundTruth(kind="C", child=2, parent=1,
                        direction=(1.0, 0.0, 0.0), pivot=(0.0, -0.44, 0.54))
    return _finish(asset, [truth])


def _drawer_shell(x_back: float, x_front: float, walls) -> TriMesh:
    """Five-slab open box: bottom/top/left/right/back, opening at +x."""
    return merge_meshes([box(lo, hi) for lo, hi in walls(x_back, x_front)])


def drawer_slide() -> tuple:
    """Half-engaged drawer in an open shell; prismatic along +x."""
    def walls(xb, xf):
        return [
            ((xb, -0.5, -0.5), (xf, -0.4, 0.5)),
            ((xb, 0.4, -0.5), (xf, 0.5, 0.5)),
            ((xb, -0.4, -0.5), (xf, 0.4, -0.4)),
            ((xb, -0.4, 0.4), (xf, 0.4, 0.5)),
            ((xb, -0.4, -0.4), (xb + 0.1, 0.4, 0.4)),
        ]
    shell = _drawer_shell(-1.0, 0.3, walls)
    drawer = box((-0.6, -0.4, -0.4), (0.9, 0.4, 0.4))
    asset = ObjectAsset(
        object_name="drawer unit", category="storage", absolute_scale=(45.0, 40.0, 35.0),
        parts=(
            _part(1, "shell", shell, "wood", 0.7, 3,
                  "open casing", "holds the sliding drawer"),
            _part(2, "drawer", drawer, "wood", 0.7, 1,
                  "sliding tray", "pulls out toward the front"),
        ))
    truth = GroundTruth(kind="B", child=2, parent=1,
                        direction=(1.0, 0.0, 0.0), range=(-0.4, 0.0))
    return _finish(asset, [truth])


def door_hinge() -> tuple:
    """Door edge facing a jamb post across a thin gap; revolute about +z."""
    post = box((-0.05, 0.87, -1.0), (0.05, 1.0, 1.0))
    door = box((-0.05, -0.80, -1.0), (0.05, 0.86, 1.0))
    asset = ObjectAsset(
        object_name="door", category="door", absolute_scale=(90.0, 5.0, 200.0),
        parts=(
            _part(1, "frame post", post, "wood", 0.7, 4,
                  "vertical jamb", "anchors the hinges"),
            _part(2, "door panel", door, "wood", 0.7, 1,
                  "flat swinging panel", "swings about its hinged edge"),
        ))
    truth = GroundTruth(kind="C", child=2, parent=1,
                        direction=(0.0, 0.0, 1.0), pivot=(0.0, 0.865, 0.0))
    return _finish(asset, [truth])


def bottle_cap() -> tuple:
    """Cap sleeve around a bottle neck; screw joint along the +y axis."""
    body = merge_meshes([
        cylinder(-0.9, 0.1, 0.3),
        cylinder(0.1, 0.45, 0.18),
    ])
    cap = cylinder(0.2, 0.5, 0.19)
    asset = ObjectAsset(
        object_name="bottle", category="bottle", absolute_scale=(7.0, 7.0, 24.0),
        parts=(
            _part(1, "body", body, "glass", 2.5, 2,
                  "cylindrical vessel with a neck", "holds the liquid"),
            _part(2, "cap", cap, "plastic", 0.9, 1,
                  "short sleeve", "unscrews upward off the neck"),
        ))
    truth = GroundTruth(kind="CB", child=2, parent=1,
                        direction=(0.0, 1.0, 0.0), pivot=(0.0, 0.35, 0.0))
    return _finish(asset, [truth])


def shower_hose() -> tuple:
    """Hose threaded through a wall grommet; bends about the grommet point.

    The contact is a narrow ring around the pivot, so every cluster center
    the estimator can produce stays within tolerance of the truth.
    """
    hose = cylinder(-1.0, 1.0, 0.04)
    grommet = merge_meshes([
        cylinder(-0.04, 0.04, 0.044, caps=False),
        cylinder(-0.03, 0.03, 0.5, caps=False),
    ])
    asset = ObjectAsset(
        object_name="shower hose", category="shower", absolute_scale=(30.0, 30.0, 160.0),
        parts=(
            _part(1, "wall grommet", grommet, "metal", 7.8, 2,
                  "ring in a flange plate", "anchors the hose at one point"),
            _part(2, "hose", hose, "rubber", 1.1, 1,
                  "long flexible tube", "bends about the grommet"),
        ))
    truth = GroundTruth(kind="D", child=2, parent=1, pivot=(0.0, 0.0, 0.0))
    return _finish(asset, [truth])


def cabinet_composite() -> tuple:
    """Shell with two drawers resting on slab runners; two prismatic joints.

    Side and top gaps exceed tau so each drawer's contact is a single
    planar patch on its runner.
    """
    def walls(xb, xf):
        return [
            ((xb, -0.5, -0.5), (xf, -0.4, 0.5)),
            ((xb, -0.05, -0.5), (xf, 0.05, 0.5)),
            ((xb, 0.4, -0.5), (xf, 0.5, 0.5)),
            ((xb, -0.4, -0.5), (xf, 0.4, -0.44)),
            ((xb, -0.4, 0.44), (xf, 0.4, 0.5)),
            ((xb, -0.4, -0.44), (xb + 0.1, 0.4, 0.44)),
        ]
    shell = _drawer_shell(-1.0, 0.3, walls)
    upper = box((-0.6, 0.055, -0.4), (0.9, 0.35, 0.4))
    lower = box((-0.85, -0.395, -0.4), (0.45, -0.1, 0.4))
    asset = ObjectAsset(
        object_name="cabinet", category="storage", absolute_scale=(50.0, 45.0, 80.0),
        parts=(
            _part(1, "shell", shell, "wood", 0.7, 3,
                  "two-bay casing", "houses both drawers"),
            _part(2, "upper drawer", upper, "wood", 0.7, 1,
                  "upper tray", "slides out forward"),
            _part(3, "lower drawer", lower, "wood", 0.7, 2,
                  "lower tray", "slides out forward"),
        ))
    truths = [
        GroundTruth(kind="B", child=2, parent=1, direction=(1.0, 0.0, 0.0),
                    range=(-0.4, 0.0)),
        GroundTruth(kind="B", child=3, parent=1, direction=(1.0, 0.0, 0.0),
                    range=(-0.15, 0.0)),
    ]
    return _finish(asset, truths)


def hidden_part() -> tuple:
    """A core sealed inside a closed casing; invisible from every view."""
    outer = box((-0.8, -0.8, -0.8), (0.8, 0.8, 0.8))
    inner = box((-0.2, -0.2, -0.2), (0.2, 0.2, 0.2))
    asset = ObjectAsset(
        object_name="sealed unit", category="appliance",
        absolute_scale=(20.0, 20.0, 20.0),
        parts=(
            _part(1, "casing", outer, "plastic", 1.2, 1,
                  "closed cube", "protects the core"),
            _part(2, "core", inner, "metal", 7.8, 5,
                  "inner block", "hidden mechanism"),
        ))
    return _finish(asset, [GroundTruth(kind="E", child=-1, parent=-1)])[0], 2


def tiny_appendage() -> tuple:
    """Slab with a mergeable chip on top and a far, isolated speck."""
    slab = box((-1.0, -0.2, -0.8), (1.0, 0.2, 0.8))
    chip = box((0.5, 0.2, 0.3), (0.6, 0.26, 0.4))
    speck = box((-0.95, 0.9, -0.75), (-0.88, 0.96, -0.68))
    asset = ObjectAsset(
        object_name="board", category="board", absolute_scale=(40.0, 30.0, 8.0),
        parts=(
            _part(1, "slab", slab, "wood", 0.7, 1, "main board", "work surface"),
            _part(2, "chip", chip, "wood", 0.7, 6, "small chip", "decorative stud"),
            _part(3, "speck", speck, "wood", 0.7, 7, "floating speck", "debris"),
        ))
    return asset, {"absorbed": {2: 1}, "isolated": [3]}


# ---------------------------------------------------- composition corpus

def _beveled_slab(x_half: float, z_half: float, y0: float, y1: float) -> TriMesh:
    return hexahedron((-x_half + 0.05, -z_half + 0.05, x_half - 0.05,
                       z_half - 0.05, y0),
                      (-x_half, -z_half, x_half, z_half, y1))


def drawer_donor() -> tuple:
    """Drawer resting on a shelf slab, with a knob riding on the drawer.

    Returns (asset, component_part_ids). The slab's top face is its unique
    largest horizontal patch, so region recovery lands on the contact plane.
    """
    shelf = _beveled_slab(0.5, 0.4, -0.1, 0.0)
    drawer = box((-0.35, 0.01, -0.25), (0.35, 0.41, 0.25))
    knob = box((0.2, 0.41, -0.05), (0.3, 0.49, 0.05))
    asset = ObjectAsset(
        object_name="drawer unit", category="storage",
        absolute_scale=(30.0, 22.0, 18.0),
        parts=(
            _part(1, "shelf", shelf, "wood", 0.7, 3, "carrier slab",
                  "supports the drawer"),
            _part(2, "drawer", drawer, "wood", 0.7, 1, "sliding box",
                  "slides forward"),
            _part(3, "knob", knob, "metal", 7.8, 2, "grip knob",
                  "pull handle"),
        ),
        constraints=(KinematicConstraint(
            kind="B", parent_part=1, child_part=2, direction=(1.0, 0.0, 0.0),
            range=(-0.25, 0.0), finalized=True),))
    require_valid(asset)
    return asset, (2, 3)


def bin_donor() -> tuple:
    """Open bin sitting on a shelf slab; lifts straight out (+y)."""
    shelf = _beveled_slab(0.6, 0.45, -0.1, 0.0)
    bin_box = box((-0.4, 0.01, -0.31), (0.4, 0.5, 0.31))
    asset = ObjectAsset(
        object_name="bin unit", category="bin", absolute_scale=(28.0, 20.0, 16.0),
        parts=(
            _part(1, "shelf", shelf, "wood", 0.7, 3, "carrier slab",
                  "supports the bin"),
            _part(2, "bin", bin_box, "plastic", 0.9, 1, "storage box",
                  "lifts out vertically"),
        ),
        constraints=(KinematicConstraint(
            kind="B", parent_part=1, child_part=2, direction=(0.0, 1.0, 0.0),
            range=(0.0, 0.3), finalized=True),))
    require_valid(asset)
    return asset, (2,)


def base_cabinet() -> ObjectAsset:
    body = hexahedron((-0.65, -0.42, 0.65, 0.42, -0.5), (-0.7, -0.45, 0.7, 0.45, 0.5))
    asset = ObjectAsset(
        object_name="cabinet", category="storage", absolute_scale=(70.0, 45.0, 100.0),
        parts=(_part(1, "body", body, "wood", 0.7, 1, "storage body", "top surface"),))
    require_valid(asset)
    return asset


def base_desk() -> ObjectAsset:
    top = hexahedron((-0.85, -0.45, 0.85, 0.45, 0.3), (-0.9, -0.5, 0.9, 0.5, 0.4))
    legs = [box((sx * 0.8, -0.5, sz * 0.4), (sx * 0.8 + 0.08, 0.3, sz * 0.4 + 0.08))
            for sx in (-1, 1) for sz in (-1, 1)]
    asset = ObjectAsset(
        object_name="desk", category="desk", absolute_scale=(120.0, 60.0, 75.0),
        parts=(_part(1, "desk", merge_meshes([top] + legs), "wood", 0.7, 1,
                     "table with legs", "flat work surface"),))
    require_valid(asset)
    return asset


def base_stand() -> ObjectAsset:
    rail = hexahedron((-0.25, -0.04, 0.25, 0.04, 0.3), (-0.275, -0.05, 0.275, 0.05, 0.4))
    column = box((-0.06, -0.5, -0.04), (0.06, 0.3, 0.04))
    asset = ObjectAsset(
        object_name="stand", category="stand", absolute_scale=(35.0, 8.0, 60.0),
        parts=(_part(1, "stand", merge_meshes([rail, column]), "metal", 7.8, 1,
                     "narrow rail on a column", "display rail"),))
    require_valid(asset)
    return asset


def base_ball() -> ObjectAsset:
    asset = ObjectAsset(
        object_name="ball", category="decor", absolute_scale=(25.0, 25.0, 25.0),
        parts=(_part(1, "ball", sphere((0.0, 0.0, 0.0), 0.5, 16, 24),
                     "ceramic", 2.0, 1, "round ornament", "decoration"),))
    require_valid(asset)
    return asset


def estimation_fixtures() -> dict:
    """Name -> (asset, truth-or-truths) for every joint-recovery case."""
    return {
        "laptop_hinge": laptop_hinge(),
        "drawer_slide": drawer_slide(),
        "door_hinge": door_hinge(),
        "bottle_cap": bottle_cap(),
        "shower_hose": shower_hose(),
        "cabinet_composite": cabinet_composite(),
    }


def annotated_laptop() -> ObjectAsset:
    """Laptop fixture with its truth joint attached; fully described."""
    asset, truth = laptop_hinge()
    parts = tuple(replace(
        p, descriptions=replace(p.descriptions,
                                kinematic="rotates about the back edge",
                                grasped="held along the front lip"))
        for p in asset.parts)
    asset = replace(asset, parts=parts, constraints=(truth.constraint(),))
    require_valid(asset)
    return asset
