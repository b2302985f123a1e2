"""Part-level physics-grounded asset schema and its on-disk format.

An asset lives in one directory: ``asset.json`` (UTF-8, sorted keys) plus one
``part_<id>.obj`` per part. Kinematic joint kinds:

    A  free motion (no constraint parameters)
    B  prismatic (direction + translation range, no pivot)
    C  revolute (direction + pivot, rotation range in radians)
    D  point hinge (pivot only)
    E  rigid (no parameters)
    CB combined revolute+prismatic, parameterized like C

Numeric codes for feature packing: A=0, B=1, C=2, D=3, E=4, CB=5.
Rotation ranges are radians internally; CLI/UI surfaces convert to degrees.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import IoError, MissingFile, SchemaViolation, ValidationError
from .meshio import TriMesh, load_obj, save_obj

KIND_CODES = {"A": 0, "B": 1, "C": 2, "D": 3, "E": 4, "CB": 5}
CODE_KINDS = {v: k for k, v in KIND_CODES.items()}

UNCONSTRAINED_KINDS = ("A", "E")
DIRECTION_KINDS = ("B", "C", "CB")
PIVOT_KINDS = ("C", "D", "CB")

UNIT_TOL = 1e-9


@dataclass(frozen=True)
class MaterialSpec:
    """Physical material: Young's modulus in GPa, density in g/cm^3."""

    name: str
    youngs_modulus: float
    poisson_ratio: float
    density: float

    def to_dict(self):
        return {
            "name": self.name,
            "youngs_modulus_gpa": self.youngs_modulus,
            "poisson_ratio": self.poisson_ratio,
            "density_g_cm3": self.density,
        }

    @classmethod
    def from_dict(cls, d, path="material"):
        try:
            return cls(
                name=str(d["name"]),
                youngs_modulus=float(d["youngs_modulus_gpa"]),
                poisson_ratio=float(d["poisson_ratio"]),
                density=float(d["density_g_cm3"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(path, f"bad material record: {exc!r}") from None


@dataclass(frozen=True)
class DescriptionSet:
    """Four per-part texts: basic, functional, kinematic, grasped."""

    basic: str = ""
    functional: str = ""
    kinematic: str = ""
    grasped: str = ""

    def to_dict(self):
        return {
            "basic": self.basic,
            "functional": self.functional,
            "kinematic": self.kinematic,
            "grasped": self.grasped,
        }

    @classmethod
    def from_dict(cls, d, path="descriptions"):
        if not isinstance(d, dict):
            raise SchemaViolation(path, "descriptions must be an object")
        return cls(
            basic=str(d.get("basic", "")),
            functional=str(d.get("functional", "")),
            kinematic=str(d.get("kinematic", "")),
            grasped=str(d.get("grasped", "")),
        )


@dataclass(frozen=True)
class Part:
    id: int
    name: str
    mesh: TriMesh
    material: MaterialSpec
    affordance_rank: int
    descriptions: DescriptionSet = field(default_factory=DescriptionSet)


@dataclass(frozen=True)
class KinematicConstraint:
    """One joint record. Field presence depends on ``kind``; see module doc."""

    kind: str
    parent_part: int | None = None
    child_part: int | None = None
    direction: tuple[float, float, float] | None = None
    pivot: tuple[float, float, float] | None = None
    range: tuple[float, float] | None = None
    finalized: bool = False

    def direction_array(self):
        return None if self.direction is None else np.asarray(self.direction, dtype=np.float64)

    def pivot_array(self):
        return None if self.pivot is None else np.asarray(self.pivot, dtype=np.float64)

    def to_dict(self):
        return {
            "kind": self.kind,
            "parent_part": self.parent_part,
            "child_part": self.child_part,
            "direction": None if self.direction is None else list(self.direction),
            "pivot": None if self.pivot is None else list(self.pivot),
            "range": None if self.range is None else list(self.range),
            "finalized": self.finalized,
        }

    @classmethod
    def from_dict(cls, d, path="constraint"):
        def vec(key, n):
            v = d.get(key)
            if v is None:
                return None
            if not isinstance(v, (list, tuple)) or len(v) != n:
                raise SchemaViolation(f"{path}.{key}", f"expected {n}-vector or null")
            return tuple(float(x) for x in v)

        kind = d.get("kind")
        if kind not in KIND_CODES:
            raise SchemaViolation(f"{path}.kind", f"unknown kind {kind!r}")
        return cls(
            kind=kind,
            parent_part=None if d.get("parent_part") is None else int(d["parent_part"]),
            child_part=None if d.get("child_part") is None else int(d["child_part"]),
            direction=vec("direction", 3),
            pivot=vec("pivot", 3),
            range=vec("range", 2),
            finalized=bool(d.get("finalized", False)),
        )


@dataclass(frozen=True)
class ObjectAsset:
    object_name: str
    category: str
    absolute_scale: tuple[float, float, float]  # (L, W, H) in cm
    parts: tuple[Part, ...]
    constraints: tuple[KinematicConstraint, ...] = ()
    provenance: str = ""

    def part_by_id(self, part_id: int) -> Part:
        for p in self.parts:
            if p.id == part_id:
                return p
        raise KeyError(f"no part with id {part_id}")

    def has_part(self, part_id: int) -> bool:
        return any(p.id == part_id for p in self.parts)

    def all_vertices(self) -> np.ndarray:
        return np.concatenate([p.mesh.vertices for p in self.parts])

    def constraint_for_child(self, part_id: int) -> KinematicConstraint | None:
        for c in self.constraints:
            if c.child_part == part_id:
                return c
        return None

    def with_parts(self, parts, constraints=None) -> "ObjectAsset":
        return replace(
            self,
            parts=tuple(parts),
            constraints=self.constraints if constraints is None else tuple(constraints),
        )


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str

    def __str__(self):
        return f"[{self.code}] {self.path}: {self.message}"


def _check_constraint_fields(c: KinematicConstraint, path: str, out: list):
    if c.kind not in KIND_CODES:
        out.append(Violation("UnknownKind", f"{path}.kind", f"unknown kind {c.kind!r}"))
        return
    if c.kind in UNCONSTRAINED_KINDS:
        for name in ("parent_part", "child_part", "direction", "pivot", "range"):
            if getattr(c, name) is not None:
                out.append(Violation(
                    "FieldForbiddenForKind", f"{path}.{name}",
                    f"kind {c.kind} takes no parameters but {name} is set"))
        return
    if c.parent_part is None or c.child_part is None:
        out.append(Violation("MissingParentChild", path,
                             f"kind {c.kind} requires parent_part and child_part"))
    elif c.parent_part == c.child_part:
        out.append(Violation("ParentChildIdentical", path,
                             f"parent and child are both part {c.parent_part}"))
    if c.kind in DIRECTION_KINDS:
        if c.direction is None:
            out.append(Violation("MissingDirection", f"{path}.direction",
                                 f"kind {c.kind} requires a direction"))
        else:
            norm = float(np.linalg.norm(c.direction))
            if abs(norm - 1.0) > UNIT_TOL:
                out.append(Violation("DirectionNotUnit", f"{path}.direction",
                                     f"|direction| = {norm!r}, expected 1"))
    if c.kind in PIVOT_KINDS:
        if c.pivot is None:
            out.append(Violation("MissingPivot", f"{path}.pivot",
                                 f"kind {c.kind} requires a pivot"))
    elif c.pivot is not None:
        out.append(Violation("PivotForbiddenForPrismatic", f"{path}.pivot",
                             f"kind {c.kind} takes no pivot"))
    if c.range is not None and not (c.range[0] <= c.range[1]):
        out.append(Violation("RangeReversed", f"{path}.range",
                             f"range lo {c.range[0]} > hi {c.range[1]}"))


def validate_asset(asset: ObjectAsset, approved: bool = False) -> list[Violation]:
    """Return every invariant violation, in deterministic schema order.

    Total: never raises on arbitrary well-typed input. ``approved`` adds the
    checks that only bind once an asset has been through human review
    (non-empty descriptions).
    """
    out: list[Violation] = []
    ids = [p.id for p in asset.parts]
    if not asset.parts:
        out.append(Violation("NoParts", "parts", "asset has no parts"))
    if ids != list(range(1, len(ids) + 1)):
        out.append(Violation("PartIdsNotConsecutive", "parts",
                             f"ids {ids} are not 1..{len(ids)}"))
    for i, (lo_name, value) in enumerate(zip("LWH", asset.absolute_scale)):
        if not (value > 0):
            out.append(Violation("NonPositiveScale", f"absolute_scale[{i}]",
                                 f"{lo_name} = {value} must be > 0"))
    for p in asset.parts:
        path = f"parts[{p.id}]"
        if p.mesh.n_faces < 1:
            out.append(Violation("EmptyMesh", f"{path}.mesh", "mesh has no faces"))
        elif p.mesh.n_vertices and (np.abs(p.mesh.vertices) > 1.0 + 1e-9).any():
            worst = float(np.abs(p.mesh.vertices).max())
            out.append(Violation("VertexOutOfRange", f"{path}.mesh",
                                 f"|coordinate| up to {worst:.6g} exceeds 1"))
        if not (1 <= p.affordance_rank <= 10):
            out.append(Violation("AffordanceOutOfRange", f"{path}.affordance_rank",
                                 f"rank {p.affordance_rank} outside [1, 10]"))
        if p.material.density < 0:
            out.append(Violation("NegativeDensity", f"{path}.material.density_g_cm3",
                                 f"density {p.material.density} < 0"))
        if not (-1.0 < p.material.poisson_ratio <= 0.5):
            out.append(Violation("PoissonOutOfRange", f"{path}.material.poisson_ratio",
                                 f"{p.material.poisson_ratio} outside (-1, 0.5]"))
        if p.material.youngs_modulus < 0:
            out.append(Violation("NegativeModulus", f"{path}.material.youngs_modulus_gpa",
                                 f"{p.material.youngs_modulus} < 0"))
        if approved:
            for name in ("basic", "functional", "kinematic", "grasped"):
                if not getattr(p.descriptions, name).strip():
                    out.append(Violation("DescriptionEmpty", f"{path}.descriptions.{name}",
                                         "empty description on an approved asset"))
    id_set = set(ids)
    for k, c in enumerate(asset.constraints):
        path = f"constraints[{k}]"
        for name in ("parent_part", "child_part"):
            ref = getattr(c, name)
            if ref is not None and ref not in id_set:
                out.append(Violation("DanglingConstraintRef", f"{path}.{name}",
                                     f"references part {ref} which does not exist"))
        _check_constraint_fields(c, path, out)
    return out


def require_valid(asset: ObjectAsset, approved: bool = False) -> ObjectAsset:
    violations = validate_asset(asset, approved=approved)
    if violations:
        raise ValidationError(violations)
    return asset


# ---------------------------------------------------------------------------
# On-disk format


def asset_to_json_dict(asset: ObjectAsset) -> dict:
    return {
        "format_version": 1,
        "object_name": asset.object_name,
        "category": asset.category,
        "absolute_scale_cm": list(asset.absolute_scale),
        "provenance": asset.provenance,
        "parts": [
            {
                "id": p.id,
                "name": p.name,
                "mesh": f"part_{p.id}.obj",
                "material": p.material.to_dict(),
                "affordance_rank": p.affordance_rank,
                "descriptions": p.descriptions.to_dict(),
            }
            for p in asset.parts
        ],
        "constraints": [c.to_dict() for c in asset.constraints],
    }


def dump_asset_json(asset: ObjectAsset) -> str:
    """Canonical serialization: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(asset_to_json_dict(asset), sort_keys=True, indent=2) + "\n"


def save_asset(asset: ObjectAsset, path) -> None:
    """Write ``asset.json`` + one OBJ per part. Refuses invalid assets."""
    violations = validate_asset(asset)
    if violations:
        raise ValidationError(violations)
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        (path / "asset.json").write_text(dump_asset_json(asset), encoding="utf-8")
        for p in asset.parts:
            save_obj(p.mesh, path / f"part_{p.id}.obj")
    except OSError as exc:
        raise IoError(f"cannot write asset to {path}: {exc}") from exc


def load_asset(path) -> ObjectAsset:
    """Load an asset directory; validates and returns it unchanged."""
    path = Path(path)
    manifest = path / "asset.json"
    if not manifest.is_file():
        raise MissingFile(f"{manifest} does not exist")
    try:
        data = json.loads(manifest.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation("asset.json", f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaViolation("asset.json", "top level must be an object")

    def need(key, typ, where="asset.json"):
        if key not in data:
            raise SchemaViolation(f"{where}.{key}", "missing required field")
        value = data[key]
        if not isinstance(value, typ):
            raise SchemaViolation(f"{where}.{key}", f"expected {typ.__name__}")
        return value

    scale = need("absolute_scale_cm", list)
    if len(scale) != 3:
        raise SchemaViolation("asset.json.absolute_scale_cm", "expected 3 values")
    parts = []
    for i, pd in enumerate(need("parts", list)):
        ppath = f"parts[{i}]"
        if not isinstance(pd, dict):
            raise SchemaViolation(ppath, "part must be an object")
        try:
            pid = int(pd["id"])
            name = str(pd["name"])
            mesh_file = str(pd["mesh"])
            rank = int(pd["affordance_rank"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(ppath, f"bad part record: {exc!r}") from None
        mesh_path = path / mesh_file
        if not mesh_path.is_file():
            raise MissingFile(f"{mesh_path} does not exist")
        mesh = load_obj(mesh_path).drop_degenerate_faces()
        parts.append(Part(
            id=pid,
            name=name,
            mesh=mesh,
            material=MaterialSpec.from_dict(pd.get("material", {}), f"{ppath}.material"),
            affordance_rank=rank,
            descriptions=DescriptionSet.from_dict(pd.get("descriptions", {}), f"{ppath}.descriptions"),
        ))
    constraints = [
        KinematicConstraint.from_dict(cd, f"constraints[{k}]")
        for k, cd in enumerate(data.get("constraints", []))
    ]
    asset = ObjectAsset(
        object_name=str(need("object_name", str)),
        category=str(need("category", str)),
        absolute_scale=tuple(float(x) for x in scale),
        parts=tuple(parts),
        constraints=tuple(constraints),
        provenance=str(data.get("provenance", "")),
    )
    violations = validate_asset(asset)
    if violations:
        raise SchemaViolation(violations[0].path, violations[0].message)
    return asset


def assets_equal(a: ObjectAsset, b: ObjectAsset, mesh_tol: float = 1e-6) -> bool:
    """Field-for-field equality with per-coordinate mesh tolerance."""
    if dump_asset_json(a) != dump_asset_json(b):
        return False
    for pa, pb in zip(a.parts, b.parts):
        if pa.mesh.n_vertices != pb.mesh.n_vertices or pa.mesh.n_faces != pb.mesh.n_faces:
            return False
        if not np.array_equal(pa.mesh.faces, pb.mesh.faces):
            return False
        if np.abs(pa.mesh.vertices - pb.mesh.vertices).max(initial=0.0) > mesh_tol:
            return False
    return True
