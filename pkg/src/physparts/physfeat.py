"""Per-voxel physical features: 14-channel packing, voxelization, channel
normalization, and pluggable text embeddings.

Channel layout (order is load-bearing for every consumer):

    index  0      1           2        3      4       5..7       8..10     11..12  13
    field  scale  affordance  density  child  parent  direction  location  range   type

1 + 1 + 1 + 11 = 14. `scale` is the scalar max(L, W, H) in cm; `type` is the
numeric joint-kind code (A=0 .. CB=5).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from .asset import KIND_CODES, ObjectAsset, validate_asset
from .errors import EmbedderUnavailable, IoError, SchemaViolation, UnannotatedPart, WrongArity
from .geometry import surface_sample

CHANNEL_LAYOUT = (
    ("scale", 1),
    ("affordance", 1),
    ("density", 1),
    ("kin_child", 1),
    ("kin_parent", 1),
    ("kin_direction", 3),
    ("kin_location", 3),
    ("kin_range", 2),
    ("kin_type", 1),
)
PHYS_DIM = sum(width for _, width in CHANNEL_LAYOUT)
assert PHYS_DIM == 1 + 1 + 1 + 11 == 14, "physical feature layout must be 14 wide"

VOXELIZE_SAMPLES = 64000
EMBED_DIM = 768


@dataclass(frozen=True)
class PhysRecord:
    scale: float = 0.0
    affordance: float = 0.0
    density: float = 0.0
    kin_child: float = 0.0
    kin_parent: float = 0.0
    kin_direction: tuple = (0.0, 0.0, 0.0)
    kin_location: tuple = (0.0, 0.0, 0.0)
    kin_range: tuple = (0.0, 0.0)
    kin_type: float = 0.0


def pack_phys(rec: PhysRecord) -> np.ndarray:
    """PhysRecord -> 14-vector, exact (no rounding)."""
    if len(rec.kin_direction) != 3 or len(rec.kin_location) != 3 or len(rec.kin_range) != 2:
        raise WrongArity("direction/location/range must be 3/3/2 wide")
    return np.array([
        rec.scale, rec.affordance, rec.density, rec.kin_child, rec.kin_parent,
        *rec.kin_direction, *rec.kin_location, *rec.kin_range, rec.kin_type,
    ], dtype=np.float64)


def unpack_phys(v) -> PhysRecord:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (PHYS_DIM,):
        raise WrongArity(f"expected shape ({PHYS_DIM},), got {v.shape}")
    return PhysRecord(
        scale=float(v[0]), affordance=float(v[1]), density=float(v[2]),
        kin_child=float(v[3]), kin_parent=float(v[4]),
        kin_direction=(float(v[5]), float(v[6]), float(v[7])),
        kin_location=(float(v[8]), float(v[9]), float(v[10])),
        kin_range=(float(v[11]), float(v[12])),
        kin_type=float(v[13]),
    )


@dataclass(frozen=True)
class VoxelGrid:
    resolution: int
    occupied: np.ndarray        # (N, 3) int32, unique, in [0, resolution)^3
    phys: np.ndarray            # (N, 14) float64, packed PhysRecord rows
    sem: np.ndarray | None = None  # (N, 768, 3) optional

    def __len__(self):
        return self.occupied.shape[0]

    def record(self, i: int) -> PhysRecord:
        return unpack_phys(self.phys[i])


def part_phys_record(asset: ObjectAsset, part_id: int) -> PhysRecord:
    """The constant record a part stamps into every voxel it owns.

    Kinematic fields come from the joint where the part is the child; parts
    that are nobody's child are rigid (type E) with zero joint parameters.
    """
    part = asset.part_by_id(part_id)
    c = asset.constraint_for_child(part_id)
    if c is None or c.kind in ("A", "E"):
        kind = c.kind if c is not None else "E"
        kin = dict(kin_child=0.0, kin_parent=0.0, kin_direction=(0.0, 0.0, 0.0),
                   kin_location=(0.0, 0.0, 0.0), kin_range=(0.0, 0.0),
                   kin_type=float(KIND_CODES[kind]))
    else:
        kin = dict(
            kin_child=float(c.child_part), kin_parent=float(c.parent_part),
            kin_direction=tuple(c.direction) if c.direction else (0.0, 0.0, 0.0),
            kin_location=tuple(c.pivot) if c.pivot else (0.0, 0.0, 0.0),
            kin_range=tuple(c.range) if c.range else (0.0, 0.0),
            kin_type=float(KIND_CODES[c.kind]),
        )
    return PhysRecord(
        scale=float(max(asset.absolute_scale)),
        affordance=float(part.affordance_rank),
        density=float(part.material.density),
        **kin,
    )


def voxelize(asset: ObjectAsset, resolution: int = 64, seed: int = 0) -> VoxelGrid:
    """Surface-sample voxel occupancy with majority-part ownership.

    VOXELIZE_SAMPLES points are allocated to parts in proportion to surface
    area (largest-remainder rounding, every part gets >= 1); a voxel is
    occupied iff a sample lands in it, and takes the record of the part
    owning the most of its samples (ties: lowest part id).
    """
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    violations = validate_asset(asset)
    if violations:
        raise UnannotatedPart(str(violations[0]))
    areas = np.array([p.mesh.area() for p in asset.parts])
    total = areas.sum()
    if total <= 0:
        raise UnannotatedPart("asset has no positive surface area")
    quota = VOXELIZE_SAMPLES * areas / total
    counts = np.maximum(np.floor(quota).astype(int), 1)
    remainder = VOXELIZE_SAMPLES - counts.sum()
    if remainder > 0:
        order = np.argsort(-(quota - np.floor(quota)), kind="stable")
        counts[order[:remainder]] += 1

    all_vox, all_owner = [], []
    for p, n in zip(asset.parts, counts):
        pts = surface_sample(p.mesh, int(n), seed + p.id, p.id).points
        vox = np.floor((pts + 1.0) / 2.0 * resolution).astype(np.int64)
        np.clip(vox, 0, resolution - 1, out=vox)
        all_vox.append(vox)
        all_owner.append(np.full(vox.shape[0], p.id, dtype=np.int64))
    vox = np.concatenate(all_vox)
    owner = np.concatenate(all_owner)

    flat = (vox[:, 0] * resolution + vox[:, 1]) * resolution + vox[:, 2]
    # Majority vote per voxel: count (voxel, part) pairs, then keep the
    # highest count per voxel with ties to the lowest part id.
    pair = flat * (len(asset.parts) + 1) + owner
    uniq_pair, pair_counts = np.unique(pair, return_counts=True)
    pair_flat = uniq_pair // (len(asset.parts) + 1)
    pair_owner = uniq_pair % (len(asset.parts) + 1)
    order = np.lexsort((pair_owner, -pair_counts, pair_flat))
    pair_flat, pair_owner = pair_flat[order], pair_owner[order]
    first = np.ones(pair_flat.shape[0], dtype=bool)
    first[1:] = pair_flat[1:] != pair_flat[:-1]
    win_flat, win_owner = pair_flat[first], pair_owner[first]

    sort2 = np.argsort(win_flat, kind="stable")
    win_flat, win_owner = win_flat[sort2], win_owner[sort2]
    occupied = np.stack([
        win_flat // (resolution * resolution),
        (win_flat // resolution) % resolution,
        win_flat % resolution,
    ], axis=1).astype(np.int32)
    records = {p.id: pack_phys(part_phys_record(asset, p.id)) for p in asset.parts}
    phys = np.stack([records[int(o)] for o in win_owner]) if len(win_owner) else \
        np.zeros((0, PHYS_DIM))
    return VoxelGrid(resolution=resolution, occupied=occupied, phys=phys)


# ---------------------------------------------------------------------------
# Channel normalization (shared table with the metrics module).

# (scale_divisor, offset) applied as (v - offset) / divisor per channel block.
_NORM = {
    "scale": (1000.0, 0.0),
    "affordance": (9.0, 1.0),
    "density": (10.0, 0.0),
    "kin_child": (10.0, 0.0),
    "kin_parent": (10.0, 0.0),
    "kin_direction": (1.0, 0.0),
    "kin_location": (1.0, 0.0),
    "kin_range": (float(np.pi), 0.0),
    "kin_type": (5.0, 0.0),
}


def _channel_slices():
    out = {}
    start = 0
    for name, width in CHANNEL_LAYOUT:
        out[name] = slice(start, start + width)
        start += width
    return out


_SLICES = _channel_slices()


def normalize_channels(grid: VoxelGrid) -> VoxelGrid:
    phys = grid.phys.copy()
    for name, _ in CHANNEL_LAYOUT:
        div, off = _NORM[name]
        phys[:, _SLICES[name]] = (phys[:, _SLICES[name]] - off) / div
    return replace(grid, phys=phys)


def denormalize_channels(grid: VoxelGrid) -> VoxelGrid:
    phys = grid.phys.copy()
    for name, _ in CHANNEL_LAYOUT:
        div, off = _NORM[name]
        phys[:, _SLICES[name]] = phys[:, _SLICES[name]] * div + off
    return replace(grid, phys=phys)


# ---------------------------------------------------------------------------
# Description embeddings.


class HashingEmbedder:
    """Deterministic offline stand-in for a text encoder.

    Tokens hash into 768 signed bins; vectors are L2-normalized. Exists so
    shape checks and the pipeline run without model weights; not semantic.
    """

    def __init__(self, dim: int = EMBED_DIM):
        self.dim = dim

    def encode(self, text: str) -> np.ndarray:
        v = np.zeros(self.dim)
        tokens = [t for t in "".join(
            ch if ch.isalnum() else " " for ch in text.lower()).split() or ["<empty>"]]
        for tok in tokens:
            h = hashlib.sha256(tok.encode("utf-8")).digest()
            idx = int.from_bytes(h[:4], "little") % self.dim
            sign = 1.0 if h[4] % 2 == 0 else -1.0
            v[idx] += sign
        norm = np.linalg.norm(v)
        if norm == 0.0:  # tokens cancelled; fall back to a fixed basis vector
            v[0] = 1.0
            norm = 1.0
        return v / norm


def embed_descriptions(embedder, desc) -> np.ndarray:
    """(768, 3): columns are the basic, functional, kinematic embeddings."""
    if embedder is None or not hasattr(embedder, "encode"):
        raise EmbedderUnavailable("no embedder with an encode(text) method configured")
    cols = [np.asarray(embedder.encode(t), dtype=np.float64)
            for t in (desc.basic, desc.functional, desc.kinematic)]
    for c in cols:
        if c.shape != (EMBED_DIM,):
            raise EmbedderUnavailable(f"embedder returned shape {c.shape}, need ({EMBED_DIM},)")
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# Binary voxel-grid format: header (magic, resolution, N, channel manifest
# JSON) followed by little-endian f32 payload, row-major.

_MAGIC = b"PHYSVOX1"


def save_voxel_grid(grid: VoxelGrid, path) -> None:
    manifest = {
        "channels": [[name, width] for name, width in CHANNEL_LAYOUT],
        "has_sem": grid.sem is not None,
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<III", grid.resolution, len(grid), len(blob)))
            fh.write(blob)
            fh.write(grid.occupied.astype("<f4").tobytes())
            fh.write(grid.phys.astype("<f4").tobytes())
            if grid.sem is not None:
                fh.write(grid.sem.astype("<f4").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write voxel grid to {path}: {exc}") from exc


def load_voxel_grid(path) -> VoxelGrid:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read voxel grid from {path}: {exc}") from exc
    if data[:8] != _MAGIC:
        raise SchemaViolation(str(path), "bad magic; not a voxel grid file")
    resolution, n, blob_len = struct.unpack_from("<III", data, 8)
    off = 8 + 12
    manifest = json.loads(data[off:off + blob_len].decode("utf-8"))
    off += blob_len
    occ = np.frombuffer(data, dtype="<f4", count=n * 3, offset=off)
    off += occ.nbytes
    phys = np.frombuffer(data, dtype="<f4", count=n * PHYS_DIM, offset=off)
    off += phys.nbytes
    sem = None
    if manifest.get("has_sem"):
        sem = np.frombuffer(data, dtype="<f4", count=n * EMBED_DIM * 3, offset=off)
        sem = sem.astype(np.float64).reshape(n, EMBED_DIM, 3)
    return VoxelGrid(
        resolution=int(resolution),
        occupied=occ.astype(np.int32).reshape(n, 3),
        phys=phys.astype(np.float64).reshape(n, PHYS_DIM),
        sem=sem,
    )
