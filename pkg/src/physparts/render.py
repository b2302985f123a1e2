"""Deterministic software z-buffer renderer.

Produces color renders, part-isolation prompt images, and per-pixel property
maps. Background pixels carry the sentinel -1 in every channel except mask
(which is 0/1 by definition). Per-part property channels are constant across
a part's pixels; depth and shaded color are not property channels.

Pixel convention: integer pixel (row i, col j) has center (j + 0.5, i + 0.5)
in projected coordinates; depth is camera-forward distance, interpolated
perspective-correct via 1/z.
"""

from __future__ import annotations

import colorsys
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .asset import KIND_CODES, ObjectAsset, Part
from .errors import UnknownPart
from .kernels import raster_depth_faces

SENTINEL = -1.0
NEAR_PLANE = 1e-6

CHANNEL_WIDTHS = {
    "scale": 1,
    "density": 1,
    "affordance": 1,
    "kin_type": 1,
    "kin_direction": 3,
    "kin_pivot": 3,
    "kin_range": 2,
    "part_index": 1,
    "color": 3,
    "depth": 1,
    "mask": 1,
}

# Channels whose value is a per-part annotation (constant within a part).
PROPERTY_CHANNELS = (
    "scale", "density", "affordance", "kin_type",
    "kin_direction", "kin_pivot", "kin_range",
)


@dataclass(frozen=True)
class ViewSpec:
    eye: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float]
    fov_deg: float = 40.0
    resolution: tuple[int, int] = (512, 512)

    def __post_init__(self):
        eye = np.asarray(self.eye, dtype=np.float64)
        at = np.asarray(self.look_at, dtype=np.float64)
        up = np.asarray(self.up, dtype=np.float64)
        fwd = at - eye
        if np.linalg.norm(fwd) == 0:
            raise ValueError("eye and look_at coincide")
        if np.linalg.norm(np.cross(fwd, up)) < 1e-12:
            raise ValueError("up is parallel to the view direction")
        w, h = self.resolution
        if w < 16 or h < 16:
            raise ValueError(f"resolution must be >= 16x16, got {w}x{h}")


@dataclass(frozen=True)
class PropertyImage:
    channel: str
    pixels: np.ndarray  # (h, w, c) float64, row-major
    view: ViewSpec


def camera_frame(view: ViewSpec) -> tuple:
    eye = np.asarray(view.eye, dtype=np.float64)
    fwd = np.asarray(view.look_at, dtype=np.float64) - eye
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(view.up, dtype=np.float64))
    right = right / np.linalg.norm(right)
    up = np.cross(right, fwd)
    return eye, right, up, fwd


def project_points(points: np.ndarray, view: ViewSpec) -> tuple:
    """Perspective projection to pixel coordinates.

    Returns (xy (N, 2) pixel coords, z (N,) camera-forward distance).
    """
    eye, right, up, fwd = camera_frame(view)
    rel = points - eye
    x = rel @ right
    y = rel @ up
    z = rel @ fwd
    w, h = view.resolution
    half_h = np.tan(np.radians(view.fov_deg) / 2.0)
    half_w = half_h * (w / h)
    with np.errstate(divide="ignore", invalid="ignore"):
        ndc_x = x / (z * half_w)
        ndc_y = y / (z * half_h)
    px = (ndc_x + 1.0) * 0.5 * w
    py = (1.0 - ndc_y) * 0.5 * h
    return np.stack([px, py], axis=1), z


def _gather_faces(asset: ObjectAsset) -> tuple:
    """All faces across parts -> (vertices, faces, part_id_of_face)."""
    verts, faces, owner = [], [], []
    offset = 0
    for p in asset.parts:
        verts.append(p.mesh.vertices)
        faces.append(p.mesh.faces + offset)
        owner.append(np.full(p.mesh.n_faces, p.id, dtype=np.int32))
        offset += p.mesh.n_vertices
    return (np.concatenate(verts),
            np.concatenate(faces).astype(np.int32),
            np.concatenate(owner))


def render_buffers(asset: ObjectAsset, view: ViewSpec) -> tuple:
    """Shared z-buffer pass: (depth (h,w), face_index (h,w), part_of_face).

    depth is +inf and face_index -1 where no geometry projects.
    """
    w, h = view.resolution
    verts, faces, owner = _gather_faces(asset)
    xy, z = project_points(verts, view)
    tri_xy = xy[faces]                      # (T, 3, 2)
    tri_z = z[faces]                        # (T, 3)
    keep = (tri_z > NEAR_PLANE).all(axis=1)
    tri_xy = np.ascontiguousarray(tri_xy[keep], dtype=np.float64)
    inv_z = np.ascontiguousarray(1.0 / tri_z[keep], dtype=np.float64)
    depth, face = raster_depth_faces(tri_xy, inv_z, w, h)
    kept_ids = np.nonzero(keep)[0]
    if kept_ids.size:
        face_index = np.where(face >= 0, kept_ids[np.maximum(face, 0)], -1).astype(np.int32)
    else:
        face_index = np.full(face.shape, -1, dtype=np.int32)
    return depth, face_index, owner


def part_channel_values(asset: ObjectAsset, part: Part, channel: str) -> np.ndarray:
    """The constant vector a part contributes to one property channel.

    Missing values (no joint on this part, joint without that field) are the
    sentinel. Parts that are nobody's child render kin_type as rigid (E).
    """
    c = asset.constraint_for_child(part.id)
    if channel == "scale":
        return np.array([max(asset.absolute_scale)])
    if channel == "density":
        return np.array([part.material.density])
    if channel == "affordance":
        return np.array([float(part.affordance_rank)])
    if channel == "kin_type":
        return np.array([float(KIND_CODES[c.kind if c is not None else "E"])])
    if channel == "kin_direction":
        if c is None or c.direction is None:
            return np.full(3, SENTINEL)
        return np.asarray(c.direction, dtype=np.float64)
    if channel == "kin_pivot":
        if c is None or c.pivot is None:
            return np.full(3, SENTINEL)
        return np.asarray(c.pivot, dtype=np.float64)
    if channel == "kin_range":
        if c is None or c.range is None:
            return np.full(2, SENTINEL)
        return np.asarray(c.range, dtype=np.float64)
    if channel == "part_index":
        return np.array([float(part.id)])
    raise ValueError(f"unknown per-part channel {channel!r}")


def part_color(part_id: int) -> np.ndarray:
    """Deterministic per-part base color, golden-ratio hue walk."""
    hue = (part_id * 0.6180339887498949) % 1.0
    return np.array(colorsys.hsv_to_rgb(hue, 0.65, 1.0))


_LIGHT_DIR = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
_AMBIENT = 0.35


def _shade_color(asset: ObjectAsset, depth, face_index, owner) -> np.ndarray:
    verts, faces, _ = _gather_faces(asset)
    tri = verts[faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norms = np.linalg.norm(n, axis=1)
    n = np.divide(n, norms[:, None], out=np.zeros_like(n), where=norms[:, None] > 0)
    lambert = _AMBIENT + (1.0 - _AMBIENT) * np.abs(n @ _LIGHT_DIR)
    base = np.zeros((len(asset.parts) + 2, 3))
    for p in asset.parts:
        base[p.id] = part_color(p.id)
    img = np.full(depth.shape + (3,), SENTINEL)
    fg = face_index >= 0
    fidx = face_index[fg]
    img[fg] = base[owner[fidx]] * lambert[fidx][:, None] * 255.0
    return img


def rasterize(asset: ObjectAsset, view: ViewSpec, channel: str) -> PropertyImage:
    """Render one channel. See CHANNEL_WIDTHS for the channel set."""
    if channel not in CHANNEL_WIDTHS:
        raise ValueError(f"unknown channel {channel!r}")
    depth, face_index, owner = render_buffers(asset, view)
    fg = face_index >= 0
    if channel == "depth":
        img = np.where(fg, depth, SENTINEL)[..., None]
    elif channel == "mask":
        img = fg.astype(np.float64)[..., None]
    elif channel == "color":
        img = _shade_color(asset, depth, face_index, owner)
    else:
        width = CHANNEL_WIDTHS[channel]
        table = np.full((len(asset.parts) + 2, width), SENTINEL)
        for p in asset.parts:
            table[p.id] = part_channel_values(asset, p, channel)
        img = np.full(depth.shape + (width,), SENTINEL)
        img[fg] = table[owner[face_index[fg]]]
    return PropertyImage(channel=channel, pixels=img, view=view)


def render_isolation(asset: ObjectAsset, part_id: int, view: ViewSpec) -> np.ndarray:
    """Prompt image: target part red, others grey, white background, unshaded.

    Occlusion is real: the z-buffer is shared across all parts.
    """
    if not asset.has_part(part_id):
        raise UnknownPart(f"no part with id {part_id}")
    depth, face_index, owner = render_buffers(asset, view)
    img = np.full(depth.shape + (3,), 255, dtype=np.uint8)
    fg = face_index >= 0
    owners = np.zeros_like(face_index)
    owners[fg] = owner[face_index[fg]]
    img[fg & (owners == part_id)] = (255, 0, 0)
    img[fg & (owners != part_id)] = (128, 128, 128)
    return img


def default_property_views() -> list[ViewSpec]:
    """The 10 fixed views: 8 azimuths at 45 deg spacing, elevation 30 deg,
    plus top and bottom; radius 2.8, vertical fov 40 deg, 512x512."""
    radius = 2.8
    views = []
    elev = np.radians(30.0)
    for i in range(8):
        az = np.radians(45.0 * i)
        eye = (radius * np.cos(elev) * np.cos(az),
               radius * np.cos(elev) * np.sin(az),
               radius * np.sin(elev))
        views.append(ViewSpec(eye=eye, look_at=(0, 0, 0), up=(0, 0, 1)))
    views.append(ViewSpec(eye=(0, 0, radius), look_at=(0, 0, 0), up=(0, 1, 0)))
    views.append(ViewSpec(eye=(0, 0, -radius), look_at=(0, 0, 0), up=(0, 1, 0)))
    return views


def random_sphere_views(n: int, seed: int) -> list[ViewSpec]:
    """n area-uniform directions on the sphere, radius 2.8, per-seed stable."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    views = []
    while len(views) < n:
        v = rng.normal(size=3)
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            continue
        d = v / norm
        up = (0.0, 1.0, 0.0) if abs(d[2]) > 0.999 else (0.0, 0.0, 1.0)
        views.append(ViewSpec(eye=tuple(2.8 * d), look_at=(0, 0, 0), up=up))
    return views


# ---------------------------------------------------------------------------
# Image file output.


def write_png(path, rgb: np.ndarray) -> None:
    """Minimal 8-bit RGB PNG writer (no external imaging dependency)."""
    img = np.asarray(rgb)
    if img.dtype != np.uint8:
        img = np.clip(img, 0, 255).astype(np.uint8)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    h, w = img.shape[:2]
    raw = b"".join(b"\x00" + img[i].tobytes() for i in range(h))

    def chunk(tag, payload):
        body = tag + payload
        return struct.pack(">I", len(payload)) + body + struct.pack(">I", zlib.crc32(body))

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    data = (b"\x89PNG\r\n\x1a\n"
            + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", zlib.compress(raw, 9))
            + chunk(b"IEND", b""))
    with open(path, "wb") as fh:
        fh.write(data)


def save_property_map(path, image: PropertyImage) -> None:
    """Row-major little-endian f32 array file (NPY format)."""
    np.save(path, image.pixels.astype("<f4"), allow_pickle=False)


def load_property_map(path) -> np.ndarray:
    return np.load(path, allow_pickle=False).astype(np.float64)
