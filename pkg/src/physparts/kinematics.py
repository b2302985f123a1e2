"""Joint estimation from part-pair contact geometry.

Pipeline: sample part surfaces, keep the mutual contact region at threshold
tau, fit a total-least-squares plane to it, propose axis directions in that
plane (plus its normal for translation-capable kinds), cluster the region for
pivot candidates, score, and assemble the constraint. Everything is
deterministic given (asset, seed, config).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .asset import KinematicConstraint, ObjectAsset
from .config import EstimationConfig
from .errors import DegenerateInput, NoContact
from .geometry import PointCloud, nearest_distances, surface_sample

KMEANS_RESTARTS = 50
KMEANS_MAX_ITER = 100
SILHOUETTE_CUTOFF = 0.3
SILHOUETTE_MAX_POINTS = 1500
EDGE_SUPPORT_WIDTH = 0.05

# Part-sampling seeds must differ per part but derive from one config seed.
_PART_SEED_STRIDE = 104729


@dataclass(frozen=True)
class ContactRegion:
    child_points: PointCloud
    parent_points: PointCloud
    tau: float

    def all_points(self) -> np.ndarray:
        return np.concatenate([self.child_points.points, self.parent_points.points])


@dataclass(frozen=True)
class FittedPlane:
    normal: np.ndarray  # unit 3-vector
    offset: float       # plane = {x : normal . x = offset}
    rms_residual: float


@dataclass(frozen=True)
class AxisCandidate:
    direction: np.ndarray   # unit 3-vector
    pivot: np.ndarray | None = None
    score: float = 0.0
    provenance: str = "plane_sampled"  # plane_sampled | kmeans_center | manual


def canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip so the largest-|component| coordinate is positive (ties: first)."""
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def contact_region(child: PointCloud, parent: PointCloud, tau: float) -> ContactRegion:
    """Mutual filter: keep points of each cloud within tau of the other."""
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    child_keep = nearest_distances(child, parent) <= tau
    parent_keep = nearest_distances(parent, child) <= tau
    if not child_keep.any() or not parent_keep.any():
        raise NoContact(f"no point pairs within tau={tau}")
    return ContactRegion(child.subset(child_keep), parent.subset(parent_keep), tau)


def fit_plane(points) -> FittedPlane:
    """Total-least-squares plane through a point set.

    normal = eigenvector of the smallest eigenvalue of the centered
    covariance, sign-fixed so its largest-|component| coordinate is positive;
    offset = normal . centroid; rms_residual = RMS point-plane distance.
    """
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    if pts.shape[0] < 3:
        raise DegenerateInput(f"need >= 3 points, got {pts.shape[0]}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / pts.shape[0]
    evals, evecs = np.linalg.eigh(cov)  # ascending eigenvalues
    if evals[1] <= 1e-9 * max(evals[2], 1e-30):
        raise DegenerateInput("points are collinear (or coincident)")
    normal = canonical_sign(evecs[:, 0])
    return FittedPlane(
        normal=normal,
        offset=float(normal @ centroid),
        rms_residual=float(np.sqrt(max(evals[0], 0.0))),
    )


def _in_plane_basis(plane: FittedPlane, region: ContactRegion | None) -> tuple:
    """(u, w): u = first principal in-plane direction of the region, w = n x u."""
    n = plane.normal
    u = None
    if region is not None:
        pts = region.all_points()
        centered = pts - pts.mean(axis=0)
        projected = centered - np.outer(centered @ n, n)
        cov = projected.T @ projected / pts.shape[0]
        evals, evecs = np.linalg.eigh(cov)
        if evals[2] > 1e-18:
            u = evecs[:, 2]
    if u is None:
        # No usable spread: build a basis from the world axis least like n.
        e = np.zeros(3)
        e[int(np.argmin(np.abs(n)))] = 1.0
        u = e - (e @ n) * n
    u = u - (u @ n) * n
    u = canonical_sign(u / np.linalg.norm(u))
    w = np.cross(n, u)
    return u, w / np.linalg.norm(w)


def gen_axis_candidates(plane: FittedPlane, region: ContactRegion, m: int,
                        kind: str) -> list[AxisCandidate]:
    """m in-plane directions at angular spacing pi/m starting from the first
    principal in-plane direction; translation-capable kinds (B, CB) also get
    the plane normal appended as candidate m+1.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    u, w = _in_plane_basis(plane, region)
    out = []
    for i in range(m):
        theta = np.pi * i / m
        d = np.cos(theta) * u + np.sin(theta) * w
        d = canonical_sign(d / np.linalg.norm(d))
        out.append(AxisCandidate(direction=d))
    if kind in ("B", "CB"):
        out.append(AxisCandidate(direction=canonical_sign(plane.normal.copy())))
    return out


# ---------------------------------------------------------------------------
# Pivot clustering: k-means++ with restarts, k picked by silhouette.


def _kmeans_pp_seed(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, 3))
    centers[0] = pts[rng.integers(pts.shape[0])]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = rng.integers(pts.shape[0])
        else:
            idx = rng.choice(pts.shape[0], p=d2 / total)
        centers[j] = pts[idx]
        d2 = np.minimum(d2, ((pts - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(pts: np.ndarray, centers: np.ndarray) -> tuple:
    k = centers.shape[0]
    assign = None
    for _ in range(KMEANS_MAX_ITER):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        for j in range(k):
            mask = new_assign == j
            if mask.any():
                centers[j] = pts[mask].mean(axis=0)
            else:
                centers[j] = pts[d2.min(axis=1).argmax()]
        if assign is not None and np.array_equal(assign, new_assign):
            break
        assign = new_assign
    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    inertia = float(d2[np.arange(pts.shape[0]), assign].sum())
    return centers, assign, inertia


def _kmeans(pts: np.ndarray, k: int, seed: int) -> tuple:
    """Best of KMEANS_RESTARTS k-means++ runs by inertia."""
    if k == 1:
        center = pts.mean(axis=0, keepdims=True)
        inertia = float(((pts - center) ** 2).sum())
        return center, np.zeros(pts.shape[0], dtype=np.intp), inertia
    best = None
    for r in range(KMEANS_RESTARTS):
        rng = np.random.default_rng((seed, k, r))
        centers, assign, inertia = _lloyd(pts, _kmeans_pp_seed(pts, k, rng))
        if best is None or inertia < best[2]:
            best = (centers, assign, inertia)
    return best


def _mean_silhouette(pts: np.ndarray, assign: np.ndarray, k: int) -> float:
    n = pts.shape[0]
    d = np.sqrt(np.maximum(
        ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2), 0.0))
    sil = np.zeros(n)
    counts = np.array([(assign == j).sum() for j in range(k)])
    for i in range(n):
        own = assign[i]
        if counts[own] <= 1:
            continue  # singleton: silhouette 0 by convention
        a = d[i][assign == own].sum() / (counts[own] - 1)
        b = np.inf
        for j in range(k):
            if j != own and counts[j] > 0:
                b = min(b, d[i][assign == j].mean())
        denom = max(a, b)
        sil[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(sil.mean())


def pivot_candidates(region: ContactRegion, k_max: int, seed: int = 0) -> np.ndarray:
    """Cluster centers of the contact region, lexicographically sorted.

    k is chosen as the silhouette-maximizing value in 2..k_max, falling back
    to k=1 when the best silhouette is below the cutoff (no real clusters).
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    pts = region.all_points()
    k_cap = min(k_max, pts.shape[0])
    results = {k: _kmeans(pts, k, seed) for k in range(1, k_cap + 1)}

    eval_pts, eval_assign = pts, None
    sub = None
    if pts.shape[0] > SILHOUETTE_MAX_POINTS:
        sub = np.random.default_rng((seed, 0x511)).choice(
            pts.shape[0], SILHOUETTE_MAX_POINTS, replace=False)
        sub.sort()
        eval_pts = pts[sub]
    best_k, best_s = 1, -np.inf
    for k in range(2, k_cap + 1):
        assign = results[k][1]
        eval_assign = assign if sub is None else assign[sub]
        s = _mean_silhouette(eval_pts, eval_assign, k)
        if s > best_s:
            best_k, best_s = k, s
    if best_s < SILHOUETTE_CUTOFF:
        best_k = 1
    centers = results[best_k][0]
    order = np.lexsort((centers[:, 2], centers[:, 1], centers[:, 0]))
    return centers[order]


# ---------------------------------------------------------------------------
# Scoring and assembly.


def _line_distances(pts: np.ndarray, anchor: np.ndarray, d: np.ndarray) -> np.ndarray:
    rel = pts - anchor
    along = rel @ d
    perp = rel - np.outer(along, d)
    return np.sqrt((perp ** 2).sum(axis=1))


def _edge_support(pts: np.ndarray, anchor: np.ndarray, d: np.ndarray) -> float:
    # Constant-radius band around the axis: reduces to plain distance-to-line
    # support when the region hugs the line (median radius ~ 0), and also
    # credits rings/collars whose contact sits at a fixed radius (screw caps).
    dist = _line_distances(pts, anchor, d)
    med = float(np.median(dist))
    return float((np.abs(dist - med) <= EDGE_SUPPORT_WIDTH).mean())


def _extent(pts: np.ndarray, d: np.ndarray, kind: str) -> float:
    centered = pts - pts.mean(axis=0)
    along = centered @ d
    if kind == "B":
        return min(1.0, float(along.std()))
    perp = centered - np.outer(along, d)
    cov = perp.T @ perp / pts.shape[0]
    evals = np.linalg.eigvalsh(cov)
    spread = float(np.sqrt(max(evals[2], 0.0)) + np.sqrt(max(evals[1], 0.0)))
    return min(1.0, spread / 2.0)


def score_candidates(cands: list[AxisCandidate], region: ContactRegion,
                     asset: ObjectAsset, kind: str = "C",
                     config: EstimationConfig | None = None) -> list[AxisCandidate]:
    """score = w_a*alignment + w_e*edge_support + w_x*extent, sorted descending.

    alignment = max |d . world axis|; edge_support = fraction of region points
    in a 0.05 band around the candidate line (anchored at its pivot, else the
    region centroid); extent = spread along d for B, across d otherwise.
    Ties break on lexicographic direction; equal keys keep input order.
    """
    if not cands:
        raise ValueError("no candidates to score")
    if config is None:
        config = EstimationConfig()
    pts = region.all_points()
    centroid = pts.mean(axis=0)
    scored = []
    for c in cands:
        d = c.direction
        anchor = centroid if c.pivot is None else c.pivot
        score = (config.weight_alignment * float(np.abs(d).max())
                 + config.weight_edge_support * _edge_support(pts, anchor, d)
                 + config.weight_extent * _extent(pts, d, kind))
        scored.append(replace(c, score=score))
    return sorted(scored, key=lambda c: (-c.score, tuple(c.direction)))


def _part_cloud(asset: ObjectAsset, part_id: int, config: EstimationConfig) -> PointCloud:
    part = asset.part_by_id(part_id)
    return surface_sample(part.mesh, config.samples,
                          config.seed + _PART_SEED_STRIDE * part_id, part_id)


def _choose_pivot(region: ContactRegion, centers: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Anchor minimizing the variance of point radii about its axis line, from
    the k-means centers plus the region centroid; canonicalized to the point
    on that line nearest the centroid."""
    pts = region.all_points()
    centroid = pts.mean(axis=0)
    best, best_var = None, np.inf
    for anchor in [centroid, *centers]:
        var = float(_line_distances(pts, anchor, d).var())
        if var < best_var - 1e-15:
            best, best_var = anchor, var
    foot = best + ((centroid - best) @ d) * d
    return foot


def _prismatic_range(asset: ObjectAsset, child_id: int, d: np.ndarray) -> tuple:
    """(lo, 0): how far the child may retract along -d, capped by its own
    extent along d and by staying inside the object's union bounding box."""
    verts = asset.all_vertices()
    lo_box, hi_box = verts.min(axis=0), verts.max(axis=0)
    child = asset.part_by_id(child_id).mesh.vertices
    c_lo, c_hi = child.min(axis=0), child.max(axis=0)
    proj = child @ d
    extent = float(proj.max() - proj.min())
    t_min = -extent
    for a in range(3):
        if d[a] > 1e-12:
            t_min = max(t_min, (lo_box[a] - c_lo[a]) / d[a])
        elif d[a] < -1e-12:
            t_min = max(t_min, (hi_box[a] - c_hi[a]) / d[a])
    return (min(t_min, 0.0), 0.0)


def estimate_constraint(asset: ObjectAsset, child_id: int, parent_id: int,
                        kind: str, config: EstimationConfig | None = None) -> KinematicConstraint:
    """Full auto-estimation for kinds B, C, D, CB; finalized stays False.

    B gets direction + translation range; C/CB get direction + pivot and a
    default rotation range of (0, pi/2) radians pending review; D gets the
    top pivot cluster center only.
    """
    if kind not in ("B", "C", "D", "CB"):
        raise ValueError(f"estimation handles kinds B, C, D, CB; got {kind!r}")
    if config is None:
        config = EstimationConfig()
    region = contact_region(_part_cloud(asset, child_id, config),
                            _part_cloud(asset, parent_id, config), config.tau)

    if kind == "D":
        centers = pivot_candidates(region, config.k_max, config.seed)
        return KinematicConstraint(
            kind="D", parent_part=parent_id, child_part=child_id,
            pivot=tuple(float(x) for x in centers[0]), finalized=False)

    plane = fit_plane(region.all_points())
    cands = gen_axis_candidates(plane, region, config.m, kind)
    top = score_candidates(cands, region, asset, kind=kind, config=config)[0]
    d = top.direction / np.linalg.norm(top.direction)

    if kind == "B":
        child_c = asset.part_by_id(child_id).mesh.vertices.mean(axis=0)
        parent_c = asset.part_by_id(parent_id).mesh.vertices.mean(axis=0)
        if float(d @ (child_c - parent_c)) < 0:
            d = -d
        return KinematicConstraint(
            kind="B", parent_part=parent_id, child_part=child_id,
            direction=tuple(float(x) for x in d),
            range=_prismatic_range(asset, child_id, d), finalized=False)

    centers = pivot_candidates(region, config.k_max, config.seed)
    pivot = _choose_pivot(region, centers, d)
    return KinematicConstraint(
        kind=kind, parent_part=parent_id, child_part=child_id,
        direction=tuple(float(x) for x in d),
        pivot=tuple(float(x) for x in pivot),
        range=(0.0, float(np.pi / 2)), finalized=False)


def candidate_payload(asset: ObjectAsset, child_id: int, parent_id: int,
                      kind: str = "CB", config: EstimationConfig | None = None) -> bytes:
    """Canonical JSON bytes of the scored candidates for one part pair.

    The review service returns exactly these bytes, so client, CLI, and
    library always see one serialization. Pivot cluster centers ride along
    for pivot selection in the UI.
    """
    if kind not in ("B", "C", "D", "CB"):
        raise ValueError(f"estimation handles kinds B, C, D, CB; got {kind!r}")
    if config is None:
        config = EstimationConfig()
    region = contact_region(_part_cloud(asset, child_id, config),
                            _part_cloud(asset, parent_id, config), config.tau)
    plane = fit_plane(region.all_points())
    cands = score_candidates(gen_axis_candidates(plane, region, config.m, kind),
                             region, asset, kind=kind, config=config)
    centers = pivot_candidates(region, config.k_max, config.seed)
    payload = {
        "child": child_id,
        "parent": parent_id,
        "kind": kind,
        "candidates": [
            {"direction": [float(x) for x in c.direction],
             "pivot": None if c.pivot is None else [float(x) for x in c.pivot],
             "score": float(c.score),
             "provenance": c.provenance}
            for c in cands
        ],
        "pivot_clusters": [[float(x) for x in row] for row in centers],
        "plane_normal": [float(x) for x in plane.normal],
        "plane_rms_residual": float(plane.rms_residual),
    }
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")
